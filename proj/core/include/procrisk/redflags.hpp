#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procrisk/ingest.hpp"

namespace procrisk {

enum class FlagKind { proportion, weighted_proportion, mean_days, mean_ratio, homogeneity };
enum class FlagPolarity { positive, two_sided };

struct FlagSpec {
  std::string flag_id;
  FlagKind kind;
  FlagPolarity polarity;
};

/// The fifteen indicators, in canonical order. advertisement and evaluation
/// are the only two-sided ones: both tails signal risk.
const std::vector<FlagSpec>& standard_flags();
const FlagSpec& flag_spec(const std::string& flag_id);  // throws on unknown id

/// Data-quality counters accumulated while evaluating one flag.
struct FlagQuality {
  std::size_t negative_spans = 0;      // date pairs running backwards
  std::size_t zero_denominators = 0;   // per-contract ratios with nothing to divide by
  std::size_t inconsistent_counts = 0; // bids_excluded > bids_received
};

/// Value of one red flag for one authority's contracts, or absent when
/// fewer than two contracts carry the variables the flag needs.
std::optional<double> evaluate_flag(std::span<const ContractRecord> contracts,
                                    const FlagSpec& spec, FlagQuality* quality = nullptr);

/// Winner-concentration index on [0,1]: 0 for uniform shares over two or
/// more winners, 1 when a single firm takes everything.
std::optional<double> winners_homogeneity(std::span<const ContractRecord> contracts);

/// Continuous indicator values per (authority, flag). Authorities sorted
/// lexicographically; cells absent where a flag could not be computed.
struct IndicatorMatrix {
  std::vector<std::string> authorities;
  std::vector<std::string> flags;
  std::vector<std::optional<double>> cells;  // row-major, authorities x flags

  std::optional<double>& at(std::size_t i, std::size_t j) { return cells[i * flags.size() + j]; }
  const std::optional<double>& at(std::size_t i, std::size_t j) const {
    return cells[i * flags.size() + j];
  }
  std::size_t flag_index(const std::string& flag_id) const;
};

struct QualityReport {
  std::map<std::string, FlagQuality> per_flag;
  std::size_t authorities = 0;
  std::size_t single_contract_authorities = 0;
};

IndicatorMatrix build_indicator_matrix(std::span<const ContractRecord> records,
                                       std::span<const FlagSpec> specs,
                                       QualityReport* quality = nullptr);

}  // namespace procrisk
