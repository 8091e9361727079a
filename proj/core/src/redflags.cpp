#include "procrisk/redflags.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace procrisk {

namespace {

// Single-bid predicate: eligible-bid count when known, received count
// otherwise. nullopt when neither variable is present.
std::optional<bool> is_single_bid(const ContractRecord& r) {
  if (r.bids_eligible) return *r.bids_eligible == 1;
  if (r.bids_received) return *r.bids_received == 1;
  return std::nullopt;
}

bool all_but_one_excluded(const ContractRecord& r) {
  return *r.bids_received >= 2 && *r.bids_excluded == *r.bids_received - 1;
}

using Pred = std::function<bool(const ContractRecord&)>;

std::optional<double> proportion(std::span<const ContractRecord> contracts, const Pred& eligible,
                                 const Pred& predicate) {
  std::size_t n = 0, hits = 0;
  for (const auto& r : contracts) {
    if (!eligible(r)) continue;
    ++n;
    if (predicate(r)) ++hits;
  }
  if (n < 2) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<double> value_weighted(std::span<const ContractRecord> contracts,
                                     const Pred& eligible, const Pred& predicate,
                                     FlagQuality& q) {
  std::size_t n = 0;
  double num = 0.0, den = 0.0;
  for (const auto& r : contracts) {
    if (!r.award_value || !eligible(r)) continue;
    ++n;
    den += *r.award_value;
    if (predicate(r)) num += *r.award_value;
  }
  if (n < 2) return std::nullopt;
  if (den == 0.0) {
    ++q.zero_denominators;
    return std::nullopt;
  }
  return num / den;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::optional<double> mean_day_span(std::span<const ContractRecord> contracts,
                                    std::optional<Date> ContractRecord::*from,
                                    std::optional<Date> ContractRecord::*to, FlagQuality& q) {
  std::vector<double> spans;
  for (const auto& r : contracts) {
    if (!(r.*from) || !(r.*to)) continue;
    long days = days_between(*(r.*from), *(r.*to));
    if (days < 0) {
      ++q.negative_spans;  // recording artifact, contract ineligible here
      continue;
    }
    spans.push_back(static_cast<double>(days));
  }
  return mean_of(spans);
}

// Per-contract excluded/received ratios; `restrict` narrows to a subset
// (the all-but-one-excluded flavour). Returns the kept ratios plus the
// count of contracts carrying both bid-count variables.
std::pair<std::vector<double>, std::size_t> exclusion_ratios(
    std::span<const ContractRecord> contracts, bool restrict_all_but_one, FlagQuality& q) {
  std::vector<double> ratios;
  std::size_t with_fields = 0;
  for (const auto& r : contracts) {
    if (!r.bids_received || !r.bids_excluded) continue;
    if (*r.bids_excluded > *r.bids_received) {
      ++q.inconsistent_counts;
      continue;
    }
    ++with_fields;
    if (*r.bids_received == 0) {
      ++q.zero_denominators;
      continue;
    }
    if (restrict_all_but_one && !all_but_one_excluded(r)) continue;
    ratios.push_back(static_cast<double>(*r.bids_excluded) /
                     static_cast<double>(*r.bids_received));
  }
  return {std::move(ratios), with_fields};
}

std::optional<double> mean_relative_deviation(std::span<const ContractRecord> contracts,
                                              bool monetary, FlagQuality& q) {
  std::vector<double> devs;
  for (const auto& r : contracts) {
    double expected = 0.0, actual = 0.0;
    if (monetary) {
      if (!r.award_value || !r.paid_value) continue;
      expected = *r.award_value;
      actual = *r.paid_value;
    } else {
      if (!r.award_date || !r.expected_end_date || !r.actual_end_date) continue;
      long exp_days = days_between(*r.award_date, *r.expected_end_date);
      long act_days = days_between(*r.award_date, *r.actual_end_date);
      if (exp_days < 0 || act_days < 0) {
        ++q.negative_spans;
        continue;
      }
      expected = static_cast<double>(exp_days);
      actual = static_cast<double>(act_days);
    }
    if (expected == 0.0) {
      ++q.zero_denominators;
      continue;
    }
    devs.push_back(std::max(-1.0, (actual - expected) / expected));
  }
  return mean_of(devs);
}

}  // namespace

const std::vector<FlagSpec>& standard_flags() {
  static const std::vector<FlagSpec> flags = {
      {"non_open_count", FlagKind::proportion, FlagPolarity::positive},
      {"non_open_val", FlagKind::weighted_proportion, FlagPolarity::positive},
      {"single_bid_count", FlagKind::proportion, FlagPolarity::positive},
      {"single_bid_val", FlagKind::weighted_proportion, FlagPolarity::positive},
      {"MEAT_count", FlagKind::proportion, FlagPolarity::positive},
      {"MEAT_val", FlagKind::weighted_proportion, FlagPolarity::positive},
      {"advertisement", FlagKind::mean_days, FlagPolarity::two_sided},
      {"evaluation", FlagKind::mean_days, FlagPolarity::two_sided},
      {"excluded_bids", FlagKind::mean_ratio, FlagPolarity::positive},
      {"all_bids_excluded_but_one", FlagKind::proportion, FlagPolarity::positive},
      {"excluded_bids_but_one", FlagKind::mean_ratio, FlagPolarity::positive},
      {"modifications", FlagKind::proportion, FlagPolarity::positive},
      {"amount_deviation", FlagKind::mean_ratio, FlagPolarity::positive},
      {"time_deviation", FlagKind::mean_ratio, FlagPolarity::positive},
      {"winners_homog", FlagKind::homogeneity, FlagPolarity::positive},
  };
  return flags;
}

const FlagSpec& flag_spec(const std::string& flag_id) {
  for (const auto& f : standard_flags())
    if (f.flag_id == flag_id) return f;
  throw std::invalid_argument("unknown red flag: " + flag_id);
}

std::optional<double> winners_homogeneity(std::span<const ContractRecord> contracts) {
  std::map<std::string, std::size_t> wins;
  std::size_t contracts_with_winner = 0, total = 0;
  for (const auto& r : contracts) {
    if (r.winner_ids.empty()) continue;
    ++contracts_with_winner;
    for (const auto& w : r.winner_ids) {
      ++wins[w];
      ++total;
    }
  }
  if (contracts_with_winner < 2) return std::nullopt;
  std::size_t k = wins.size();
  if (k == 1) return 1.0;  // every contract to one firm: maximal concentration
  double sum_sq = 0.0;
  for (const auto& [id, c] : wins) {
    double f = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += f * f;
  }
  double h = 1.0 - static_cast<double>(k) / static_cast<double>(k - 1) * (1.0 - sum_sq);
  return std::clamp(h, 0.0, 1.0);
}

std::optional<double> evaluate_flag(std::span<const ContractRecord> contracts,
                                    const FlagSpec& spec, FlagQuality* quality) {
  FlagQuality local;
  FlagQuality& q = quality ? *quality : local;
  const std::string& id = spec.flag_id;

  auto has_type = [](const ContractRecord& r) { return r.procedure_type.has_value(); };
  auto non_open = [](const ContractRecord& r) {
    return *r.procedure_type == ProcedureType::non_open;
  };
  auto bid_known = [](const ContractRecord& r) { return is_single_bid(r).has_value(); };
  auto single = [](const ContractRecord& r) { return *is_single_bid(r); };
  auto has_criterion = [](const ContractRecord& r) { return r.award_criterion.has_value(); };
  auto meat = [](const ContractRecord& r) { return *r.award_criterion == AwardCriterion::meat; };

  if (id == "non_open_count") return proportion(contracts, has_type, non_open);
  if (id == "non_open_val") return value_weighted(contracts, has_type, non_open, q);
  if (id == "single_bid_count") return proportion(contracts, bid_known, single);
  if (id == "single_bid_val") return value_weighted(contracts, bid_known, single, q);
  if (id == "MEAT_count") return proportion(contracts, has_criterion, meat);
  if (id == "MEAT_val") return value_weighted(contracts, has_criterion, meat, q);
  if (id == "advertisement")
    return mean_day_span(contracts, &ContractRecord::publication_date,
                         &ContractRecord::submission_deadline, q);
  if (id == "evaluation")
    return mean_day_span(contracts, &ContractRecord::submission_deadline,
                         &ContractRecord::award_date, q);
  if (id == "excluded_bids") {
    auto [ratios, with_fields] = exclusion_ratios(contracts, false, q);
    (void)with_fields;
    return mean_of(ratios);
  }
  if (id == "all_bids_excluded_but_one") {
    auto counts_known = [&q](const ContractRecord& r) {
      if (!r.bids_received || !r.bids_excluded) return false;
      if (*r.bids_excluded > *r.bids_received) {
        ++q.inconsistent_counts;
        return false;
      }
      return true;
    };
    return proportion(contracts, counts_known, all_but_one_excluded);
  }
  if (id == "excluded_bids_but_one") {
    auto [ratios, with_fields] = exclusion_ratios(contracts, true, q);
    if (with_fields < 2) return std::nullopt;
    if (ratios.empty()) return std::nullopt;  // no qualifying procedure to average over
    double sum = 0.0;
    for (double v : ratios) sum += v;
    return sum / static_cast<double>(ratios.size());
  }
  if (id == "modifications") {
    auto concluded = [](const ContractRecord& r) {
      return r.actual_end_date.has_value() && r.has_variant.has_value();
    };
    auto modified = [](const ContractRecord& r) { return *r.has_variant; };
    return proportion(contracts, concluded, modified);
  }
  if (id == "amount_deviation") return mean_relative_deviation(contracts, true, q);
  if (id == "time_deviation") return mean_relative_deviation(contracts, false, q);
  if (id == "winners_homog") return winners_homogeneity(contracts);
  throw std::invalid_argument("unknown red flag: " + id);
}

std::size_t IndicatorMatrix::flag_index(const std::string& flag_id) const {
  for (std::size_t j = 0; j < flags.size(); ++j)
    if (flags[j] == flag_id) return j;
  throw std::invalid_argument("flag not in matrix: " + flag_id);
}

IndicatorMatrix build_indicator_matrix(std::span<const ContractRecord> records,
                                       std::span<const FlagSpec> specs, QualityReport* quality) {
  // Canonical ordering makes the matrix independent of input permutation,
  // bit for bit.
  std::vector<ContractRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const ContractRecord& a, const ContractRecord& b) {
    if (a.authority_id != b.authority_id) return a.authority_id < b.authority_id;
    if (a.cig != b.cig) return a.cig < b.cig;
    return a.award_id < b.award_id;
  });

  IndicatorMatrix m;
  for (const auto& spec : specs) m.flags.push_back(spec.flag_id);
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].authority_id == sorted[i].authority_id) ++j;
    m.authorities.push_back(sorted[i].authority_id);
    if (quality && j - i == 1) ++quality->single_contract_authorities;
    i = j;
  }
  if (quality) quality->authorities = m.authorities.size();
  m.cells.assign(m.authorities.size() * m.flags.size(), std::nullopt);

  std::size_t row = 0, begin = 0;
  while (begin < sorted.size()) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].authority_id == sorted[begin].authority_id) ++end;
    std::span<const ContractRecord> group(sorted.data() + begin, end - begin);
    for (std::size_t j = 0; j < specs.size(); ++j) {
      FlagQuality* fq = quality ? &quality->per_flag[specs[j].flag_id] : nullptr;
      m.at(row, j) = evaluate_flag(group, specs[j], fq);
    }
    ++row;
    begin = end;
  }
  return m;
}

}  // namespace procrisk
