#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "procrisk/date.hpp"

namespace procrisk {

struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProcedureType { open, non_open };
enum class AwardCriterion { lowest_price, meat, other };

/// One procurement procedure assembled from the joined stage tables.
/// Fields a contract never reached (or the source left blank) stay absent.
struct ContractRecord {
  std::string cig;
  std::string authority_id;
  std::optional<std::string> award_id;
  std::optional<Date> publication_date;
  std::optional<Date> submission_deadline;
  std::optional<Date> award_date;
  std::optional<ProcedureType> procedure_type;
  std::optional<AwardCriterion> award_criterion;
  std::optional<double> award_value;
  std::optional<double> paid_value;
  std::optional<long> bids_received;
  std::optional<long> bids_eligible;
  std::optional<long> bids_excluded;
  std::optional<bool> has_variant;
  std::optional<Date> expected_end_date;
  std::optional<Date> actual_end_date;
  std::vector<std::string> winner_ids;

  bool operator==(const ContractRecord&) const = default;
};

/// Binds semantic field names to source columns, one block per stage table.
/// Also carries the parsing conventions of the data snapshot and optional
/// token classes for the enumerated fields.
struct ColumnMapping {
  char delimiter = ',';
  std::string date_format = "%Y-%m-%d";
  char decimal_separator = '.';
  // stage name -> (semantic field -> source column)
  std::map<std::string, std::map<std::string, std::string>> stages;
  // semantic field -> (source token, lowercased -> canonical class token)
  std::map<std::string, std::map<std::string, std::string>> value_classes;
};

ColumnMapping load_column_mapping(const std::filesystem::path& path);

/// Rows of one stage table with semantic field names substituted and values
/// normalized to canonical text (ISO dates, '.' decimals, class tokens).
/// Blank source cells are dropped: absent key means absent value.
struct RawTable {
  std::string name;
  std::filesystem::path source_path;
  std::vector<std::map<std::string, std::string>> rows;
};

/// Known stage names: "call", "award", "variants", "start", "end",
/// "economic", "winners". Other names load fine but contribute no record
/// fields when assembled.
RawTable load_table(const std::filesystem::path& path, const ColumnMapping& mapping,
                    const std::string& stage);

struct IngestReport {
  std::map<std::string, std::size_t> table_rows;
  std::size_t distinct_cigs = 0;
  std::size_t duplicate_call_cigs = 0;   // call rows beyond the first per cig
  std::size_t award_rows_matched = 0;
  std::size_t award_rows_unmatched = 0;  // award cig absent from the call table
  std::size_t cigs_with_multiple_awards = 0;
  std::map<std::string, std::size_t> stage_rows_matched;
  std::map<std::string, std::size_t> stage_rows_unmatched;
  std::map<std::string, std::size_t> stage_extra_rows_per_key;  // rows beyond the first per award_id
  std::size_t records = 0;
  std::size_t dropped_missing_publication_date = 0;
  std::size_t dropped_other_year = 0;
};

/// Left-joins award and stage rows onto the call table. One record per
/// distinct cig, in call-table order of first occurrence; unmatched keys
/// leave fields absent and are counted in the report.
std::vector<ContractRecord> assemble_contracts(const RawTable& call, const RawTable& award,
                                               std::span<const RawTable> stage_tables,
                                               IngestReport* report = nullptr);

/// Keeps records whose publication date falls in `year`; records without a
/// publication date are dropped and counted.
std::vector<ContractRecord> filter_year(std::span<const ContractRecord> records, int year,
                                        IngestReport* report = nullptr);

std::string to_string(ProcedureType t);
std::string to_string(AwardCriterion c);

}  // namespace procrisk
