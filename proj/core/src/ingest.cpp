#include "procrisk/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "procrisk/csv.hpp"

namespace procrisk {

namespace {

enum class FieldKind { text, date, money, count, procedure, criterion };

FieldKind field_kind(const std::string& semantic) {
  static const std::unordered_map<std::string, FieldKind> kinds = {
      {"cig", FieldKind::text},
      {"authority_id", FieldKind::text},
      {"award_id", FieldKind::text},
      {"winner_id", FieldKind::text},
      {"publication_date", FieldKind::date},
      {"submission_deadline", FieldKind::date},
      {"award_date", FieldKind::date},
      {"expected_end_date", FieldKind::date},
      {"actual_end_date", FieldKind::date},
      {"award_value", FieldKind::money},
      {"paid_value", FieldKind::money},
      {"bids_received", FieldKind::count},
      {"bids_eligible", FieldKind::count},
      {"bids_excluded", FieldKind::count},
      {"procedure_type", FieldKind::procedure},
      {"award_criterion", FieldKind::criterion},
  };
  auto it = kinds.find(semantic);
  return it == kinds.end() ? FieldKind::text : it->second;
}

const std::vector<std::string>& stage_keys(const std::string& stage) {
  static const std::vector<std::string> call_keys = {"cig", "authority_id"};
  static const std::vector<std::string> award_keys = {"cig", "award_id"};
  static const std::vector<std::string> other_keys = {"award_id"};
  if (stage == "call") return call_keys;
  if (stage == "award") return award_keys;
  return other_keys;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

[[noreturn]] void row_error(const std::string& stage, std::size_t row, const std::string& column,
                            const std::string& what, const std::string& value) {
  throw IngestError("stage '" + stage + "' row " + std::to_string(row + 1) + ": " + what +
                    " in column '" + column + "': '" + value + "'");
}

// Normalizes a nonempty trimmed source value to canonical text, or throws.
std::string normalize_value(const std::string& semantic, const std::string& value,
                            const ColumnMapping& mapping, const std::string& stage,
                            std::size_t row, const std::string& column) {
  auto classify = [&](const char* fallback_err) -> std::string {
    auto cls = mapping.value_classes.find(semantic);
    if (cls != mapping.value_classes.end()) {
      auto hit = cls->second.find(lower(value));
      if (hit != cls->second.end()) return hit->second;
    }
    std::string token = lower(value);
    if (semantic == "procedure_type") {
      if (token == "open") return "open";
      if (token == "non_open" || token == "non-open" || token == "nonopen") return "non_open";
      row_error(stage, row, column, fallback_err, value);
    }
    // award_criterion: anything that is not price or MEAT counts as "other"
    if (token == "meat") return "meat";
    if (token == "lowest_price" || token == "lowest-price" || token == "price")
      return "lowest_price";
    return "other";
  };

  switch (field_kind(semantic)) {
    case FieldKind::text:
      return value;
    case FieldKind::date: {
      auto d = parse_date(value, mapping.date_format);
      if (!d) row_error(stage, row, column, "unparseable date", value);
      return format_iso(*d);
    }
    case FieldKind::money: {
      std::string t = value;
      if (mapping.decimal_separator != '.')
        std::replace(t.begin(), t.end(), mapping.decimal_separator, '.');
      double v = 0.0;
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || p != t.data() + t.size() || !(v >= 0.0))
        row_error(stage, row, column, "unparseable money amount", value);
      return format_double(v);
    }
    case FieldKind::count: {
      long v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size() || v < 0)
        row_error(stage, row, column, "unparseable count", value);
      return std::to_string(v);
    }
    case FieldKind::procedure:
      return classify("unrecognised procedure type");
    case FieldKind::criterion:
      return classify("unrecognised award criterion");
  }
  return value;
}

std::optional<std::string> field(const std::map<std::string, std::string>& row,
                                 const std::string& name) {
  auto it = row.find(name);
  if (it == row.end()) return std::nullopt;
  return it->second;
}

// Canonical-form parsers; values come from load_table and always parse.
std::optional<Date> date_field(const std::map<std::string, std::string>& row,
                             const std::string& name) {
  auto v = field(row, name);
  if (!v) return std::nullopt;
  return parse_date(*v, "%Y-%m-%d");
}

std::optional<double> money_field(const std::map<std::string, std::string>& row,
                                const std::string& name) {
  auto v = field(row, name);
  if (!v) return std::nullopt;
  return std::stod(*v);
}

std::optional<long> count_field(const std::map<std::string, std::string>& row,
                              const std::string& name) {
  auto v = field(row, name);
  if (!v) return std::nullopt;
  return std::stol(*v);
}

}  // namespace

std::string to_string(ProcedureType t) { return t == ProcedureType::open ? "open" : "non_open"; }

std::string to_string(AwardCriterion c) {
  switch (c) {
    case AwardCriterion::lowest_price: return "lowest_price";
    case AwardCriterion::meat: return "meat";
    default: return "other";
  }
}

ColumnMapping load_column_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open column mapping: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("column mapping " + path.string() + ": " + e.what());
  }
  ColumnMapping m;
  if (j.contains("delimiter")) {
    std::string d = j["delimiter"].get<std::string>();
    if (d.size() != 1) throw IngestError("column mapping: delimiter must be one character");
    m.delimiter = d[0];
  }
  if (j.contains("date_format")) m.date_format = j["date_format"].get<std::string>();
  if (j.contains("decimal_separator")) {
    std::string d = j["decimal_separator"].get<std::string>();
    if (d.size() != 1) throw IngestError("column mapping: decimal_separator must be one character");
    m.decimal_separator = d[0];
  }
  if (!j.contains("stages") || !j["stages"].is_object())
    throw IngestError("column mapping: missing 'stages' object");
  for (auto& [stage, fields] : j["stages"].items())
    for (auto& [semantic, column] : fields.items())
      m.stages[stage][semantic] = column.get<std::string>();
  if (j.contains("value_classes"))
    for (auto& [semantic, tokens] : j["value_classes"].items())
      for (auto& [token, cls] : tokens.items()) {
        std::string target = cls.get<std::string>();
        bool ok = true;
        if (semantic == "procedure_type") ok = target == "open" || target == "non_open";
        if (semantic == "award_criterion")
          ok = target == "lowest_price" || target == "meat" || target == "other";
        if (!ok)
          throw IngestError("column mapping: invalid class '" + target + "' for field '" +
                            semantic + "'");
        m.value_classes[semantic][lower(token)] = target;
      }
  return m;
}

RawTable load_table(const std::filesystem::path& path, const ColumnMapping& mapping,
                    const std::string& stage) {
  auto stage_it = mapping.stages.find(stage);
  if (stage_it == mapping.stages.end())
    throw IngestError("no column mapping declared for stage '" + stage + "'");
  const auto& fields = stage_it->second;
  for (const auto& key : stage_keys(stage))
    if (!fields.count(key))
      throw IngestError("stage '" + stage + "': key field '" + key + "' not mapped");

  csv::Table table;
  try {
    table = csv::read_file(path, mapping.delimiter);
  } catch (const csv::ParseError& e) {
    throw IngestError(e.what());
  }

  std::map<std::string, std::size_t> columns;  // semantic -> source column index
  for (const auto& [semantic, source] : fields) {
    if (!table.has_column(source))
      throw IngestError("stage '" + stage + "' file " + path.string() +
                        ": missing mapped column '" + source + "'");
    columns[semantic] = table.column(source);
  }

  RawTable out;
  out.name = stage;
  out.source_path = path;
  out.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::map<std::string, std::string> row;
    for (const auto& [semantic, col] : columns) {
      std::string value = trim(table.rows[r][col]);
      if (value.empty()) continue;  // blank cell -> absent, never zero
      row[semantic] = normalize_value(semantic, value, mapping, stage, r, fields.at(semantic));
    }
    for (const auto& key : stage_keys(stage))
      if (!row.count(key))
        throw IngestError("stage '" + stage + "' row " + std::to_string(r + 1) +
                          ": empty key column '" + fields.at(key) + "'");
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<ContractRecord> assemble_contracts(const RawTable& call, const RawTable& award,
                                               std::span<const RawTable> stage_tables,
                                               IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep.table_rows[call.name.empty() ? "call" : call.name] = call.rows.size();
  rep.table_rows[award.name.empty() ? "award" : award.name] = award.rows.size();

  // Distinct cigs in call-table order, first occurrence wins.
  std::vector<const std::map<std::string, std::string>*> call_rows;
  std::unordered_map<std::string, std::size_t> cig_index;
  for (const auto& row : call.rows) {
    const std::string& cig = row.at("cig");
    if (cig_index.count(cig)) {
      ++rep.duplicate_call_cigs;
      continue;
    }
    cig_index[cig] = call_rows.size();
    call_rows.push_back(&row);
  }
  rep.distinct_cigs = call_rows.size();

  // One award row per cig: earliest award_date, ties by lexicographic
  // award_id, then file order. Undated rows sort after dated ones.
  struct AwardPick {
    const std::map<std::string, std::string>* row = nullptr;
    int count = 0;
  };
  std::unordered_map<std::string, AwardPick> awards;
  auto award_rank = [](const std::map<std::string, std::string>& row) {
    auto d = field(row, "award_date");
    return std::make_pair(d ? *d : std::string("\x7f"), row.at("award_id"));
  };
  for (const auto& row : award.rows) {
    const std::string& cig = row.at("cig");
    if (!cig_index.count(cig)) {
      ++rep.award_rows_unmatched;
      continue;
    }
    ++rep.award_rows_matched;
    auto& pick = awards[cig];
    ++pick.count;
    if (!pick.row || award_rank(row) < award_rank(*pick.row)) pick.row = &row;
  }
  for (const auto& [cig, pick] : awards)
    if (pick.count > 1) ++rep.cigs_with_multiple_awards;

  // Stage rows grouped by award_id.
  std::unordered_map<std::string, std::string> award_id_to_cig;
  for (const auto& [cig, pick] : awards) {
    auto id = field(*pick.row, "award_id");
    if (id) award_id_to_cig[*id] = cig;
  }
  struct StageRows {
    std::vector<const std::map<std::string, std::string>*> rows;
  };
  std::vector<std::pair<std::string, std::unordered_map<std::string, StageRows>>> staged;
  for (const auto& t : stage_tables) {
    rep.table_rows[t.name] = t.rows.size();
    std::unordered_map<std::string, StageRows> by_key;
    for (const auto& row : t.rows) {
      const std::string& id = row.at("award_id");
      if (!award_id_to_cig.count(id)) {
        ++rep.stage_rows_unmatched[t.name];
        continue;
      }
      ++rep.stage_rows_matched[t.name];
      auto& bucket = by_key[id];
      if (!bucket.rows.empty()) ++rep.stage_extra_rows_per_key[t.name];
      bucket.rows.push_back(&row);
    }
    staged.emplace_back(t.name, std::move(by_key));
  }

  std::vector<ContractRecord> out;
  out.reserve(call_rows.size());
  for (const auto* call_row : call_rows) {
    ContractRecord rec;
    rec.cig = call_row->at("cig");
    rec.authority_id = call_row->at("authority_id");
    rec.publication_date = date_field(*call_row, "publication_date");
    rec.submission_deadline = date_field(*call_row, "submission_deadline");
    if (auto p = field(*call_row, "procedure_type"))
      rec.procedure_type = *p == "open" ? ProcedureType::open : ProcedureType::non_open;

    auto award_it = awards.find(rec.cig);
    if (award_it != awards.end()) {
      const auto& row = *award_it->second.row;
      rec.award_id = field(row, "award_id");
      rec.award_date = date_field(row, "award_date");
      if (auto c = field(row, "award_criterion")) {
        if (*c == "meat") rec.award_criterion = AwardCriterion::meat;
        else if (*c == "lowest_price") rec.award_criterion = AwardCriterion::lowest_price;
        else rec.award_criterion = AwardCriterion::other;
      }
      rec.award_value = money_field(row, "award_value");
      rec.bids_received = count_field(row, "bids_received");
      rec.bids_eligible = count_field(row, "bids_eligible");
      rec.bids_excluded = count_field(row, "bids_excluded");
      rec.has_variant = false;  // awarded contracts: variant presence is knowable
    }

    if (rec.award_id) {
      for (const auto& [stage, by_key] : staged) {
        auto hit = by_key.find(*rec.award_id);
        if (hit == by_key.end()) continue;
        const auto& rows = hit->second.rows;
        if (stage == "variants") {
          rec.has_variant = true;
        } else if (stage == "end") {
          rec.expected_end_date = date_field(*rows.front(), "expected_end_date");
          rec.actual_end_date = date_field(*rows.front(), "actual_end_date");
        } else if (stage == "economic") {
          rec.paid_value = money_field(*rows.front(), "paid_value");
        } else if (stage == "winners") {
          for (const auto* row : rows) {
            auto w = field(*row, "winner_id");
            if (w && std::find(rec.winner_ids.begin(), rec.winner_ids.end(), *w) ==
                         rec.winner_ids.end())
              rec.winner_ids.push_back(*w);
          }
        }
      }
    }
    out.push_back(std::move(rec));
  }
  rep.records = out.size();
  return out;
}

std::vector<ContractRecord> filter_year(std::span<const ContractRecord> records, int year,
                                        IngestReport* report) {
  std::vector<ContractRecord> out;
  for (const auto& rec : records) {
    if (!rec.publication_date) {
      if (report) ++report->dropped_missing_publication_date;
      continue;
    }
    if (rec.publication_date->year != year) {
      if (report) ++report->dropped_other_year;
      continue;
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace procrisk
