#include "procrisk/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "procrisk/rng.hpp"

namespace procrisk {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt_fixed(double v, int prec) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw csv::ParseError("bad number: '" + s + "'");
  return v;
}

json json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_json(const json& rows) {
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  return m;
}

json json_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

IndexKind index_from_string(const std::string& s) {
  if (s == "aic") return IndexKind::aic;
  if (s == "sabic") return IndexKind::sabic;
  if (s == "hqc") return IndexKind::hqc;
  if (s == "bic") return IndexKind::bic;
  throw std::invalid_argument("unknown selection index: " + s);
}

}  // namespace

std::string library_version() { return "0.1.0"; }

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "absent";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j = read_json(path);
  std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  RunConfig c;
  if (!j.contains("mapping")) throw std::invalid_argument("config: missing 'mapping'");
  c.mapping_path = resolve(j["mapping"].get<std::string>());
  if (!j.contains("tables") || !j["tables"].is_object())
    throw std::invalid_argument("config: missing 'tables' object");
  for (auto& [stage, p] : j["tables"].items()) c.tables[stage] = resolve(p.get<std::string>());
  if (!j.contains("reference_year")) throw std::invalid_argument("config: missing 'reference_year'");
  c.reference_year = j["reference_year"].get<int>();
  if (j.contains("flags")) c.flag_ids = j["flags"].get<std::vector<std::string>>();
  if (j.contains("categories")) c.categories = j["categories"].get<int>();
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.contains("dims")) {
    c.dims_min = j["dims"].value("min", 1);
    c.dims_max = j["dims"].value("max", c.dims_min);
  }
  if (j.contains("fit")) {
    const json& f = j["fit"];
    c.fit.gh_nodes_per_dim = f.value("gh_nodes_per_dim", c.fit.gh_nodes_per_dim);
    c.fit.qmc_size = f.value("qmc_size", c.fit.qmc_size);
    c.fit.max_tensor_dims = f.value("max_tensor_dims", c.fit.max_tensor_dims);
    c.fit.max_em_cycles = f.value("max_em_cycles", c.fit.max_em_cycles);
    c.fit.loglik_rel_tol = f.value("loglik_rel_tol", c.fit.loglik_rel_tol);
    c.fit.param_abs_tol = f.value("param_abs_tol", c.fit.param_abs_tol);
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    c.selection_threshold_pct = s.value("threshold_pct", c.selection_threshold_pct);
    if (s.contains("indexes")) {
      c.selection_indexes.clear();
      for (const auto& name : s["indexes"]) c.selection_indexes.push_back(index_from_string(name));
    }
  }
  if (j.contains("loading_cut")) c.loading_cut = j["loading_cut"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  if (j.contains("out_dir")) c.out_dir = resolve(j["out_dir"].get<std::string>());

  if (c.dims_min < 1 || c.dims_max < c.dims_min)
    throw std::invalid_argument("config: need 1 <= dims.min <= dims.max");
  if (c.categories < 2) throw std::invalid_argument("config: categories must be >= 2");
  if (c.threads < 1) c.threads = 1;
  c.fit.categories = c.categories;
  return c;
}

// ---------------------------------------------------------------------------
// persisted intermediates

namespace {

const std::vector<std::string>& contract_columns() {
  static const std::vector<std::string> cols = {
      "cig",           "authority_id",   "award_id",      "publication_date",
      "submission_deadline", "award_date", "procedure_type", "award_criterion",
      "award_value",   "paid_value",     "bids_received", "bids_eligible",
      "bids_excluded", "has_variant",    "expected_end_date", "actual_end_date",
      "winner_ids"};
  return cols;
}

std::string opt_date(const std::optional<Date>& d) { return d ? format_iso(*d) : ""; }
std::string opt_num(const std::optional<double>& v) { return v ? fmt(*v) : ""; }
std::string opt_count(const std::optional<long>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

void write_contracts(const std::filesystem::path& path, std::span<const ContractRecord> records) {
  csv::Table t;
  t.header = contract_columns();
  for (const auto& r : records) {
    std::string winners;
    for (std::size_t i = 0; i < r.winner_ids.size(); ++i) {
      if (i) winners += '|';
      winners += r.winner_ids[i];
    }
    t.rows.push_back({r.cig, r.authority_id, r.award_id.value_or(""),
                      opt_date(r.publication_date), opt_date(r.submission_deadline),
                      opt_date(r.award_date),
                      r.procedure_type ? to_string(*r.procedure_type) : "",
                      r.award_criterion ? to_string(*r.award_criterion) : "",
                      opt_num(r.award_value), opt_num(r.paid_value),
                      opt_count(r.bids_received), opt_count(r.bids_eligible),
                      opt_count(r.bids_excluded),
                      r.has_variant ? (*r.has_variant ? "true" : "false") : "",
                      opt_date(r.expected_end_date), opt_date(r.actual_end_date), winners});
  }
  csv::write_file(path, t, ',');
}

std::vector<ContractRecord> read_contracts(const std::filesystem::path& path) {
  csv::Table t = csv::read_file(path, ',');
  std::map<std::string, std::size_t> col;
  for (const auto& name : contract_columns()) col[name] = t.column(name);

  std::vector<ContractRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    ContractRecord r;
    auto get = [&](const std::string& name) -> const std::string& { return row[col.at(name)]; };
    r.cig = get("cig");
    r.authority_id = get("authority_id");
    if (!get("award_id").empty()) r.award_id = get("award_id");
    auto date = [&](const std::string& name) -> std::optional<Date> {
      const std::string& s = get(name);
      return s.empty() ? std::nullopt : parse_date(s, "%Y-%m-%d");
    };
    r.publication_date = date("publication_date");
    r.submission_deadline = date("submission_deadline");
    r.award_date = date("award_date");
    if (!get("procedure_type").empty())
      r.procedure_type =
          get("procedure_type") == "open" ? ProcedureType::open : ProcedureType::non_open;
    if (!get("award_criterion").empty()) {
      const std::string& c = get("award_criterion");
      r.award_criterion = c == "meat" ? AwardCriterion::meat
                          : c == "lowest_price" ? AwardCriterion::lowest_price
                                                : AwardCriterion::other;
    }
    if (!get("award_value").empty()) r.award_value = parse_double(get("award_value"));
    if (!get("paid_value").empty()) r.paid_value = parse_double(get("paid_value"));
    auto count = [&](const std::string& name) -> std::optional<long> {
      const std::string& s = get(name);
      return s.empty() ? std::optional<long>{} : std::stol(s);
    };
    r.bids_received = count("bids_received");
    r.bids_eligible = count("bids_eligible");
    r.bids_excluded = count("bids_excluded");
    if (!get("has_variant").empty()) r.has_variant = get("has_variant") == "true";
    r.expected_end_date = date("expected_end_date");
    r.actual_end_date = date("actual_end_date");
    const std::string& winners = get("winner_ids");
    std::size_t pos = 0;
    while (pos <= winners.size() && !winners.empty()) {
      std::size_t bar = winners.find('|', pos);
      if (bar == std::string::npos) {
        r.winner_ids.push_back(winners.substr(pos));
        break;
      }
      r.winner_ids.push_back(winners.substr(pos, bar - pos));
      pos = bar + 1;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_indicator_matrix(const std::filesystem::path& path, const IndicatorMatrix& m) {
  csv::Table t;
  t.header.push_back("authority_id");
  for (const auto& f : m.flags) t.header.push_back(f);
  for (std::size_t i = 0; i < m.authorities.size(); ++i) {
    std::vector<std::string> row{m.authorities[i]};
    for (std::size_t j = 0; j < m.flags.size(); ++j)
      row.push_back(m.at(i, j) ? fmt(*m.at(i, j)) : "");
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t, ',');
}

IndicatorMatrix read_indicator_matrix(const std::filesystem::path& path) {
  csv::Table t = csv::read_file(path, ',');
  if (t.header.empty() || t.header[0] != "authority_id")
    throw csv::ParseError(path.string() + ": first column must be authority_id");
  IndicatorMatrix m;
  m.flags.assign(t.header.begin() + 1, t.header.end());
  for (const auto& row : t.rows) {
    m.authorities.push_back(row[0]);
    for (std::size_t j = 1; j < row.size(); ++j)
      m.cells.push_back(row[j].empty() ? std::optional<double>{} : parse_double(row[j]));
  }
  return m;
}

void write_categorical_matrix(const std::filesystem::path& path, const CategoricalMatrix& m) {
  csv::Table t;
  t.header.push_back("authority_id");
  for (const auto& f : m.flags) t.header.push_back(f);
  for (std::size_t i = 0; i < m.authorities.size(); ++i) {
    std::vector<std::string> row{m.authorities[i]};
    for (std::size_t j = 0; j < m.flags.size(); ++j)
      row.push_back(m.at(i, j) ? std::to_string(*m.at(i, j)) : "");
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t, ',');
}

CategoricalMatrix read_categorical_matrix(const std::filesystem::path& path, int categories) {
  csv::Table t = csv::read_file(path, ',');
  if (t.header.empty() || t.header[0] != "authority_id")
    throw csv::ParseError(path.string() + ": first column must be authority_id");
  CategoricalMatrix m;
  m.categories = categories;
  m.flags.assign(t.header.begin() + 1, t.header.end());
  for (const auto& row : t.rows) {
    m.authorities.push_back(row[0]);
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j].empty()) {
        m.cells.push_back(std::nullopt);
      } else {
        int v = std::stoi(row[j]);
        if (v < 0 || v >= categories)
          throw csv::ParseError(path.string() + ": category " + row[j] + " out of range");
        m.cells.push_back(v);
      }
    }
  }
  return m;
}

void write_fit_result(const std::filesystem::path& path, const FitResult& fit, int dims,
                      const std::vector<std::string>& item_names) {
  json j;
  j["dims"] = dims;
  j["items"] = item_names;
  j["categories"] = fit.config.categories;
  j["loglik"] = fit.loglik;
  j["free_parameters"] = fit.free_parameters;
  j["rows_used"] = fit.rows_used;
  j["rows_skipped"] = fit.rows_skipped;
  j["em_cycles"] = fit.em_cycles;
  j["converged"] = fit.converged;
  j["aic"] = fit.aic;
  j["sabic"] = fit.sabic;
  j["hqc"] = fit.hqc;
  j["bic"] = fit.bic;
  j["slopes"] = json_matrix(fit.params.slopes);
  j["intercepts"] = json_matrix(fit.params.intercepts);
  j["rotation"] = {{"loadings", json_matrix(fit.rotation.loadings)},
                   {"factor_correlations", json_matrix(fit.rotation.factor_correlations)},
                   {"communalities", json_vector(fit.rotation.communalities)},
                   {"uniquenesses", json_vector(fit.rotation.uniquenesses)},
                   {"ss_loadings", json_vector(fit.rotation.ss_loadings)},
                   {"explained_variance_prop", json_vector(fit.rotation.explained_variance_prop)},
                   {"criterion", fit.rotation.criterion}};
  j["irt"] = {{"discrimination", json_vector(fit.irt.discrimination)},
              {"difficulties", json_matrix(fit.irt.difficulties)}};
  j["config"] = {{"categories", fit.config.categories},
                 {"gh_nodes_per_dim", fit.config.gh_nodes_per_dim},
                 {"qmc_size", fit.config.qmc_size},
                 {"max_tensor_dims", fit.config.max_tensor_dims},
                 {"seed", fit.config.seed},
                 {"max_em_cycles", fit.config.max_em_cycles},
                 {"loglik_rel_tol", fit.config.loglik_rel_tol},
                 {"param_abs_tol", fit.config.param_abs_tol},
                 {"rotation_gamma", fit.config.rotation.gamma},
                 {"rotation_seed", fit.config.rotation.seed},
                 {"rotation_random_starts", fit.config.rotation.random_starts}};
  write_text(path, j.dump(2) + "\n");
}

namespace {

FitResult read_fit_result(const std::filesystem::path& path, std::vector<std::string>& item_names,
                          int& dims) {
  json j = read_json(path);
  FitResult fit;
  dims = j["dims"].get<int>();
  item_names = j["items"].get<std::vector<std::string>>();
  fit.loglik = j["loglik"].get<double>();
  fit.free_parameters = j["free_parameters"].get<int>();
  fit.rows_used = j["rows_used"].get<std::size_t>();
  fit.rows_skipped = j["rows_skipped"].get<std::size_t>();
  fit.em_cycles = j["em_cycles"].get<int>();
  fit.converged = j["converged"].get<bool>();
  fit.aic = j["aic"].get<double>();
  fit.sabic = j["sabic"].get<double>();
  fit.hqc = j["hqc"].get<double>();
  fit.bic = j["bic"].get<double>();
  fit.params.slopes = matrix_json(j["slopes"]);
  fit.params.intercepts = matrix_json(j["intercepts"]);
  const json& r = j["rotation"];
  fit.rotation.loadings = matrix_json(r["loadings"]);
  fit.rotation.factor_correlations = matrix_json(r["factor_correlations"]);
  fit.rotation.communalities = vector_json(r["communalities"]);
  fit.rotation.uniquenesses = vector_json(r["uniquenesses"]);
  fit.rotation.ss_loadings = vector_json(r["ss_loadings"]);
  fit.rotation.explained_variance_prop = vector_json(r["explained_variance_prop"]);
  fit.rotation.criterion = r["criterion"].get<double>();
  fit.irt.items = item_names;
  fit.irt.discrimination = vector_json(j["irt"]["discrimination"]);
  fit.irt.difficulties = matrix_json(j["irt"]["difficulties"]);
  fit.config.categories = j["categories"].get<int>();
  return fit;
}

}  // namespace

csv::Table rotated_loading_table(const FitResult& fit, std::optional<double> cut) {
  const auto& rot = fit.rotation;
  const Eigen::Index J = rot.loadings.rows(), D = rot.loadings.cols();
  csv::Table t;
  t.header.push_back("red_flag");
  for (Eigen::Index d = 0; d < D; ++d) t.header.push_back("D" + std::to_string(d + 1));
  t.header.push_back("h2");

  auto num = [&](double v) { return cut ? fmt_fixed(v, 3) : fmt(v); };
  for (Eigen::Index jrow = 0; jrow < J; ++jrow) {
    std::vector<std::string> row;
    row.push_back(fit.irt.items.size() == static_cast<std::size_t>(J)
                      ? fit.irt.items[static_cast<std::size_t>(jrow)]
                      : "item_" + std::to_string(jrow + 1));
    for (Eigen::Index d = 0; d < D; ++d) {
      double l = rot.loadings(jrow, d);
      row.push_back(cut && std::fabs(l) < *cut ? "" : num(l));
    }
    row.push_back(num(rot.communalities(jrow)));
    t.rows.push_back(std::move(row));
  }
  std::vector<std::string> ss{"ss_loadings"}, ev{"explained_variance_prop"};
  for (Eigen::Index d = 0; d < D; ++d) {
    ss.push_back(num(rot.ss_loadings(d)));
    ev.push_back(num(rot.explained_variance_prop(d)));
  }
  ss.push_back("");
  ev.push_back("");
  t.rows.push_back(std::move(ss));
  t.rows.push_back(std::move(ev));
  return t;
}

csv::Table irt_table(const FitResult& fit) {
  const Eigen::Index J = fit.irt.discrimination.size();
  const Eigen::Index Cm1 = fit.irt.difficulties.cols();
  csv::Table t;
  t.header.push_back("red_flag");
  t.header.push_back("discrimination");
  for (Eigen::Index y = 0; y < Cm1; ++y) t.header.push_back("difficulty_" + std::to_string(y + 1));
  for (Eigen::Index jrow = 0; jrow < J; ++jrow) {
    std::vector<std::string> row;
    row.push_back(fit.irt.items.size() == static_cast<std::size_t>(J)
                      ? fit.irt.items[static_cast<std::size_t>(jrow)]
                      : "item_" + std::to_string(jrow + 1));
    row.push_back(fmt(fit.irt.discrimination(jrow)));
    for (Eigen::Index y = 0; y < Cm1; ++y) row.push_back(fmt(fit.irt.difficulties(jrow, y)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// stages

namespace {

struct StageContext {
  const RunConfig& config;
  StageRecord& record;

  std::filesystem::path out(const std::string& name) const {
    record.artifacts.push_back(name);
    return config.out_dir / name;
  }
  std::filesystem::path in(const std::string& name) const { return config.out_dir / name; }
};

std::vector<FlagSpec> configured_specs(const RunConfig& config) {
  std::vector<FlagSpec> specs;
  if (config.flag_ids.empty()) {
    specs = standard_flags();
  } else {
    for (const auto& id : config.flag_ids) specs.push_back(flag_spec(id));
  }
  return specs;
}

void stage_ingest(StageContext ctx) {
  const RunConfig& c = ctx.config;
  ColumnMapping mapping = load_column_mapping(c.mapping_path);
  if (!c.tables.count("call") || !c.tables.count("award"))
    throw IngestError("config must list 'call' and 'award' tables");

  RawTable call = load_table(c.tables.at("call"), mapping, "call");
  RawTable award = load_table(c.tables.at("award"), mapping, "award");
  std::vector<RawTable> stages;
  for (const auto& [name, path] : c.tables) {
    if (name == "call" || name == "award") continue;
    stages.push_back(load_table(path, mapping, name));
  }

  IngestReport report;
  auto records = assemble_contracts(call, award, stages, &report);
  auto filtered = filter_year(records, c.reference_year, &report);
  write_contracts(ctx.out("contracts.csv"), filtered);

  json j;
  j["table_rows"] = report.table_rows;
  j["distinct_cigs"] = report.distinct_cigs;
  j["duplicate_call_cigs"] = report.duplicate_call_cigs;
  j["award_rows_matched"] = report.award_rows_matched;
  j["award_rows_unmatched"] = report.award_rows_unmatched;
  j["cigs_with_multiple_awards"] = report.cigs_with_multiple_awards;
  j["stage_rows_matched"] = report.stage_rows_matched;
  j["stage_rows_unmatched"] = report.stage_rows_unmatched;
  j["stage_extra_rows_per_key"] = report.stage_extra_rows_per_key;
  j["records_assembled"] = report.records;
  j["reference_year"] = c.reference_year;
  j["records_in_reference_year"] = filtered.size();
  j["dropped_missing_publication_date"] = report.dropped_missing_publication_date;
  j["dropped_other_year"] = report.dropped_other_year;
  write_text(ctx.out("ingest_report.json"), j.dump(2) + "\n");
}

void stage_flags(StageContext ctx) {
  auto records = read_contracts(ctx.in("contracts.csv"));
  auto specs = configured_specs(ctx.config);
  QualityReport quality;
  IndicatorMatrix m = build_indicator_matrix(records, specs, &quality);
  write_indicator_matrix(ctx.out("indicators.csv"), m);

  json j;
  j["authorities"] = quality.authorities;
  j["single_contract_authorities"] = quality.single_contract_authorities;
  json per_flag = json::object();
  for (const auto& [flag, q] : quality.per_flag)
    per_flag[flag] = {{"negative_spans", q.negative_spans},
                      {"zero_denominators", q.zero_denominators},
                      {"inconsistent_counts", q.inconsistent_counts}};
  j["per_flag"] = per_flag;
  write_text(ctx.out("quality_report.json"), j.dump(2) + "\n");
}

void stage_discretize(StageContext ctx) {
  IndicatorMatrix m = read_indicator_matrix(ctx.in("indicators.csv"));
  std::vector<FlagSpec> specs;
  for (const auto& id : m.flags) specs.push_back(flag_spec(id));
  DiscretizeResult result = discretize_matrix(m, specs, ctx.config.categories);
  write_categorical_matrix(ctx.out("categories.csv"), result.matrix);

  json thresholds = json::array();
  for (const auto& t : result.thresholds) {
    json cuts = json::array();
    for (double c : t.cutpoints) cuts.push_back(c);
    thresholds.push_back({{"flag_id", t.flag_id},
                          {"polarity", t.polarity == FlagPolarity::two_sided ? "two_sided"
                                                                             : "positive"},
                          {"cutpoints", cuts}});
  }
  json j;
  j["categories"] = ctx.config.categories;
  j["thresholds"] = thresholds;
  write_text(ctx.out("thresholds.json"), j.dump(2) + "\n");
}

void write_correlation(StageContext& ctx, const CorrelationReport& rep, const std::string& name) {
  csv::Table matrix;
  matrix.header.push_back("red_flag");
  for (const auto& f : rep.flags) matrix.header.push_back(f);
  for (std::size_t a = 0; a < rep.flags.size(); ++a) {
    std::vector<std::string> row{rep.flags[a]};
    for (std::size_t b = 0; b < rep.flags.size(); ++b) row.push_back(fmt(rep.r[rep.idx(a, b)]));
    matrix.rows.push_back(std::move(row));
  }
  csv::write_file(ctx.out("correlation_" + name + ".csv"), matrix, ',');

  csv::Table pairs;
  pairs.header = {"flag_a", "flag_b", "r", "p", "significant"};
  for (std::size_t a = 0; a < rep.flags.size(); ++a)
    for (std::size_t b = a + 1; b < rep.flags.size(); ++b)
      pairs.rows.push_back({rep.flags[a], rep.flags[b], fmt(rep.r[rep.idx(a, b)]),
                            fmt(rep.p[rep.idx(a, b)]),
                            rep.tested[rep.idx(a, b)]
                                ? (rep.significant[rep.idx(a, b)] ? "true" : "false")
                                : ""});
  csv::write_file(ctx.out("correlation_" + name + "_pairs.csv"), pairs, ',');
}

void stage_screen(StageContext ctx) {
  IndicatorMatrix m = read_indicator_matrix(ctx.in("indicators.csv"));
  CorrelationReport pearson =
      correlation_matrix(m, CorrelationMethod::pearson_linear, ctx.config.alpha);
  CorrelationReport spearman =
      correlation_matrix(m, CorrelationMethod::spearman_rank, ctx.config.alpha);
  write_correlation(ctx, pearson, "pearson");
  write_correlation(ctx, spearman, "spearman");
}

FitConfig fit_config_for(const RunConfig& c, int dims) {
  FitConfig fc = c.fit;
  fc.categories = c.categories;
  fc.seed = splitmix64(c.seed + 1000 + static_cast<std::uint64_t>(dims));
  fc.rotation.seed = splitmix64(c.seed + 2000 + static_cast<std::uint64_t>(dims));
  return fc;
}

void stage_fit(StageContext ctx) {
  const RunConfig& c = ctx.config;
  CategoricalMatrix data = read_categorical_matrix(ctx.in("categories.csv"), c.categories);
  std::filesystem::create_directories(c.out_dir / "fits");

  auto fit_one = [&](int dims) {
    FitResult fr = fit(data, dims, fit_config_for(c, dims));
    std::string tag = "fits/fit_D" + std::to_string(dims);
    write_fit_result(c.out_dir / (tag + ".json"), fr, dims, data.flags);
    csv::write_file(c.out_dir / ("fits/loadings_D" + std::to_string(dims) + ".csv"),
                    rotated_loading_table(fr, std::nullopt), ',');
    csv::write_file(c.out_dir / ("fits/loadings_D" + std::to_string(dims) + "_display.csv"),
                    rotated_loading_table(fr, c.loading_cut), ',');
    csv::write_file(c.out_dir / ("fits/irt_D" + std::to_string(dims) + ".csv"), irt_table(fr),
                    ',');
  };

  std::vector<int> dims_list;
  for (int d = c.dims_min; d <= c.dims_max; ++d) dims_list.push_back(d);
  // independent jobs; artifact files are single-owner per D
  for (std::size_t i = 0; i < dims_list.size();) {
    std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(c.threads),
                                              dims_list.size() - i);
    std::vector<std::future<void>> jobs;
    for (std::size_t b = 0; b < batch; ++b)
      jobs.push_back(std::async(std::launch::async, fit_one, dims_list[i + b]));
    for (auto& job : jobs) job.get();
    i += batch;
  }
  for (int d : dims_list) {
    ctx.record.artifacts.push_back("fits/fit_D" + std::to_string(d) + ".json");
    ctx.record.artifacts.push_back("fits/loadings_D" + std::to_string(d) + ".csv");
    ctx.record.artifacts.push_back("fits/loadings_D" + std::to_string(d) + "_display.csv");
    ctx.record.artifacts.push_back("fits/irt_D" + std::to_string(d) + ".csv");
  }
}

void stage_select(StageContext ctx) {
  const RunConfig& c = ctx.config;
  std::vector<SelectionRow> bare;
  int n = 0;
  for (int d = c.dims_min; d <= c.dims_max; ++d) {
    std::vector<std::string> items;
    int dims = 0;
    FitResult fr =
        read_fit_result(ctx.in("fits/fit_D" + std::to_string(d) + ".json"), items, dims);
    SelectionRow row;
    row.dims = dims;
    row.loglik = fr.loglik;
    row.k = fr.free_parameters;
    bare.push_back(row);
    n = static_cast<int>(fr.rows_used);
  }
  auto rows = build_selection_rows(bare, n);
  SelectionReport report = select_dimension(rows, c.selection_threshold_pct, c.selection_indexes);

  csv::Table t;
  t.header = {"D", "loglik", "k", "aic", "sabic", "hqc", "bic", "lrt_chi2", "lrt_df", "lrt_p"};
  for (IndexKind k : report.indexes) t.header.push_back("improvement_pct_" + to_string(k));
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    std::vector<std::string> line = {std::to_string(row.dims),
                                     fmt(row.loglik),
                                     std::to_string(row.k),
                                     fmt(row.criteria.aic),
                                     fmt(row.criteria.sabic),
                                     fmt(row.criteria.hqc),
                                     fmt(row.criteria.bic),
                                     row.lrt_chi2 ? fmt(*row.lrt_chi2) : "",
                                     row.lrt_df ? std::to_string(*row.lrt_df) : "",
                                     row.lrt_p ? fmt(*row.lrt_p) : ""};
    for (std::size_t s = 0; s < report.indexes.size(); ++s)
      line.push_back(i == 0 ? "" : fmt(report.improvements[s][i - 1]));
    t.rows.push_back(std::move(line));
  }
  csv::write_file(ctx.out("selection.csv"), t, ',');

  json j;
  j["chosen_dims"] = report.chosen_dims;
  j["threshold_pct"] = report.threshold_pct;
  json idx = json::array();
  for (IndexKind k : report.indexes) idx.push_back(to_string(k));
  j["indexes"] = idx;
  j["rule"] = "smallest D whose later improvements all stay below threshold_pct; "
              "argmin of the first index when no plateau exists";
  j["n"] = n;
  json rows_json = json::array();
  for (const auto& row : report.rows) {
    json rj = {{"dims", row.dims}, {"loglik", row.loglik}, {"k", row.k},
               {"aic", row.criteria.aic}, {"sabic", row.criteria.sabic},
               {"hqc", row.criteria.hqc}, {"bic", row.criteria.bic}};
    if (row.lrt_chi2) rj["lrt_chi2"] = *row.lrt_chi2;
    if (row.lrt_df) rj["lrt_df"] = *row.lrt_df;
    if (row.lrt_p) rj["lrt_p"] = *row.lrt_p;
    rows_json.push_back(std::move(rj));
  }
  j["rows"] = rows_json;
  write_text(ctx.out("selection.json"), j.dump(2) + "\n");
}

void stage_report(StageContext ctx) {
  json selection = read_json(ctx.in("selection.json"));
  int chosen = selection["chosen_dims"].get<int>();
  std::vector<std::string> items;
  int dims = 0;
  FitResult fr =
      read_fit_result(ctx.in("fits/fit_D" + std::to_string(chosen) + ".json"), items, dims);
  csv::write_file(ctx.out("report_loadings.csv"),
                  rotated_loading_table(fr, ctx.config.loading_cut), ',');
  csv::write_file(ctx.out("report_loadings_full.csv"), rotated_loading_table(fr, std::nullopt),
                  ',');
  csv::write_file(ctx.out("report_irt.csv"), irt_table(fr), ',');

  json j;
  j["chosen_dims"] = chosen;
  j["loading_cut"] = ctx.config.loading_cut;
  json phi = json_matrix(fr.rotation.factor_correlations);
  j["factor_correlations"] = phi;
  write_text(ctx.out("report_summary.json"), j.dump(2) + "\n");
}

json config_echo(const RunConfig& c) {
  json tables = json::object();
  for (const auto& [name, path] : c.tables) tables[name] = path.string();
  json idx = json::array();
  for (IndexKind k : c.selection_indexes) idx.push_back(to_string(k));
  return {{"mapping", c.mapping_path.string()},
          {"tables", tables},
          {"reference_year", c.reference_year},
          {"flags", c.flag_ids},
          {"categories", c.categories},
          {"alpha", c.alpha},
          {"dims", {{"min", c.dims_min}, {"max", c.dims_max}}},
          {"fit",
           {{"gh_nodes_per_dim", c.fit.gh_nodes_per_dim},
            {"qmc_size", c.fit.qmc_size},
            {"max_tensor_dims", c.fit.max_tensor_dims},
            {"max_em_cycles", c.fit.max_em_cycles},
            {"loglik_rel_tol", c.fit.loglik_rel_tol},
            {"param_abs_tol", c.fit.param_abs_tol}}},
          {"selection", {{"threshold_pct", c.selection_threshold_pct}, {"indexes", idx}}},
          {"loading_cut", c.loading_cut},
          {"seed", c.seed},
          {"threads", c.threads},
          {"out_dir", c.out_dir.string()}};
}

void write_manifest(const RunConfig& c, const RunManifest& m) {
  json j;
  j["status"] = m.status;
  if (!m.failed_stage.empty()) {
    j["failed_stage"] = m.failed_stage;
    j["error"] = m.error;
  }
  j["library_version"] = library_version();
  j["schema_version"] = 1;
  j["seed"] = c.seed;
  j["config"] = config_echo(c);
  json inputs = json::object();
  inputs["mapping"] = {{"path", c.mapping_path.string()}, {"digest", file_digest(c.mapping_path)}};
  json tables = json::object();
  for (const auto& [name, path] : c.tables)
    tables[name] = {{"path", path.string()}, {"digest", file_digest(path)}};
  inputs["tables"] = tables;
  j["inputs"] = inputs;
  json stages = json::array();
  for (const auto& s : m.stages) {
    json artifacts = json::array();
    for (const auto& a : s.artifacts)
      artifacts.push_back({{"file", a}, {"digest", file_digest(c.out_dir / a)}});
    stages.push_back({{"name", s.name}, {"seconds", s.seconds}, {"artifacts", artifacts}});
  }
  j["stages"] = stages;
  write_text(c.out_dir / "manifest.json", j.dump(2) + "\n");
}

RunManifest run_stages(const RunConfig& config, const std::vector<std::string>& stages) {
  if (config.out_dir.empty()) throw std::invalid_argument("config: out_dir not set");
  std::filesystem::create_directories(config.out_dir);

  RunManifest manifest;
  manifest.status = "ok";
  for (const auto& name : stages) {
    StageRecord record;
    record.name = name;
    auto started = std::chrono::steady_clock::now();
    try {
      StageContext ctx{config, record};
      if (name == "ingest") stage_ingest(ctx);
      else if (name == "flags") stage_flags(ctx);
      else if (name == "discretize") stage_discretize(ctx);
      else if (name == "screen") stage_screen(ctx);
      else if (name == "fit") stage_fit(ctx);
      else if (name == "select") stage_select(ctx);
      else if (name == "report") stage_report(ctx);
      else throw std::invalid_argument("unknown stage: " + name);
    } catch (const std::exception& e) {
      record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                           .count();
      manifest.stages.push_back(record);
      manifest.status = "failed";
      manifest.failed_stage = name;
      manifest.error = e.what();
      write_manifest(config, manifest);
      throw PipelineError(name, e.what());
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.stages.push_back(record);
  }
  write_manifest(config, manifest);
  return manifest;
}

}  // namespace

RunManifest run_pipeline(const RunConfig& config) { return run_stages(config, pipeline_stages()); }

RunManifest run_stage(const RunConfig& config, const std::string& stage) {
  return run_stages(config, {stage});
}

}  // namespace procrisk
