#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <unistd.h>

#include "procrisk/ingest.hpp"

using namespace procrisk;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("procrisk_ingest_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

ColumnMapping identity_mapping() {
  ColumnMapping m;
  m.delimiter = ',';
  m.stages["call"] = {{"cig", "cig"},
                      {"authority_id", "authority_id"},
                      {"publication_date", "publication_date"},
                      {"submission_deadline", "submission_deadline"},
                      {"procedure_type", "procedure_type"}};
  m.stages["award"] = {{"cig", "cig"},
                       {"award_id", "award_id"},
                       {"award_date", "award_date"},
                       {"award_criterion", "award_criterion"},
                       {"award_value", "award_value"},
                       {"bids_received", "bids_received"},
                       {"bids_eligible", "bids_eligible"},
                       {"bids_excluded", "bids_excluded"}};
  m.stages["variants"] = {{"award_id", "award_id"}};
  m.stages["end"] = {{"award_id", "award_id"},
                     {"expected_end_date", "expected_end_date"},
                     {"actual_end_date", "actual_end_date"}};
  m.stages["economic"] = {{"award_id", "award_id"}, {"paid_value", "paid_value"}};
  m.stages["winners"] = {{"award_id", "award_id"}, {"winner_id", "winner_id"}};
  return m;
}

// Rebuilds stage tables from assembled records (identity mapping), so a
// second assembly can be compared against the first.
struct Rebuilt {
  RawTable call, award;
  std::vector<RawTable> stages;
};

Rebuilt tables_from_records(const std::vector<ContractRecord>& records) {
  Rebuilt out;
  out.call.name = "call";
  out.award.name = "award";
  RawTable variants{"variants", {}, {}}, end{"end", {}, {}}, economic{"economic", {}, {}},
      winners{"winners", {}, {}};
  for (const auto& r : records) {
    std::map<std::string, std::string> call{{"cig", r.cig}, {"authority_id", r.authority_id}};
    if (r.publication_date) call["publication_date"] = format_iso(*r.publication_date);
    if (r.submission_deadline) call["submission_deadline"] = format_iso(*r.submission_deadline);
    if (r.procedure_type) call["procedure_type"] = to_string(*r.procedure_type);
    out.call.rows.push_back(std::move(call));
    if (!r.award_id) continue;
    std::map<std::string, std::string> award{{"cig", r.cig}, {"award_id", *r.award_id}};
    if (r.award_date) award["award_date"] = format_iso(*r.award_date);
    if (r.award_criterion) award["award_criterion"] = to_string(*r.award_criterion);
    if (r.award_value) award["award_value"] = std::to_string(*r.award_value);
    if (r.bids_received) award["bids_received"] = std::to_string(*r.bids_received);
    if (r.bids_eligible) award["bids_eligible"] = std::to_string(*r.bids_eligible);
    if (r.bids_excluded) award["bids_excluded"] = std::to_string(*r.bids_excluded);
    out.award.rows.push_back(std::move(award));
    if (r.has_variant && *r.has_variant) variants.rows.push_back({{"award_id", *r.award_id}});
    if (r.expected_end_date || r.actual_end_date) {
      std::map<std::string, std::string> row{{"award_id", *r.award_id}};
      if (r.expected_end_date) row["expected_end_date"] = format_iso(*r.expected_end_date);
      if (r.actual_end_date) row["actual_end_date"] = format_iso(*r.actual_end_date);
      end.rows.push_back(std::move(row));
    }
    if (r.paid_value)
      economic.rows.push_back(
          {{"award_id", *r.award_id}, {"paid_value", std::to_string(*r.paid_value)}});
    for (const auto& w : r.winner_ids)
      winners.rows.push_back({{"award_id", *r.award_id}, {"winner_id", w}});
  }
  out.stages = {variants, end, economic, winners};
  return out;
}

}  // namespace

TEST_CASE("load_table keeps the row count and substitutes semantic names") {
  TempDir tmp;
  write(tmp.path / "call.csv",
        "cig,authority_id,publication_date,submission_deadline,procedure_type\n"
        "C1,A1,2017-03-01,2017-03-20,open\n"
        "C2,A1,2017-05-10,,non_open\n"
        "C3,A2,2017-06-01,2017-06-15,open\n");
  auto t = load_table(tmp.path / "call.csv", identity_mapping(), "call");
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[0].at("publication_date") == "2017-03-01");
  CHECK(t.rows[1].count("submission_deadline") == 0);  // blank stays absent
  CHECK(t.rows[1].at("procedure_type") == "non_open");
}

TEST_CASE("load_table errors name the offending column or row") {
  TempDir tmp;
  write(tmp.path / "bad.csv", "authority_id\nA1\n");
  CHECK_THROWS_WITH_AS(load_table(tmp.path / "bad.csv", identity_mapping(), "call"),
                       doctest::Contains("missing mapped column 'cig'"), IngestError);

  write(tmp.path / "bad_date.csv",
        "cig,authority_id,publication_date,submission_deadline,procedure_type\n"
        "C1,A1,2017-03-01,2017-03-20,open\n"
        "C2,A1,01-2017-05,,open\n");
  CHECK_THROWS_WITH_AS(load_table(tmp.path / "bad_date.csv", identity_mapping(), "call"),
                       doctest::Contains("row 2"), IngestError);

  CHECK_THROWS_AS(load_table(tmp.path / "absent.csv", identity_mapping(), "call"), IngestError);
}

TEST_CASE("numeric fields with empty strings parse as absent, not zero") {
  TempDir tmp;
  write(tmp.path / "award.csv",
        "cig,award_id,award_date,award_criterion,award_value,bids_received,bids_eligible,"
        "bids_excluded\n"
        "C1,AW1,2017-04-01,meat,,3,2,1\n");
  auto t = load_table(tmp.path / "award.csv", identity_mapping(), "award");
  CHECK(t.rows[0].count("award_value") == 0);
  CHECK(t.rows[0].at("bids_received") == "3");
}

TEST_CASE("decimal separator and date format conventions") {
  TempDir tmp;
  auto m = identity_mapping();
  m.decimal_separator = ',';
  m.delimiter = ';';
  m.date_format = "%d/%m/%Y";
  write(tmp.path / "award.csv",
        "cig;award_id;award_date;award_criterion;award_value;bids_received;bids_eligible;"
        "bids_excluded\n"
        "C1;AW1;01/04/2017;other;1234,56;2;;0\n");
  auto t = load_table(tmp.path / "award.csv", m, "award");
  CHECK(t.rows[0].at("award_value") == "1234.56");
  CHECK(t.rows[0].at("award_date") == "2017-04-01");
  CHECK(t.rows[0].at("award_criterion") == "other");
}

TEST_CASE("assemble: left-join semantics and flag propagation") {
  RawTable call{"call", {}, {{{"cig", "C1"}, {"authority_id", "A1"}},
                             {{"cig", "C2"}, {"authority_id", "A1"}}}};
  RawTable award{"award",
                 {},
                 {{{"cig", "C1"}, {"award_id", "AW1"}, {"award_date", "2017-04-01"}},
                  {{"cig", "CX"}, {"award_id", "AW9"}}}};  // cig absent from call
  RawTable variants{"variants", {}, {{{"award_id", "AW1"}}}};

  IngestReport rep;
  std::vector<RawTable> stages{variants};
  auto records = assemble_contracts(call, award, stages, &rep);
  REQUIRE(records.size() == 2);
  CHECK(records[0].cig == "C1");
  CHECK(records[0].award_id == "AW1");
  CHECK(records[0].has_variant == true);
  CHECK(!records[1].award_id.has_value());
  CHECK(!records[1].has_variant.has_value());  // never awarded: unknowable
  CHECK(rep.award_rows_unmatched == 1);
  CHECK(rep.distinct_cigs == 2);
}

TEST_CASE("assemble: duplicate call cigs and multiple awards resolve deterministically") {
  RawTable call{"call",
                {},
                {{{"cig", "C1"}, {"authority_id", "A1"}, {"procedure_type", "open"}},
                 {{"cig", "C1"}, {"authority_id", "A2"}, {"procedure_type", "non_open"}}}};
  RawTable award{"award",
                 {},
                 {{{"cig", "C1"}, {"award_id", "AW2"}, {"award_date", "2017-05-01"}},
                  {{"cig", "C1"}, {"award_id", "AW1"}, {"award_date", "2017-04-01"}},
                  {{"cig", "C1"}, {"award_id", "AW0"}, {"award_date", "2017-04-01"}}}};
  IngestReport rep;
  auto records = assemble_contracts(call, award, {}, &rep);
  REQUIRE(records.size() == 1);
  CHECK(records[0].authority_id == "A1");  // first occurrence wins
  CHECK(records[0].award_id == "AW0");     // earliest date, then lexicographic id
  CHECK(rep.duplicate_call_cigs == 1);
  CHECK(rep.cigs_with_multiple_awards == 1);
}

TEST_CASE("assemble cardinality equals distinct cigs; winners dedupe") {
  RawTable call{"call", {}, {}};
  for (int i = 0; i < 5; ++i)
    call.rows.push_back({{"cig", "C" + std::to_string(i % 3)}, {"authority_id", "A"}});
  RawTable award{"award", {}, {{{"cig", "C0"}, {"award_id", "AW0"}}}};
  RawTable winners{"winners",
                   {},
                   {{{"award_id", "AW0"}, {"winner_id", "F1"}},
                    {{"award_id", "AW0"}, {"winner_id", "F2"}},
                    {{"award_id", "AW0"}, {"winner_id", "F1"}}}};
  std::vector<RawTable> stages{winners};
  auto records = assemble_contracts(call, award, stages, nullptr);
  CHECK(records.size() == 3);
  CHECK(records[0].winner_ids == std::vector<std::string>{"F1", "F2"});
}

TEST_CASE("assemble is idempotent over its own output") {
  RawTable call{"call",
                {},
                {{{"cig", "C1"}, {"authority_id", "A1"}, {"publication_date", "2017-01-05"},
                  {"procedure_type", "open"}},
                 {{"cig", "C2"}, {"authority_id", "A2"}, {"publication_date", "2017-02-05"}}}};
  RawTable award{"award",
                 {},
                 {{{"cig", "C1"}, {"award_id", "AW1"}, {"award_value", "1000"},
                   {"bids_received", "3"}, {"bids_excluded", "1"}}}};
  RawTable economic{"economic", {}, {{{"award_id", "AW1"}, {"paid_value", "1100"}}}};
  RawTable winners{"winners", {}, {{{"award_id", "AW1"}, {"winner_id", "F1"}}}};

  std::vector<RawTable> stages{economic, winners};
  auto first = assemble_contracts(call, award, stages, nullptr);
  auto rebuilt = tables_from_records(first);
  auto second = assemble_contracts(rebuilt.call, rebuilt.award, rebuilt.stages, nullptr);
  CHECK(first == second);
}

TEST_CASE("filter_year") {
  std::vector<ContractRecord> records(4);
  records[0].cig = "A";
  records[0].publication_date = Date{2016, 12, 31};
  records[1].cig = "B";
  records[1].publication_date = Date{2017, 1, 1};
  records[2].cig = "C";
  records[2].publication_date = Date{2018, 1, 1};
  records[3].cig = "D";  // no publication date

  IngestReport rep;
  auto kept = filter_year(records, 2017, &rep);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].cig == "B");
  CHECK(rep.dropped_missing_publication_date == 1);
  CHECK(rep.dropped_other_year == 2);

  CHECK(filter_year(std::vector<ContractRecord>{}, 2017).empty());
}

TEST_CASE("column mapping file round trip") {
  TempDir tmp;
  write(tmp.path / "mapping.json", R"({
    "delimiter": ";",
    "date_format": "%d/%m/%Y",
    "decimal_separator": ",",
    "stages": {
      "call": {"cig": "CIG", "authority_id": "CF_AMM"},
      "award": {"cig": "CIG", "award_id": "ID_AGG"}
    },
    "value_classes": {
      "procedure_type": {"PROCEDURA APERTA": "open", "AFFIDAMENTO DIRETTO": "non_open"}
    }
  })");
  auto m = load_column_mapping(tmp.path / "mapping.json");
  CHECK(m.delimiter == ';');
  CHECK(m.decimal_separator == ',');
  CHECK(m.stages.at("call").at("authority_id") == "CF_AMM");
  CHECK(m.value_classes.at("procedure_type").at("procedura aperta") == "open");

  write(tmp.path / "bad.json",
        R"({"stages": {}, "value_classes": {"procedure_type": {"x": "nope"}}})");
  CHECK_THROWS_AS(load_column_mapping(tmp.path / "bad.json"), IngestError);
}
