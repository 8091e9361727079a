#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "procrisk/csv.hpp"
#include "procrisk/date.hpp"

using namespace procrisk;

TEST_CASE("ISO date parsing") {
  auto d = parse_date("2017-03-01", "%Y-%m-%d");
  REQUIRE(d.has_value());
  CHECK(d->year == 2017);
  CHECK(d->month == 3);
  CHECK(d->day == 1);
  CHECK(format_iso(*d) == "2017-03-01");

  CHECK(!parse_date("2017-13-01", "%Y-%m-%d").has_value());
  CHECK(!parse_date("2017-02-30", "%Y-%m-%d").has_value());
  CHECK(!parse_date("2017-02-1", "%Y-%m-%d").has_value());
  CHECK(!parse_date("2017-02-01x", "%Y-%m-%d").has_value());
  CHECK(parse_date("29/02/2016", "%d/%m/%Y").has_value());
  CHECK(!parse_date("29/02/2017", "%d/%m/%Y").has_value());
}

TEST_CASE("day arithmetic") {
  Date a{2017, 1, 1}, b{2017, 12, 31};
  CHECK(days_between(a, b) == 364);
  CHECK(days_between(b, a) == -364);
  CHECK(days_between(Date{2016, 2, 28}, Date{2016, 3, 1}) == 2);  // leap year
  CHECK(days_between(Date{2017, 2, 28}, Date{2017, 3, 1}) == 1);
  // round trip through the epoch count
  for (long n : {-100000L, -1L, 0L, 1L, 17167L, 100000L})
    CHECK(Date::from_days(n).to_days() == n);
  CHECK(Date{1970, 1, 1}.to_days() == 0);
}

TEST_CASE("csv parse basics") {
  auto t = csv::parse("a,b,c\n1,2,3\n4,5,6\n", ',');
  REQUIRE(t.header.size() == 3);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][2] == "6");
  CHECK(t.column("b") == 1);
  CHECK(!t.has_column("z"));
}

TEST_CASE("csv quoting, embedded delimiters and newlines") {
  auto t = csv::parse("name;note\n\"x;y\";\"line1\nline2\"\nplain;\"he said \"\"hi\"\"\"\n", ';');
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "x;y");
  CHECK(t.rows[0][1] == "line1\nline2");
  CHECK(t.rows[1][1] == "he said \"hi\"");
}

TEST_CASE("csv ragged row rejected") {
  CHECK_THROWS_AS(csv::parse("a,b\n1\n", ','), csv::ParseError);
  CHECK_THROWS_AS(csv::parse("a,b\n\"unterminated,2\n", ','), csv::ParseError);
}

TEST_CASE("csv file round trip") {
  auto dir = std::filesystem::temp_directory_path() / "procrisk_csv_test";
  std::filesystem::create_directories(dir);
  csv::Table t;
  t.header = {"k", "v"};
  t.rows = {{"a", "1,5"}, {"b", "with \"quote\""}, {"c", ""}};
  auto path = dir / "t.csv";
  csv::write_file(path, t, ',');
  auto back = csv::read_file(path, ',');
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  std::filesystem::remove_all(dir);
}
