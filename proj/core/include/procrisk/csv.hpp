#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace procrisk::csv {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parsed delimited file: header row plus data rows. Every data row is
/// padded/checked to the header width by the parser.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ParseError if absent
  bool has_column(std::string_view name) const;
};

/// RFC-4180-style parsing: quoted fields, doubled-quote escapes, delimiters
/// and newlines inside quotes. First record is the header.
Table parse(std::string_view text, char delimiter);
Table read_file(const std::filesystem::path& path, char delimiter);

std::string escape_field(std::string_view field, char delimiter);
void write_file(const std::filesystem::path& path, const Table& table, char delimiter);

}  // namespace procrisk::csv
