#include "procrisk/csv.hpp"

#include <fstream>
#include <sstream>

namespace procrisk::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("column not found: " + std::string(name));
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

Table parse(std::string_view text, char delimiter) {
  Table out;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any_field = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    any_field = true;
  };
  auto end_record = [&] {
    end_field();
    if (out.header.empty()) {
      out.header = std::move(record);
    } else {
      if (record.size() != out.header.size())
        throw ParseError("row " + std::to_string(out.rows.size() + 1) + " has " +
                         std::to_string(record.size()) + " fields, header has " +
                         std::to_string(out.header.size()));
      out.rows.push_back(std::move(record));
    }
    record.clear();
    any_field = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any_field || !field.empty()) end_record();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (any_field || !field.empty()) end_record();
  return out;
}

Table read_file(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str(), delimiter);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string escape_field(std::string_view field, char delimiter) {
  bool needs_quotes = false;
  for (char c : field)
    if (c == delimiter || c == '"' || c == '\n' || c == '\r') needs_quotes = true;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

void write_file(const std::filesystem::path& path, const Table& table, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << delimiter;
      out << escape_field(row[i], delimiter);
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

}  // namespace procrisk::csv
