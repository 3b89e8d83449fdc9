#include "pivio/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "pivio/errors.hpp"

namespace pivio {

std::vector<CsvRow> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CsvRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    if (sv.empty() || sv.front() == '#') continue;
    CsvRow row;
    row.line = lineno;
    size_t start = 0;
    const std::string s(sv);
    while (true) {
      const size_t comma = s.find(',', start);
      std::string cell = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start);
      // trim surrounding spaces
      const size_t b = cell.find_first_not_of(" \t");
      const size_t e = cell.find_last_not_of(" \t");
      row.cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double_cell(const std::string& cell, const std::filesystem::path& path,
                         int line, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    std::ostringstream os;
    os << path.string() << ":" << line << ": column \"" << column
       << "\": expected a number, got \"" << cell << "\"";
    throw ParseError(os.str());
  }
  return value;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << path.string() << ":" << lineno << ": expected key=value, got \"" << line << "\"";
      throw ParseError(os.str());
    }
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ostringstream os;
  for (const auto& [k, v] : m) os << k << "=" << v << "\n";
  write_text_file(path, os.str());
}

const std::string& manifest_get(const Manifest& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw ParseError("manifest: missing key \"" + key + "\"");
  return it->second;
}

double manifest_get_double(const Manifest& m, const std::string& key) {
  return parse_double_cell(manifest_get(m, key), "manifest", 0, key);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace pivio
