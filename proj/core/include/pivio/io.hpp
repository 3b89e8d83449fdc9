#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pivio {

// One parsed CSV data row: original line number plus the split cells.
// '#' comment lines, blank lines and an optional non-numeric header row are
// up to the schema-specific parsers to handle; this layer only splits.
struct CsvRow {
  int line = 0;
  std::vector<std::string> cells;
};

std::vector<CsvRow> read_csv_rows(const std::filesystem::path& path);

// Double -> shortest text that parses back bit-exactly; stable across runs.
std::string format_double(double v);

// Throws ParseError naming file, line and column on non-numeric cells.
double parse_double_cell(const std::string& cell, const std::filesystem::path& path,
                         int line, const std::string& column);

// Plain key=value manifest, '#' comments allowed, keys kept sorted on write.
using Manifest = std::map<std::string, std::string>;

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

const std::string& manifest_get(const Manifest& m, const std::string& key);
double manifest_get_double(const Manifest& m, const std::string& key);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pivio
