/*
* Copyright 2026 The DSM Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/
// Delimited-text IO: a strict comma-separated reader and writer, exact
// shortest round-trip number formatting, and sample ingestion by column role.

#ifndef DSM_IO_HPP_
#define DSM_IO_HPP_

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "dsm/types.hpp"

namespace dsm {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Position of `name` in the header, or -1.
  Index column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<Index>(j);
    }
    return -1;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": unterminated quoted field");
  }
  fields.push_back(std::move(field));
  return fields;
}

inline bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

inline std::string quote(std::string_view s) {
  if (!needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::kParseError, path.string() + " line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(table.header.size()) + " fields, found " +
                                              std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw Error(ErrorCode::kParseError, path.string() + ": missing header row");
  return table;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kParseError, "cannot write " + path.string());
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j) out << ',';
      out << detail::quote(fields[j]);
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  if (!out) throw Error(ErrorCode::kParseError, "write failed for " + path.string());
}

// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Strict decimal parse; `where` prefixes error messages with the location.
inline double parse_double(std::string_view text, const std::string& where) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
  text = text.substr(b, e - b);
  if (text.empty()) throw Error(ErrorCode::kParseError, where + ": missing value");
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParseError, where + ": not a finite number '" + std::string(text) + "'");
  }
  return v;
}

struct ColumnRoles {
  std::string outcome = "y";
  std::string weight = "d";
  std::vector<std::string> covariates;  // empty: every non-role column, in file order
};

struct LoadedSamples {
  SampleA a;
  SampleB b;
  std::vector<std::string> covariates;
  CsvTable table_b;  // sample B as read, for pass-through output
};

namespace detail {

inline std::vector<std::string> implied_covariates(const CsvTable& t, std::string_view role) {
  std::vector<std::string> out;
  for (const auto& h : t.header) {
    if (h != role) out.push_back(h);
  }
  return out;
}

inline Matrix numeric_columns(const CsvTable& t, const std::vector<Index>& cols, const std::string& file) {
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto c = static_cast<std::size_t>(cols[j]);
      m(static_cast<Index>(r), static_cast<Index>(j)) =
          parse_double(t.rows[r][c], file + " row " + std::to_string(r + 1) + " column '" + t.header[c] + "'");
    }
  }
  return m;
}

inline Index require_column(const CsvTable& t, const std::string& name, const std::string& file) {
  const Index c = t.column(name);
  if (c < 0) throw Error(ErrorCode::kSchemaMismatch, file + ": missing column '" + name + "'");
  return c;
}

}  // namespace detail

inline LoadedSamples load_samples(const std::filesystem::path& path_a, const std::filesystem::path& path_b,
                                  const ColumnRoles& roles) {
  LoadedSamples out;
  const CsvTable ta = read_csv(path_a);
  out.table_b = read_csv(path_b);
  const CsvTable& tb = out.table_b;
  const std::string fa = path_a.filename().string();
  const std::string fb = path_b.filename().string();

  if (roles.covariates.empty()) {
    auto cov_a = detail::implied_covariates(ta, roles.outcome);
    auto cov_b = detail::implied_covariates(tb, roles.weight);
    if (cov_a != cov_b) {
      throw Error(ErrorCode::kSchemaMismatch, "covariate columns differ between samples (by name or order)");
    }
    out.covariates = std::move(cov_a);
  } else {
    out.covariates = roles.covariates;
  }
  if (out.covariates.empty()) throw Error(ErrorCode::kSchemaMismatch, "no covariate columns");

  std::vector<Index> ca, cb;
  for (const auto& name : out.covariates) {
    if (name == roles.outcome || name == roles.weight) {
      throw Error(ErrorCode::kSchemaMismatch, "column '" + name + "' cannot be both a role and a covariate");
    }
    ca.push_back(detail::require_column(ta, name, fa));
    cb.push_back(detail::require_column(tb, name, fb));
  }
  const Index cy = detail::require_column(ta, roles.outcome, fa);
  const Index cd = detail::require_column(tb, roles.weight, fb);

  out.a.x = detail::numeric_columns(ta, ca, fa);
  out.a.y = detail::numeric_columns(ta, {cy}, fa).col(0);
  out.b.x = detail::numeric_columns(tb, cb, fb);
  out.b.d = detail::numeric_columns(tb, {cd}, fb).col(0);
  if (out.a.size() == 0 || out.b.size() == 0) throw Error(ErrorCode::kSchemaMismatch, "a sample has no rows");
  for (Index i = 0; i < out.b.d.size(); ++i) {
    if (!(out.b.d(i) > 0.0)) {
      throw Error(ErrorCode::kNonpositiveWeight,
                  fb + " row " + std::to_string(i + 1) + ": weight " + format_double(out.b.d(i)) + " is not positive");
    }
  }
  return out;
}

// Flat key=value sidecar, one pair per line, in insertion order.
inline void write_metadata(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kParseError, "cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

inline std::vector<std::pair<std::string, std::string>> read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

}  // namespace dsm

#endif  // DSM_IO_HPP_
