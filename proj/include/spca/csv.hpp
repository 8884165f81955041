#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spca/error.hpp"
#include "spca/types.hpp"

namespace spca {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

/// Empty, NaN and NA (any case) mark a missing cell.
inline bool is_missing_token(std::string_view token) {
  return token.empty() || iequals(token, "nan") || iequals(token, "na");
}

inline std::optional<double> parse_double(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Shortest decimal representation that round-trips.
inline std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace detail

/**
 * Reads observations (rows) by variables (columns) into a MaskedSample.
 *
 * A first line containing any field that is neither numeric nor a missing token is
 * treated as a header and skipped. Blank lines are ignored.
 */
inline MaskedSample read_masked_csv(std::istream& in) {
  std::vector<std::vector<std::optional<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    std::vector<std::optional<double>> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (auto f : fields) {
      if (detail::is_missing_token(f)) {
        row.emplace_back(std::nullopt);
      } else if (auto v = detail::parse_double(f)) {
        row.emplace_back(*v);
      } else {
        numeric = false;
        if (!first)
          throw Error(ErrorCode::parse_error,
                      "line " + std::to_string(line_no) + ": unparseable field '" + std::string(f) + "'");
        break;
      }
    }
    const bool header = first && !numeric;
    first = false;
    if (header) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(rows.front().size()) + " fields, got " +
                                              std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  detail::require(!rows.empty(), ErrorCode::parse_error, "no data rows");

  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(rows.front().size());
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(n, p);
  BoolMatrix mask = BoolMatrix::Constant(n, p, false);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j)
      if (const auto& cell = rows[i][j]) {
        data(i, j) = *cell;
        mask(i, j) = true;
      }
  return MaskedSample(std::move(data), std::move(mask));
}

inline MaskedSample read_masked_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::parse_error, "cannot open '" + path + "'");
  return read_masked_csv(in);
}

/// Canonical writer: no header, missing cells as empty fields (NaN for single-column
/// data, where an empty field would read back as a blank line).
inline void write_masked_csv(std::ostream& out, const MaskedSample& sample) {
  for (Index i = 0; i < sample.n(); ++i) {
    for (Index j = 0; j < sample.p(); ++j) {
      if (j > 0) out << ',';
      if (sample.mask()(i, j))
        out << detail::format_double(sample.data()(i, j));
      else if (sample.p() == 1)
        out << "NaN";
    }
    out << '\n';
  }
}

}  // namespace spca
