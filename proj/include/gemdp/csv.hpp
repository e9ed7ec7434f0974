#pragma once

#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace gemdp {

/// "%.9g"; NaN and infinities spelled "nan", "inf", "-inf".
std::string format_real(double v);

/// Header-first CSV writer with a fixed column count. Fields are never quoted,
/// so callers must not pass text containing commas or newlines.
class CsvWriter {
public:
  CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header);
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> cells;
    cells.reserve(sizeof...(Fields));
    (cells.push_back(cell(fields)), ...);
    write(cells);
  }

  void write(const std::vector<std::string>& cells);

  /// Empty cell, used for undefined values.
  static std::string blank() { return {}; }

private:
  template <typename T>
  static std::string cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "1" : "0";
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_real(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      return v ? format_real(*v) : std::string{};
    } else {
      return std::string(std::string_view(v));
    }
  }

  std::ostream& os_;
  std::size_t columns_;
};

/// Parsed CSV body with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name; throws std::invalid_argument when missing.
  std::size_t column(std::string_view name) const;
};

/// Reads a header plus rows; throws std::runtime_error on ragged rows.
CsvTable read_csv(std::istream& is);

double parse_real(const std::string& text);
long long parse_int(const std::string& text);

}  // namespace gemdp
