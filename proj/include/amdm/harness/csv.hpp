#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace amdm::harness {

using Cell = std::variant<std::string, double, long long, bool>;

/// Formats a double with 9 significant digits and '.' as decimal separator.
std::string format_double(double x);
std::string format_cell(const Cell& cell);

/// In-memory table written in one go, so a failed run never leaves a
/// half-written file behind.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  /// Throws std::invalid_argument when the row width differs from the header.
  void add_row(std::vector<Cell> row);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const;
  /// Throws std::runtime_error on I/O failure.
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace amdm::harness
