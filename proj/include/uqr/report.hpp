#pragma once

#include <json.hpp>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace uqr {

/// Pass/fail record for one audited inequality or identity.
/// For inequality audits pass <=> lhs <= rhs + tolerance.
struct AuditReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string config_digest;
  std::vector<std::string> artifacts;
  std::vector<std::string> notes;
  nlohmann::json details = nlohmann::json::object();

  /// Sets pass from the inequality convention.
  void decide_inequality() { pass = lhs <= rhs + tolerance; }
};

nlohmann::json to_json(const AuditReport& r);

/// Stable 64-bit FNV-1a digest (hex) of the canonical JSON dump.
std::string config_digest(const nlohmann::json& config);

/// Formats a double with 17 significant digits ('.' decimal, locale-free).
std::string format_double(double v);

/// RFC-4180 CSV table; numbers are written with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  using Cell = std::variant<double, long long, std::string>;
  void add_row(std::vector<Cell> row);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  void write(std::ostream& os) const;
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace uqr
