#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dsq::cli {

/// One long-format cost/metric record.
struct CsvRow {
  std::string method;
  std::string precision_setup;
  std::string metric;
  std::string value;
};

inline constexpr const char* kCsvHeader = "method,precision_setup,metric,value";

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string format_number(double v);
/// Quotes a field when it holds a comma, quote, CR or LF (RFC 4180).
std::string csv_escape(std::string_view field);
/// Header plus rows, CRLF-free (LF line endings).
std::string write_csv(const std::vector<CsvRow>& rows);
/// RFC 4180 parser; throws ConfigError on malformed quoting.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace dsq::cli
