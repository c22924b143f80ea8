#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evbs/error.hpp"
#include "evbs/regression.hpp"

namespace evbs {

struct IngestOptions {
  std::string date_column = "date";  // empty: no date column, no month check
  std::string response_column = "gust_ms";
  std::vector<std::string> covariate_columns{"pressure_mb"};
  bool log_response = false;  // model log(response)
  bool positive_response = true;
  // Open intervals a column's values must fall in.
  std::map<std::string, std::pair<double, double>> bounds{{"pressure_mb", {800.0, 1100.0}}};
};

struct Record {
  int line = 0;      // 1-based line in the source file
  std::string date;  // as written
  double response = 0.0;
  std::vector<double> covariates;
};

struct Dataset {
  IngestOptions options;
  std::vector<Record> records;
  RegressionData data;
};

// Carries every rejected row, one message per item.
class LoadError : public Error {
 public:
  explicit LoadError(std::vector<std::string> items);
  const std::vector<std::string>& items() const noexcept { return items_; }

 private:
  std::vector<std::string> items_;
};

// Year and month from YYYY-MM[-DD], YYYY/MM[/DD], MM/YYYY or DD/MM/YYYY.
std::optional<std::pair<int, int>> parse_month(std::string_view s);

Dataset ingest_csv_text(std::string_view text, const IngestOptions& options = {});
Dataset ingest_csv(const std::string& path, const IngestOptions& options = {});

// Writes the records back with the configured column names; numbers in
// shortest round-trip form, so ingest -> format -> ingest is lossless.
std::string format_records_csv(const Dataset& dataset);

struct Descriptive {
  std::size_t n = 0;
  double min = 0.0, median = 0.0, mean = 0.0, max = 0.0;
  double sd = 0.0;  // n - 1 denominator
  // Moment ratios m3 / m2^1.5 and m4 / m2^2; empty for constant input.
  std::optional<double> skewness, kurtosis;
  // Bias-adjusted versions: G1 and G2 + 3.
  std::optional<double> skewness_adjusted, kurtosis_adjusted;
};

Descriptive descriptive_stats(std::span<const double> v);

struct Acf {
  std::vector<double> r;  // r[0] = 1
  double band = 0.0;      // 1.96 / sqrt(n)
};

// Biased-denominator sample autocorrelation, lags 0..max_lag, max_lag < n / 2.
Acf acf(std::span<const double> series, std::size_t max_lag);

}  // namespace evbs
