#include "evbs/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "evbs/stats.hpp"
#include "evbs/text.hpp"

namespace evbs {

namespace {

std::string join_items(const std::vector<std::string>& items) {
  std::string s = items.size() == 1 ? "" : std::to_string(items.size()) + " load errors:";
  for (const auto& i : items) s += (s.empty() ? "" : "\n  ") + i;
  return s;
}

// Comma separated, optional double quotes around a field ("" inside quotes is a quote).
std::vector<std::string> csv_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

bool to_int(std::string_view s, int& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

LoadError::LoadError(std::vector<std::string> items) : Error(Errc::parse, join_items(items)), items_(std::move(items)) {}

std::optional<std::pair<int, int>> parse_month(std::string_view s) {
  s = trim(s);
  const char sep = s.find('-') != std::string_view::npos ? '-' : '/';
  auto parts = split(s, sep);
  if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
  int a = 0, b = 0, c = 0;
  if (!to_int(parts[0], a) || !to_int(parts[1], b)) return std::nullopt;
  if (parts.size() == 3 && !to_int(parts[2], c)) return std::nullopt;
  int year = 0, month = 0;
  if (parts[0].size() == 4) {
    year = a;
    month = b;
  } else if (parts.size() == 2 && parts[1].size() == 4) {
    year = b;
    month = a;
  } else if (parts.size() == 3 && parts[2].size() == 4) {
    year = c;
    month = b;
  } else {
    return std::nullopt;
  }
  if (month < 1 || month > 12) return std::nullopt;
  return std::pair{year, month};
}

Dataset ingest_csv_text(std::string_view text, const IngestOptions& options) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto lines = split(text, '\n');

  std::size_t header_at = 0;
  auto clean = [](std::string_view l) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return trim(l);
  };
  while (header_at < lines.size() && clean(lines[header_at]).empty()) ++header_at;
  if (header_at == lines.size()) throw LoadError({"no data rows"});

  const auto header = csv_fields(clean(lines[header_at]));
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> missing;
  auto need = [&](const std::string& name) {
    const auto c = column(name);
    if (!c) missing.push_back("missing column '" + name + "'");
    return c.value_or(0);
  };
  const std::size_t date_col = options.date_column.empty() ? 0 : need(options.date_column);
  const std::size_t resp_col = need(options.response_column);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : options.covariate_columns) cov_cols.push_back(need(c));
  if (!missing.empty()) throw LoadError(missing);

  std::vector<std::string> issues;
  std::vector<Record> records;
  std::map<std::pair<int, int>, int> months;
  for (std::size_t li = header_at + 1; li < lines.size(); ++li) {
    const auto line = clean(lines[li]);
    if (line.empty()) continue;
    const int line_no = static_cast<int>(li) + 1;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto f = csv_fields(line);
    if (f.size() != header.size()) {
      issues.push_back(where + "expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(f.size()));
      continue;
    }
    Record rec;
    rec.line = line_no;
    bool ok = true;
    auto number = [&](std::size_t col, const std::string& name) {
      if (f[col].empty()) {
        issues.push_back(where + "missing value for '" + name + "'");
        ok = false;
        return 0.0;
      }
      try {
        return parse_double(f[col], line_no);
      } catch (const Error&) {
        issues.push_back(where + "'" + name + "' is not a number: '" + f[col] + "'");
        ok = false;
        return 0.0;
      }
    };
    auto in_bounds = [&](const std::string& name, double v) {
      const auto b = options.bounds.find(name);
      if (ok && b != options.bounds.end() && !(v > b->second.first && v < b->second.second)) {
        issues.push_back(where + "'" + name + "' = " + f[*column(name)] + " outside (" +
                         format_double(b->second.first) + ", " + format_double(b->second.second) + ")");
        ok = false;
      }
    };

    if (!options.date_column.empty()) {
      rec.date = f[date_col];
      const auto m = parse_month(rec.date);
      if (!m) {
        issues.push_back(where + "unrecognised date '" + rec.date + "'");
        ok = false;
      } else if (const auto [it, inserted] = months.emplace(*m, line_no); !inserted) {
        issues.push_back(where + "duplicate month " + rec.date + " (first seen on line " +
                         std::to_string(it->second) + ")");
        ok = false;
      }
    }
    rec.response = number(resp_col, options.response_column);
    if (ok && (options.positive_response || options.log_response) && !(rec.response > 0.0)) {
      issues.push_back(where + "'" + options.response_column + "' must be positive, got " + f[resp_col]);
      ok = false;
    }
    in_bounds(options.response_column, rec.response);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      rec.covariates.push_back(number(cov_cols[k], options.covariate_columns[k]));
      in_bounds(options.covariate_columns[k], rec.covariates.back());
    }
    if (ok) records.push_back(std::move(rec));
  }
  if (!issues.empty()) throw LoadError(issues);
  if (records.empty()) throw LoadError({"no data rows"});

  const std::size_t n = records.size();
  std::vector<double> y(n);
  std::vector<std::vector<double>> cols(options.covariate_columns.size(), std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = options.log_response ? std::log(records[i].response) : records[i].response;
    for (std::size_t k = 0; k < cols.size(); ++k) cols[k][i] = records[i].covariates[k];
  }
  std::vector<std::string> labels{"(intercept)"};
  labels.insert(labels.end(), options.covariate_columns.begin(), options.covariate_columns.end());

  Dataset d;
  d.options = options;
  d.records = std::move(records);
  d.data = RegressionData(std::move(y), design_with_intercept(cols, n), std::move(labels));
  return d;
}

Dataset ingest_csv(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ingest_csv_text(ss.str(), options);
}

std::string format_records_csv(const Dataset& dataset) {
  const auto& o = dataset.options;
  std::ostringstream os;
  std::vector<std::string> head;
  if (!o.date_column.empty()) head.push_back(o.date_column);
  head.push_back(o.response_column);
  head.insert(head.end(), o.covariate_columns.begin(), o.covariate_columns.end());
  for (std::size_t i = 0; i < head.size(); ++i) os << (i ? "," : "") << quote_if_needed(head[i]);
  os << '\n';
  for (const auto& r : dataset.records) {
    if (!o.date_column.empty()) os << quote_if_needed(r.date) << ',';
    os << format_double(r.response);
    for (double c : r.covariates) os << ',' << format_double(c);
    os << '\n';
  }
  return os.str();
}

Descriptive descriptive_stats(std::span<const double> v) {
  if (v.size() < 2) throw Error(Errc::invalid_argument, "descriptive statistics need at least 2 values");
  Descriptive d;
  d.n = v.size();
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  d.min = s.front();
  d.max = s.back();
  d.median = median(s);
  d.mean = mean(s);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : s) {
    const double e = x - d.mean;
    m2 += e * e;
    m3 += e * e * e;
    m4 += e * e * e * e;
  }
  const double n = static_cast<double>(d.n);
  d.sd = std::sqrt(m2 / (n - 1));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    const double g1 = m3 / std::pow(m2, 1.5);
    const double g2 = m4 / (m2 * m2);
    d.skewness = g1;
    d.kurtosis = g2;
    if (d.n > 2) d.skewness_adjusted = g1 * std::sqrt(n * (n - 1)) / (n - 2);
    if (d.n > 3) d.kurtosis_adjusted = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * (g2 - 3) + 6) + 3;
  }
  return d;
}

Acf acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < 2 || 2 * max_lag >= n) throw Error(Errc::invalid_argument, "acf: max_lag must be below n / 2");
  const double m = mean(series);
  double c0 = 0.0;
  for (double x : series) c0 += (x - m) * (x - m);
  if (!(c0 > 0.0)) throw Error(Errc::numeric, "acf: constant series");
  Acf out;
  out.r.assign(max_lag + 1, 0.0);
  out.r[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double c = 0.0;
    for (std::size_t t = k; t < n; ++t) c += (series[t] - m) * (series[t - k] - m);
    out.r[k] = c / c0;
  }
  out.band = 1.96 / std::sqrt(static_cast<double>(n));
  return out;
}

}  // namespace evbs
