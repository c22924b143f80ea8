#include "evbs/report.hpp"

#include <cmath>

namespace evbs {

namespace {

// NaN and infinities become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

std::vector<std::string> parameter_names(const std::vector<std::string>& labels, Mode mode) {
  std::vector<std::string> names = labels;
  names.push_back("alpha");
  if (mode == Mode::full) names.push_back("gamma");
  return names;
}

Json to_json(const FitResult& fit, const std::vector<std::string>& labels) {
  Json j;
  j["converged"] = fit.converged;
  j["message"] = fit.message;
  j["iterations"] = fit.iterations;
  j["gamma_zero_mode"] = fit.gamma_zero_mode;
  j["box_active"] = fit.box_active;
  j["hessian_negative_definite"] = fit.hessian_negative_definite;
  j["loglik"] = number(fit.loglik);
  j["score_inf_norm"] = number(fit.score_inf_norm);
  Json est = Json::array();
  const auto names = parameter_names(labels, fit.mode());
  const auto values = fit.params();
  for (std::size_t i = 0; i < names.size(); ++i) {
    Json row;
    row["parameter"] = names[i];
    row["estimate"] = number(values[i]);
    row["std_error"] = number(i < fit.std_errors.size() ? fit.std_errors[i] : std::nan(""));
    const bool beta = i < labels.size();
    row["z"] = beta ? number(fit.wald_z[i]) : Json(nullptr);
    row["p_value"] = beta ? number(fit.p_values[i]) : Json(nullptr);
    est.push_back(row);
  }
  if (fit.gamma_zero_mode) est.push_back({{"parameter", "gamma"}, {"estimate", 0.0}, {"std_error", nullptr},
                                          {"z", nullptr}, {"p_value", nullptr}});
  j["estimates"] = est;
  return j;
}

Json to_json(const InfluenceReport& r, const PerturbationScheme& scheme, std::size_t top) {
  Json j;
  j["scheme"] = scheme_name(scheme);
  if (const auto* s = std::get_if<ResponsePerturbation>(&scheme)) j["scale"] = s->scale;
  if (const auto* s = std::get_if<CovariatePerturbation>(&scheme)) {
    j["column"] = s->column;
    j["scale"] = s->scale;
  }
  const std::size_t t = std::min(top, r.normalized_eigenvalues.size());
  j["eigenvalues"] = numbers(std::span(r.eigenvalues).first(t));
  j["normalized_eigenvalues"] = numbers(std::span(r.normalized_eigenvalues).first(t));
  j["q"] = r.q;
  j["default_q"] = r.default_q;
  j["k"] = r.k;
  j["benchmark"] = number(r.benchmark);
  Json flagged = Json::array();
  for (auto i : r.flagged) flagged.push_back({{"observation", i + 1}, {"contribution", number(r.contributions[i])}});
  j["flagged"] = flagged;
  return j;
}

Json to_json(const DeletionImpact& d, const std::vector<std::string>& labels) {
  Json j;
  j["observation"] = d.index + 1;
  j["ok"] = d.ok;
  if (!d.ok) {
    j["message"] = d.message;
    return j;
  }
  const auto names = parameter_names(labels, Mode::full);
  const auto values = pack(d.refit.theta_hat, Mode::full);
  Json rows = Json::array();
  for (std::size_t i = 0; i < names.size(); ++i)
    rows.push_back({{"parameter", names[i]},
                    {"estimate", number(values[i])},
                    {"std_error", number(i < d.refit.std_errors.size() ? d.refit.std_errors[i] : std::nan(""))},
                    {"rate_of_change_percent", number(d.rate_of_change[i])}});
  j["refit"] = rows;
  j["converged"] = d.refit.converged;
  j["gamma_zero_mode"] = d.refit.gamma_zero_mode;
  return j;
}

Json to_json(const Descriptive& d) {
  return Json{{"n", d.n},
              {"min", number(d.min)},
              {"median", number(d.median)},
              {"mean", number(d.mean)},
              {"max", number(d.max)},
              {"sd", number(d.sd)},
              {"skewness", optional_number(d.skewness)},
              {"kurtosis", optional_number(d.kurtosis)},
              {"skewness_adjusted", optional_number(d.skewness_adjusted)},
              {"kurtosis_adjusted", optional_number(d.kurtosis_adjusted)}};
}

Json to_json(const TestResult& t) { return Json{{"statistic", number(t.statistic)}, {"p_value", number(t.p_value)}}; }

Json to_json(const Acf& a) {
  std::size_t outside = 0;
  for (std::size_t k = 1; k < a.r.size(); ++k) outside += std::abs(a.r[k]) > a.band;
  return Json{{"lags", a.r.size() - 1}, {"band", number(a.band)}, {"outside_band", outside}, {"r", numbers(a.r)}};
}

Json to_json(const IngestOptions& o) {
  Json bounds = Json::object();
  for (const auto& [k, v] : o.bounds) bounds[k] = Json::array({v.first, v.second});
  return Json{{"date_column", o.date_column},
              {"response_column", o.response_column},
              {"covariate_columns", o.covariate_columns},
              {"log_response", o.log_response},
              {"positive_response", o.positive_response},
              {"bounds", bounds}};
}

IngestOptions ingest_options_from_json(const Json& j) {
  IngestOptions o;
  read(j, "date_column", o.date_column);
  read(j, "response_column", o.response_column);
  read(j, "covariate_columns", o.covariate_columns);
  read(j, "log_response", o.log_response);
  read(j, "positive_response", o.positive_response);
  if (j.contains("bounds")) {
    o.bounds.clear();
    for (const auto& [k, v] : j.at("bounds").items()) {
      if (!v.is_array() || v.size() != 2) throw Error(Errc::parse, "bounds." + k + " must be [low, high]");
      o.bounds[k] = {v[0].get<double>(), v[1].get<double>()};
    }
  }
  return o;
}

Json to_json(const FitOptions& o) {
  return Json{{"max_iterations", o.optim.max_iterations},
              {"gradient_tolerance", o.optim.gradient_tolerance},
              {"alpha_max", o.alpha_max},
              {"gamma_min", o.gamma_min},
              {"gamma_max", o.gamma_max},
              {"allow_gamma_zero_submodel", o.allow_gamma_zero_submodel},
              {"gamma_zero_threshold", o.gamma_zero_threshold},
              {"fix_gamma_zero", o.fix_gamma_zero}};
}

FitOptions fit_options_from_json(const Json& j) {
  FitOptions o;
  read(j, "max_iterations", o.optim.max_iterations);
  read(j, "gradient_tolerance", o.optim.gradient_tolerance);
  read(j, "alpha_max", o.alpha_max);
  read(j, "gamma_min", o.gamma_min);
  read(j, "gamma_max", o.gamma_max);
  read(j, "allow_gamma_zero_submodel", o.allow_gamma_zero_submodel);
  read(j, "gamma_zero_threshold", o.gamma_zero_threshold);
  read(j, "fix_gamma_zero", o.fix_gamma_zero);
  o.optim.validate();
  return o;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace evbs
