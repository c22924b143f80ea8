#include "evbs/evbs.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/influence.hpp"
#include "evbs/ingest.hpp"
#include "evbs/pipeline.hpp"
#include "evbs/report.hpp"
#include "evbs/residuals.hpp"
#include "evbs/simulation.hpp"

struct evbs_dataset {
  evbs::RegressionData data;
  std::vector<double> raw_response;
};

struct evbs_fit {
  evbs::FitResult fit;
  evbs::FitOptions options;
  std::vector<std::string> labels;
};

namespace {

thread_local std::string last_error;

evbs_status fail(evbs_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Runs f, mapping exceptions to status codes.
template <class F>
evbs_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return EVBS_OK;
  } catch (const evbs::Error& e) {
    return fail(static_cast<evbs_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(EVBS_E_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(EVBS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EVBS_E_INTERNAL, e.what());
  } catch (...) {
    return fail(EVBS_E_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw evbs::Error(evbs::Errc::invalid_argument, what);
}

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

evbs::Json parse_options(const char* text) {
  if (!text || !*text) return evbs::Json::object();
  auto j = evbs::Json::parse(text);
  if (!j.is_object()) throw evbs::Error(evbs::Errc::parse, "options must be a JSON object");
  return j;
}

evbs_status copy_vector(const std::vector<double>& v, double* out, size_t capacity, size_t* count) {
  if (count) *count = v.size();
  if (!out) return capacity == 0 ? EVBS_OK : fail(EVBS_E_INVALID_ARGUMENT, "null output buffer");
  if (capacity < v.size()) return fail(EVBS_E_INVALID_ARGUMENT, "output buffer too small");
  std::copy(v.begin(), v.end(), out);
  return EVBS_OK;
}

std::vector<double> full_order(const evbs::FitResult& f, const std::vector<double>& v) {
  std::vector<double> out = v;
  if (f.gamma_zero_mode) out.push_back(std::nan(""));
  return out;
}

}  // namespace

extern "C" {

const char* evbs_version(void) { return "1.0.0"; }

const char* evbs_last_error(void) { return last_error.c_str(); }

const char* evbs_status_name(evbs_status s) {
  switch (s) {
    case EVBS_OK: return "ok";
    case EVBS_E_INVALID_ARGUMENT: return "invalid argument";
    case EVBS_E_IO: return "i/o error";
    case EVBS_E_PARSE: return "parse error";
    case EVBS_E_DOMAIN: return "domain error";
    case EVBS_E_INFEASIBLE: return "infeasible";
    case EVBS_E_NOT_CONVERGED: return "not converged";
    case EVBS_E_NUMERIC: return "numeric failure";
    case EVBS_E_UNSUPPORTED: return "unsupported";
    case EVBS_E_NOT_AT_MAXIMUM: return "not at a maximum";
    case EVBS_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void evbs_string_free(char* s) { std::free(s); }

evbs_status evbs_dataset_create(const double* y, const double* x, size_t n, size_t p, evbs_dataset** out) {
  return guarded([&] {
    require(y && x && out, "null argument");
    *out = nullptr;
    evbs::Matrix m(n, p);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < p; ++k) m(i, k) = x[i * p + k];
    auto* d = new evbs_dataset{evbs::RegressionData(std::vector<double>(y, y + n), std::move(m)),
                               std::vector<double>(y, y + n)};
    *out = d;
  });
}

evbs_status evbs_dataset_load_csv(const char* path, const char* options_json, evbs_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    const auto opts = evbs::ingest_options_from_json(parse_options(options_json));
    auto ds = evbs::ingest_csv(path, opts);
    std::vector<double> raw;
    for (const auto& r : ds.records) raw.push_back(r.response);
    *out = new evbs_dataset{std::move(ds.data), std::move(raw)};
  });
}

void evbs_dataset_free(evbs_dataset* d) { delete d; }

size_t evbs_dataset_rows(const evbs_dataset* d) { return d ? d->data.n() : 0; }

size_t evbs_dataset_cols(const evbs_dataset* d) { return d ? d->data.p() : 0; }

evbs_status evbs_dataset_describe_json(const evbs_dataset* d, char** json) {
  return guarded([&] {
    require(d && json, "null argument");
    *json = copy_out(evbs::dump(evbs::to_json(evbs::descriptive_stats(d->raw_response))));
  });
}

evbs_status evbs_fit_create(const evbs_dataset* d, const char* options_json, evbs_fit** out) {
  return guarded([&] {
    require(d && out, "null argument");
    *out = nullptr;
    const auto opts = evbs::fit_options_from_json(parse_options(options_json));
    *out = new evbs_fit{evbs::fit_mle(d->data, std::nullopt, opts), opts, d->data.labels()};
  });
}

void evbs_fit_free(evbs_fit* f) { delete f; }

int evbs_fit_converged(const evbs_fit* f) { return f && f->fit.converged ? 1 : 0; }

evbs_status evbs_fit_params(const evbs_fit* f, double* out, size_t capacity, size_t* count) {
  last_error.clear();
  if (!f) return fail(EVBS_E_INVALID_ARGUMENT, "null fit");
  return copy_vector(evbs::pack(f->fit.theta_hat, evbs::Mode::full), out, capacity, count);
}

evbs_status evbs_fit_std_errors(const evbs_fit* f, double* out, size_t capacity, size_t* count) {
  last_error.clear();
  if (!f) return fail(EVBS_E_INVALID_ARGUMENT, "null fit");
  return copy_vector(full_order(f->fit, f->fit.std_errors), out, capacity, count);
}

evbs_status evbs_fit_json(const evbs_fit* f, char** json) {
  return guarded([&] {
    require(f && json, "null argument");
    *json = copy_out(evbs::dump(evbs::to_json(f->fit, f->labels)));
  });
}

evbs_status evbs_influence_json(const evbs_dataset* d, const evbs_fit* f, const char* options_json, char** json) {
  return guarded([&] {
    require(d && f && json, "null argument");
    const auto o = parse_options(options_json);
    const std::string name = o.value("scheme", std::string("case-weights"));
    evbs::PerturbationScheme scheme;
    if (name == "case-weights") {
      scheme = evbs::CaseWeights{};
    } else if (name == "response") {
      auto s = evbs::response_scheme(d->data);
      if (o.contains("scale")) s.scale = o.at("scale").get<double>();
      scheme = s;
    } else if (name == "covariate") {
      std::size_t col = 1;
      if (o.contains("covariate")) {
        const auto want = o.at("covariate").get<std::string>();
        const auto& l = d->data.labels();
        const auto it = std::find(l.begin() + 1, l.end(), want);
        if (it == l.end()) throw evbs::Error(evbs::Errc::invalid_argument, "unknown covariate '" + want + "'");
        col = static_cast<std::size_t>(it - l.begin());
      }
      require(d->data.p() > 1, "covariate perturbation needs a covariate column");
      auto s = evbs::covariate_scheme(d->data, col);
      if (o.contains("scale")) s.scale = o.at("scale").get<double>();
      scheme = s;
    } else {
      throw evbs::Error(evbs::Errc::invalid_argument, "unknown perturbation scheme '" + name + "'");
    }
    std::optional<int> q;
    if (o.contains("q") && !o.at("q").is_null()) q = o.at("q").get<int>();
    const auto delta = evbs::delta_matrix(scheme, f->fit, d->data);
    const auto rep = evbs::influence_report(delta, f->fit.hessian, q);
    const bool all = o.value("all", false);
    auto j = evbs::to_json(rep, scheme, all ? rep.eigenvalues.size() : 10);
    if (all) {
      evbs::Json c = evbs::Json::array();
      for (double v : rep.contributions) c.push_back(v);
      j["contributions"] = c;
    }
    *json = copy_out(evbs::dump(j));
  });
}

evbs_status evbs_residuals_json(const evbs_dataset* d, const evbs_fit* f, const char* options_json, char** json) {
  return guarded([&] {
    require(d && f && json, "null argument");
    const auto o = parse_options(options_json);
    const auto sims = o.value("envelope_sims", std::size_t{100});
    const double level = o.value("level", 0.95);
    const auto seed = o.value("seed", std::uint64_t{20240101});
    const auto res = evbs::quantile_residuals(f->fit, d->data);
    evbs::Json j;
    j["residuals"] = res.r;
    j["clamped"] = res.clamped;
    j["ks"] = evbs::to_json(evbs::ks_normal_test(res.r));
    const std::size_t n = res.r.size();
    j["shapiro_wilk"] = n >= 8 && n <= 5000 ? evbs::to_json(evbs::shapiro_wilk(res.r)) : evbs::Json(nullptr);
    if (sims > 0) {
      const auto env = evbs::envelope(f->fit, d->data, sims, level, seed, f->options);
      std::size_t outside = 0;
      for (std::size_t i = 0; i < n; ++i) outside += res.sorted[i] < env.lower[i] || res.sorted[i] > env.upper[i];
      j["envelope"] = {{"simulations", env.n_sim},   {"level", env.level},     {"diverged", env.diverged},
                       {"outside", outside},         {"theoretical", env.theoretical},
                       {"lower", env.lower},         {"median", env.median},   {"upper", env.upper}};
    } else {
      j["envelope"] = nullptr;
    }
    *json = copy_out(evbs::dump(j));
  });
}

evbs_status evbs_deletion_json(const evbs_dataset* d, const evbs_fit* f, size_t index, char** json) {
  return guarded([&] {
    require(d && f && json, "null argument");
    require(index >= 1 && index <= d->data.n(), "deletion index out of range (1-based)");
    const auto del = evbs::deletion_impact(d->data, f->fit, index - 1, f->options);
    *json = copy_out(evbs::dump(evbs::to_json(del, f->labels)));
  });
}

evbs_status evbs_simulate(const char* config_text, int as_text, char** out) {
  return guarded([&] {
    require(config_text && out, "null argument");
    const auto result = evbs::run_scenario(evbs::parse_scenario_config(config_text));
    *out = copy_out(as_text ? evbs::format_text(result) : evbs::format_csv(result));
  });
}

evbs_status evbs_run_pipeline(const char* config_json, char** report_json) {
  return guarded([&] {
    require(config_json && report_json, "null argument");
    const auto cfg = evbs::analysis_config_from_json(evbs::Json::parse(config_json));
    const auto bundle = evbs::run_pipeline(cfg);
    *report_json = copy_out(evbs::dump(bundle.report));
  });
}

evbs_status evbs_logevbs_pdf(double y, double alpha, double eta, double gamma, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = evbs::logevbs_pdf(y, {alpha, eta, gamma});
  });
}

evbs_status evbs_logevbs_cdf(double y, double alpha, double eta, double gamma, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = evbs::logevbs_cdf(y, {alpha, eta, gamma});
  });
}

evbs_status evbs_logevbs_quantile(double u, double alpha, double eta, double gamma, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = evbs::logevbs_quantile(u, {alpha, eta, gamma});
  });
}

}  // extern "C"
