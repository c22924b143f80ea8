#include "evbs/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "evbs/stats.hpp"
#include "evbs/svg.hpp"
#include "evbs/text.hpp"

namespace evbs {

namespace fs = std::filesystem;

namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, Error(Errc::numeric, e.what()));
  }
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& c : cells) s += (s.empty() ? "" : ",") + c;
  return s + "\n";
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::vector<double> iota_1(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1);
  return v;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

PerturbationScheme make_scheme(const std::string& name, const AnalysisConfig& c, const RegressionData& data) {
  if (name == "case-weights") return CaseWeights{};
  if (name == "response") {
    auto s = response_scheme(data);
    if (c.response_scale) s.scale = *c.response_scale;
    return s;
  }
  if (name == "covariate") {
    if (data.p() < 2) throw Error(Errc::invalid_argument, "covariate perturbation needs a covariate column");
    std::size_t col = 1;
    if (!c.covariate.empty()) {
      const auto& l = data.labels();
      const auto it = std::find(l.begin() + 1, l.end(), c.covariate);
      if (it == l.end()) throw Error(Errc::invalid_argument, "unknown covariate '" + c.covariate + "'");
      col = static_cast<std::size_t>(it - l.begin());
    }
    auto s = covariate_scheme(data, col);
    if (c.covariate_scale) s.scale = *c.covariate_scale;
    return s;
  }
  throw Error(Errc::invalid_argument, "unknown perturbation scheme '" + name + "'");
}

// Output files as (relative path, contents).
using Artifacts = std::vector<std::pair<std::string, std::string>>;

void add_tables(Artifacts& out, const AnalysisBundle& b) {
  const auto& labels = b.dataset.data.labels();
  out.emplace_back("tables/data.csv", format_records_csv(b.dataset));

  const auto& d = b.descriptive;
  out.emplace_back("tables/descriptive.csv",
                   csv_row({"n", "min", "median", "mean", "max", "sd", "skewness", "kurtosis", "skewness_adjusted",
                            "kurtosis_adjusted"}) +
                       csv_row({std::to_string(d.n), fmt(d.min), fmt(d.median), fmt(d.mean), fmt(d.max), fmt(d.sd),
                                fmt(d.skewness), fmt(d.kurtosis), fmt(d.skewness_adjusted),
                                fmt(d.kurtosis_adjusted)}));

  std::string est = csv_row({"parameter", "estimate", "std_error", "z", "p_value"});
  const auto names = parameter_names(labels, b.fit.mode());
  const auto vals = b.fit.params();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool beta = i < labels.size();
    est += csv_row({names[i], fmt(vals[i]), fmt(b.fit.std_errors[i]), beta ? fmt(b.fit.wald_z[i]) : "NA",
                    beta ? fmt(b.fit.p_values[i]) : "NA"});
  }
  if (b.fit.gamma_zero_mode) est += csv_row({"gamma", "0", "NA", "NA", "NA"});
  out.emplace_back("tables/estimates.csv", est);

  std::string res = csv_row({"observation", "residual"});
  for (std::size_t i = 0; i < b.residuals.r.size(); ++i) res += csv_row({std::to_string(i + 1), fmt(b.residuals.r[i])});
  out.emplace_back("tables/residuals.csv", res);

  if (b.envelope) {
    std::string env = csv_row({"rank", "theoretical", "residual", "lower", "median", "upper"});
    for (std::size_t i = 0; i < b.envelope->lower.size(); ++i)
      env += csv_row({std::to_string(i + 1), fmt(b.envelope->theoretical[i]), fmt(b.residuals.sorted[i]),
                      fmt(b.envelope->lower[i]), fmt(b.envelope->median[i]), fmt(b.envelope->upper[i])});
    out.emplace_back("tables/envelope.csv", env);
  }
  if (b.acf) {
    std::string a = csv_row({"lag", "acf", "band"});
    for (std::size_t k = 0; k < b.acf->r.size(); ++k) a += csv_row({std::to_string(k), fmt(b.acf->r[k]), fmt(b.acf->band)});
    out.emplace_back("tables/acf.csv", a);
  }

  for (const auto& s : b.influence) {
    const auto name = scheme_name(s.scheme);
    std::string ev = csv_row({"index", "eigenvalue", "normalized"});
    for (std::size_t i = 0; i < s.report.eigenvalues.size(); ++i)
      ev += csv_row({std::to_string(i + 1), fmt(s.report.eigenvalues[i]), fmt(s.report.normalized_eigenvalues[i])});
    out.emplace_back("tables/eigenvalues_" + name + ".csv", ev);
    std::string co = csv_row({"observation", "contribution", "flagged"});
    std::set<std::size_t> flagged(s.report.flagged.begin(), s.report.flagged.end());
    for (std::size_t i = 0; i < s.report.contributions.size(); ++i)
      co += csv_row({std::to_string(i + 1), fmt(s.report.contributions[i]), flagged.count(i) ? "1" : "0"});
    out.emplace_back("tables/contributions_" + name + ".csv", co);
  }

  if (!b.deletions.empty()) {
    const auto full = parameter_names(labels, Mode::full);
    std::string head = "observation,ok";
    for (const auto& n : full) head += "," + n;
    for (const auto& n : full) head += ",R_" + n;
    std::string del = head + "\n";
    for (const auto& dl : b.deletions) {
      del += std::to_string(dl.index + 1) + (dl.ok ? ",1" : ",0");
      const auto v = dl.ok ? pack(dl.refit.theta_hat, Mode::full) : std::vector<double>(full.size(), std::nan(""));
      for (double x : v) del += "," + fmt(x);
      for (std::size_t i = 0; i < full.size(); ++i) del += "," + fmt(dl.ok ? dl.rate_of_change[i] : std::nan(""));
      del += "\n";
    }
    out.emplace_back("tables/deletion.csv", del);
  }
}

void add_plots(Artifacts& out, const AnalysisBundle& b, const AnalysisConfig& c) {
  const std::string stamp = c.timestamp ? "generated " + utc_now() : "";
  auto finish = [&](SvgPlot& p, const std::string& path) {
    if (!stamp.empty()) p.stamp(stamp);
    out.emplace_back(path, p.render());
  };
  const auto& data = b.dataset.data;
  const auto& theta = b.fit.theta_hat;
  const std::size_t n = data.n();
  const auto& opts = b.dataset.options;

  {
    // (a) response against the first covariate with the fitted median curve
    // exp(x'beta) (or x'beta for an untransformed response); other covariates at their means.
    const std::string xname = data.p() > 1 ? data.labels()[1] : "index";
    SvgPlot p("Fitted curve", xname, opts.response_column);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = data.p() > 1 ? data.x()(i, 1) : static_cast<double>(i + 1);
      y[i] = b.dataset.records[i].response;
    }
    p.points(x, y);
    if (data.p() > 1) {
      std::vector<double> means(data.p(), 1.0);
      for (std::size_t k = 2; k < data.p(); ++k) means[k] = mean(data.x().column(k));
      const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
      std::vector<double> gx(101), gy(101);
      for (std::size_t g = 0; g <= 100; ++g) {
        gx[g] = *lo + (*hi - *lo) * static_cast<double>(g) / 100.0;
        double eta = theta.beta[0] + theta.beta[1] * gx[g];
        for (std::size_t k = 2; k < data.p(); ++k) eta += theta.beta[k] * means[k];
        gy[g] = opts.log_response ? std::exp(eta) : eta;
      }
      p.line(gx, gy);
    }
    finish(p, "plots/fitted_curve.svg");
  }
  if (!b.influence.empty()) {
    const auto& s = b.influence.front();
    const auto name = scheme_name(s.scheme);
    SvgPlot ev("Normalized eigenvalues (" + name + ")", "index", "normalized eigenvalue");
    ev.stems(iota_1(s.report.normalized_eigenvalues.size()), s.report.normalized_eigenvalues);
    ev.hline(s.report.q / std::sqrt(static_cast<double>(n)));
    finish(ev, "plots/eigenvalues.svg");

    SvgPlot co("Aggregated contributions, q = " + std::to_string(s.report.q) + " (" + name + ")", "observation",
               "B_j(q)");
    co.stems(iota_1(n), s.report.contributions);
    co.hline(s.report.benchmark);
    for (auto i : s.report.flagged) co.annotate(static_cast<double>(i + 1), s.report.contributions[i], "#" + std::to_string(i + 1));
    finish(co, "plots/contributions.svg");
  }
  {
    SvgPlot qq("Normal probability plot of quantile residuals", "theoretical quantile", "residual");
    std::vector<double> th(n);
    for (std::size_t i = 0; i < n; ++i)
      th[i] = normal_quantile((static_cast<double>(i) + 1 - 0.375) / (static_cast<double>(n) + 0.25));
    if (b.envelope) {
      qq.band(th, b.envelope->lower, b.envelope->upper);
      qq.line(th, b.envelope->median, "#555555", true);
    } else {
      qq.line({th.front(), th.back()}, {th.front(), th.back()}, "#555555", true);
    }
    qq.points(th, b.residuals.sorted);
    finish(qq, "plots/residual_qq.svg");

    SvgPlot ix("Quantile residuals", "observation", "residual");
    ix.points(iota_1(n), b.residuals.r);
    ix.hline(0.0, "#555555", false);
    ix.hline(-3.0);
    ix.hline(3.0);
    finish(ix, "plots/residual_index.svg");
  }
  if (b.acf) {
    SvgPlot a("Sample autocorrelation of " + opts.response_column, "lag", "ACF");
    std::vector<double> lags(b.acf->r.size());
    for (std::size_t k = 0; k < lags.size(); ++k) lags[k] = static_cast<double>(k);
    a.stems(lags, b.acf->r);
    a.hline(b.acf->band);
    a.hline(-b.acf->band);
    a.hline(0.0, "#333333", false);
    finish(a, "plots/acf.svg");
  }
}

void write_all(const fs::path& root, const Artifacts& files, std::vector<std::string>& written) {
  std::vector<fs::path> created_dirs;
  auto make_dir = [&](const fs::path& d) {
    std::vector<fs::path> chain;
    for (fs::path p = d; !p.empty() && !fs::exists(p); p = p.parent_path()) {
      chain.push_back(p);
      if (p == p.parent_path()) break;
    }
    fs::create_directories(d);
    created_dirs.insert(created_dirs.end(), chain.begin(), chain.end());
  };
  try {
    make_dir(root);
    for (const auto& [rel, body] : files) {
      const fs::path full = root / rel;
      make_dir(full.parent_path());
      std::ofstream f(full, std::ios::binary);
      if (!f) throw Error(Errc::io, "cannot write " + full.string());
      written.push_back(rel);
      f << body;
      f.close();
      if (!f) throw Error(Errc::io, "failed writing " + full.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& rel : written) fs::remove(root / rel, ec);
    // Innermost first.
    std::sort(created_dirs.begin(), created_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.string().size() > b.string().size(); });
    for (const auto& d : created_dirs) fs::remove(d, ec);
    written.clear();
    throw;
  }
}

}  // namespace

StageError::StageError(std::string stage, const Error& inner)
    : Error(inner.code(), "stage '" + stage + "': " + inner.what()), stage_(std::move(stage)) {}

AnalysisConfig analysis_config_from_json(const Json& j) {
  try {
    AnalysisConfig c;
    if (!j.is_object()) throw Error(Errc::parse, "analysis config must be a JSON object");
    read(j, "input", c.input);
    if (j.contains("ingest")) c.ingest = ingest_options_from_json(j.at("ingest"));
    if (j.contains("fit")) c.fit = fit_options_from_json(j.at("fit"));
    read(j, "schemes", c.schemes);
    if (j.contains("response_scale") && !j.at("response_scale").is_null())
      c.response_scale = j.at("response_scale").get<double>();
    read(j, "covariate", c.covariate);
    if (j.contains("covariate_scale") && !j.at("covariate_scale").is_null())
      c.covariate_scale = j.at("covariate_scale").get<double>();
    if (j.contains("q") && !j.at("q").is_null()) c.q = j.at("q").get<int>();
    read(j, "delete_flagged", c.delete_flagged);
    read(j, "delete_indices", c.delete_indices);
    read(j, "envelope_sims", c.envelope_sims);
    read(j, "envelope_level", c.envelope_level);
    read(j, "acf_lags", c.acf_lags);
    read(j, "output_dir", c.output_dir);
    read(j, "seed", c.seed);
    read(j, "seed_from_env", c.seed_from_env);
    read(j, "timestamp", c.timestamp);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("analysis config: ") + e.what());
  }
}

Json to_json(const AnalysisConfig& c) {
  return Json{{"input", c.input},
              {"ingest", to_json(c.ingest)},
              {"fit", to_json(c.fit)},
              {"schemes", c.schemes},
              {"response_scale", c.response_scale ? Json(*c.response_scale) : Json(nullptr)},
              {"covariate", c.covariate},
              {"covariate_scale", c.covariate_scale ? Json(*c.covariate_scale) : Json(nullptr)},
              {"q", c.q ? Json(*c.q) : Json(nullptr)},
              {"delete_flagged", c.delete_flagged},
              {"delete_indices", c.delete_indices},
              {"envelope_sims", c.envelope_sims},
              {"envelope_level", c.envelope_level},
              {"acf_lags", c.acf_lags},
              {"output_dir", c.output_dir},
              {"seed", c.seed},
              {"seed_from_env", c.seed_from_env},
              {"timestamp", c.timestamp}};
}

std::uint64_t effective_seed(const AnalysisConfig& c) {
  const char* env = c.seed_from_env ? std::getenv("EVBS_SEED") : nullptr;
  if (!env || !*env) return c.seed;
  try {
    return parse_uint(trim(env), 0);
  } catch (const Error&) {
    throw Error(Errc::invalid_argument, std::string("EVBS_SEED is not an unsigned integer: '") + env + "'");
  }
}

AnalysisBundle run_pipeline(const AnalysisConfig& c) {
  AnalysisBundle b;
  const std::uint64_t seed = stage("config", [&] {
    if (c.input.empty()) throw Error(Errc::invalid_argument, "no input file given");
    if (c.envelope_sims != 0 && c.envelope_sims < 19)
      throw Error(Errc::invalid_argument, "envelope_sims must be 0 or at least 19");
    if (c.q && *c.q < 1) throw Error(Errc::invalid_argument, "q must be at least 1");
    return effective_seed(c);
  });

  b.dataset = stage("ingest", [&] { return ingest_csv(c.input, c.ingest); });
  const RegressionData& data = b.dataset.data;
  const std::size_t n = data.n();

  stage("descriptive", [&] {
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = b.dataset.records[i].response;
    b.descriptive = descriptive_stats(raw);
    const std::size_t lags = std::min(c.acf_lags, (n - 1) / 2);
    if (lags > 0 && b.descriptive.sd > 0.0) b.acf = acf(raw, lags);
    return 0;
  });

  b.fit = stage("fit", [&] {
    FitResult f = fit_mle(data, std::nullopt, c.fit);
    if (!f.converged) throw Error(Errc::not_converged, "fit did not converge: " + f.message);
    return f;
  });

  stage("residuals", [&] {
    b.residuals = quantile_residuals(b.fit, data);
    b.ks = ks_normal_test(b.residuals.r);
    if (n >= 8 && n <= 5000) b.shapiro_wilk = shapiro_wilk(b.residuals.r);
    if (c.envelope_sims > 0) b.envelope = envelope(b.fit, data, c.envelope_sims, c.envelope_level, seed, c.fit);
    return 0;
  });

  stage("influence", [&] {
    for (const auto& name : c.schemes) {
      const PerturbationScheme s = make_scheme(name, c, data);
      const DeltaMatrix d = delta_matrix(s, b.fit, data);
      b.influence.push_back({s, influence_report(d, b.fit.hessian, c.q)});
    }
    return 0;
  });

  stage("deletion", [&] {
    std::set<std::size_t> targets;
    for (auto i : c.delete_indices) {
      if (i < 1 || i > n)
        throw Error(Errc::invalid_argument, "deletion index " + std::to_string(i) + " outside 1.." + std::to_string(n));
      targets.insert(i - 1);
    }
    if (c.delete_flagged)
      for (const auto& s : b.influence) targets.insert(s.report.flagged.begin(), s.report.flagged.end());
    for (auto i : targets) b.deletions.push_back(deletion_impact(data, b.fit, i, c.fit));
    return 0;
  });

  stage("report", [&] {
    Json r;
    r["input"] = c.input;
    r["seed"] = seed;
    r["data"] = {{"n", n},
                 {"response", b.dataset.options.response_column},
                 {"covariates", b.dataset.options.covariate_columns},
                 {"log_response", b.dataset.options.log_response}};
    r["descriptive"] = to_json(b.descriptive);
    r["acf"] = b.acf ? to_json(*b.acf) : Json(nullptr);
    r["fit"] = to_json(b.fit, data.labels());
    Json res;
    res["clamped"] = b.residuals.clamped;
    res["ks"] = to_json(b.ks);
    res["shapiro_wilk"] = b.shapiro_wilk ? to_json(*b.shapiro_wilk) : Json(nullptr);
    if (b.envelope) {
      Json outside = Json::array();
      for (std::size_t i = 0; i < n; ++i)
        if (b.residuals.sorted[i] < b.envelope->lower[i] || b.residuals.sorted[i] > b.envelope->upper[i])
          outside.push_back(i + 1);
      res["envelope"] = {{"simulations", b.envelope->n_sim},
                         {"level", b.envelope->level},
                         {"diverged", b.envelope->diverged},
                         {"ranks_outside", outside}};
    } else {
      res["envelope"] = nullptr;
    }
    r["residuals"] = res;
    Json inf = Json::array();
    for (const auto& s : b.influence) inf.push_back(to_json(s.report, s.scheme));
    r["influence"] = inf;
    Json del = Json::array();
    for (const auto& d : b.deletions) del.push_back(to_json(d, data.labels()));
    r["deletion"] = del;
    b.report = std::move(r);

    if (c.output_dir.empty()) return 0;
    Artifacts files{{"report.json", dump(b.report)}};
    add_tables(files, b);
    add_plots(files, b, c);
    try {
      write_all(c.output_dir, files, b.artifacts);
    } catch (const fs::filesystem_error& e) {
      throw Error(Errc::io, e.what());
    }
    return 0;
  });
  return b;
}

}  // namespace evbs
