// Command-line front end over the C library.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "evbs/evbs.h"

using Json = nlohmann::ordered_json;

namespace {

// Exit codes: 0 success, 1 analysis error, 2 usage error.
struct Failure {
  int code;
  std::string message;
};

void check(evbs_status s) {
  if (s != EVBS_OK) throw Failure{1, std::string(evbs_status_name(s)) + ": " + evbs_last_error()};
}

struct Str {
  char* p = nullptr;
  ~Str() { evbs_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct DataHandle {
  evbs_dataset* d = nullptr;
  ~DataHandle() { evbs_dataset_free(d); }
};

struct FitHandle {
  evbs_fit* f = nullptr;
  ~FitHandle() { evbs_fit_free(f); }
};

struct InputOptions {
  std::string input;
  std::string response = "gust_ms";
  std::vector<std::string> covariates{"pressure_mb"};
  std::string date = "date";
  bool log_response = false;
  bool no_bounds = false;

  Json ingest() const {
    Json j{{"date_column", date},
           {"response_column", response},
           {"covariate_columns", covariates},
           {"log_response", log_response}};
    if (no_bounds) j["bounds"] = Json::object();
    return j;
  }
};

void add_input_options(CLI::App* cmd, InputOptions& o) {
  cmd->add_option("-i,--input", o.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  cmd->add_option("--response", o.response, "response column")->capture_default_str();
  cmd->add_option("--covariate", o.covariates, "covariate column (repeatable)")->capture_default_str();
  cmd->add_option("--date", o.date, "date column, empty for none")->capture_default_str();
  cmd->add_flag("--log-response", o.log_response, "model the log of the response");
  cmd->add_flag("--no-bounds", o.no_bounds, "skip the physical range checks on columns");
}

std::uint64_t seed_or_env(std::uint64_t seed, bool given) {
  const char* env = std::getenv("EVBS_SEED");
  if (given || !env || !*env) return seed;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Failure{2, std::string("EVBS_SEED is not an unsigned integer: '") + env + "'"};
  }
}

std::string fixed(const Json& v, int prec = 4) {
  if (v.is_null()) return "NA";
  std::ostringstream os;
  const double x = v.get<double>();
  if (x != 0.0 && (std::abs(x) < 1e-3 || std::abs(x) >= 1e6)) {
    os << std::scientific << std::setprecision(prec - 1) << x;
  } else {
    os << std::fixed << std::setprecision(prec) << x;
  }
  return os.str();
}

void load(const InputOptions& in, DataHandle& data, FitHandle& fit) {
  check(evbs_dataset_load_csv(in.input.c_str(), in.ingest().dump().c_str(), &data.d));
  check(evbs_fit_create(data.d, nullptr, &fit.f));
}

void print_fit(const Json& j, std::size_t n, bool log_response) {
  std::cout << "EVBS log-linear regression, n = " << n << (log_response ? ", response log-transformed" : "") << "\n\n";
  std::cout << std::left << std::setw(16) << "parameter" << std::right << std::setw(12) << "estimate" << std::setw(12)
            << "std.error" << std::setw(10) << "z" << std::setw(12) << "p-value" << "\n";
  for (const auto& r : j.at("estimates"))
    std::cout << std::left << std::setw(16) << r.at("parameter").get<std::string>() << std::right << std::setw(12)
              << fixed(r.at("estimate")) << std::setw(12) << fixed(r.at("std_error")) << std::setw(10)
              << fixed(r.at("z"), 3) << std::setw(12) << fixed(r.at("p_value")) << "\n";
  std::cout << "\nlog-likelihood " << fixed(j.at("loglik")) << "\n";
  std::cout << "converged: " << (j.at("converged").get<bool>() ? "yes" : "no") << " ("
            << j.at("message").get<std::string>() << ", " << j.at("iterations").get<int>() << " iterations)\n";
  if (j.at("gamma_zero_mode").get<bool>()) std::cout << "gamma = 0 submodel selected\n";
  if (j.at("box_active").get<bool>()) std::cout << "warning: estimate on the boundary of the parameter box\n";
  if (!j.at("hessian_negative_definite").get<bool>())
    std::cout << "warning: observed information is not positive definite; standard errors unavailable\n";
}

int run(int argc, char** argv) {
  CLI::App app{"EVBS log-linear regression: fitting, local influence, residual diagnostics, simulation", "evbs"};
  app.set_version_flag("--version", std::string(evbs_version()));
  app.require_subcommand(1);

  InputOptions fit_in, inf_in, res_in, rep_in;
  bool fit_json = false;

  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit");
  add_input_options(fit, fit_in);
  fit->add_flag("--json", fit_json, "print JSON instead of a table");

  auto* inf = app.add_subcommand("influence", "local influence under one perturbation scheme");
  add_input_options(inf, inf_in);
  std::string scheme = "case-weights";
  std::optional<int> q;
  std::optional<double> scale;
  std::string inf_cov;
  bool inf_all = false, inf_json = false;
  inf->add_option("--scheme", scheme, "case-weights, response or covariate")
      ->check(CLI::IsMember({"case-weights", "response", "covariate"}))
      ->capture_default_str();
  inf->add_option("-q", q, "eigenvalue cutoff q (default: largest q below sqrt(n) with an influential direction)");
  inf->add_option("--scale", scale, "perturbation scale (default: sample sd)");
  inf->add_option("--perturb", inf_cov, "covariate column to perturb (covariate scheme)");
  inf->add_flag("--all", inf_all, "list every contribution");
  inf->add_flag("--json", inf_json, "print JSON");

  auto* res = app.add_subcommand("residuals", "quantile residuals, normality tests, simulated envelope");
  add_input_options(res, res_in);
  std::size_t sims = 100;
  double level = 0.95;
  std::uint64_t res_seed = 20240101;
  bool res_json = false;
  res->add_option("--envelope", sims, "envelope simulations, 0 for none")->capture_default_str();
  res->add_option("--level", level, "envelope level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  auto* res_seed_opt = res->add_option("--seed", res_seed, "envelope seed")->capture_default_str();
  res->add_flag("--json", res_json, "print JSON");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
  std::string sim_config, sim_n, sim_gamma, sim_out;
  int sim_scenario = 0;
  std::size_t sim_replicas = 0;
  unsigned sim_threads = 0;
  std::uint64_t sim_seed = 0;
  bool sim_text = false;
  sim->add_option("--config", sim_config, "scenario config file (key = value)")->check(CLI::ExistingFile);
  sim->add_option("--scenario", sim_scenario, "scenario preset")->check(CLI::Range(1, 3));
  sim->add_option("--n", sim_n, "sample sizes, comma separated");
  sim->add_option("--gamma", sim_gamma, "gamma values, comma separated");
  sim->add_option("--replicas", sim_replicas, "replicas per cell");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "base seed");
  sim->add_option("--threads", sim_threads, "worker threads");
  sim->add_option("-o,--output", sim_out, "write to this file instead of stdout");
  sim->add_flag("--text", sim_text, "aligned tables instead of CSV");

  auto* rep = app.add_subcommand("report", "full analysis with report.json, tables and plots");
  add_input_options(rep, rep_in);
  std::string out_dir, rep_config;
  std::vector<std::string> schemes;
  std::vector<std::size_t> deletions;
  bool no_delete_flagged = false, timestamp = false;
  std::optional<int> rep_q;
  std::size_t rep_sims = 100;
  std::uint64_t rep_seed = 20240101;
  rep->add_option("-o,--output", out_dir, "output directory")->required();
  rep->add_option("--config", rep_config, "JSON analysis config; flags given here override it")
      ->check(CLI::ExistingFile);
  rep->add_option("--scheme", schemes, "perturbation schemes (repeatable)")
      ->check(CLI::IsMember({"case-weights", "response", "covariate"}));
  rep->add_option("-q", rep_q, "eigenvalue cutoff q");
  rep->add_option("--delete", deletions, "1-based observations to delete and refit (repeatable)");
  rep->add_flag("--no-delete-flagged", no_delete_flagged, "do not refit without each flagged observation");
  rep->add_option("--envelope", rep_sims, "envelope simulations, 0 for none")->capture_default_str();
  auto* rep_seed_opt = rep->add_option("--seed", rep_seed, "seed (EVBS_SEED overrides unless this is given)");
  rep->add_flag("--timestamp", timestamp, "stamp SVG files with the generation time");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*fit) {
    DataHandle d;
    FitHandle f;
    load(fit_in, d, f);
    Str js;
    check(evbs_fit_json(f.f, &js.p));
    if (fit_json) {
      std::cout << js.str();
    } else {
      print_fit(Json::parse(js.str()), evbs_dataset_rows(d.d), fit_in.log_response);
    }
    return evbs_fit_converged(f.f) ? 0 : 1;
  }

  if (*inf) {
    DataHandle d;
    FitHandle f;
    load(inf_in, d, f);
    Json o{{"scheme", scheme}, {"all", inf_all}};
    if (q) o["q"] = *q;
    if (scale) o["scale"] = *scale;
    if (!inf_cov.empty()) o["covariate"] = inf_cov;
    Str js;
    check(evbs_influence_json(d.d, f.f, o.dump().c_str(), &js.p));
    if (inf_json) {
      std::cout << js.str();
      return 0;
    }
    const auto j = Json::parse(js.str());
    std::cout << "scheme " << j.at("scheme").get<std::string>();
    if (j.contains("scale")) std::cout << " (scale " << fixed(j.at("scale")) << ")";
    std::cout << "\nnormalized eigenvalues:";
    for (const auto& v : j.at("normalized_eigenvalues")) std::cout << ' ' << fixed(v, 5);
    std::cout << "\nq = " << j.at("q").get<int>() << " (default " << j.at("default_q").get<int>()
              << "), directions above q/sqrt(n): " << j.at("k").get<std::size_t>()
              << ", benchmark b(q) = " << fixed(j.at("benchmark"), 5) << "\nflagged:";
    if (j.at("flagged").empty()) std::cout << " none";
    for (const auto& fl : j.at("flagged"))
      std::cout << " #" << fl.at("observation").get<std::size_t>() << " (" << fixed(fl.at("contribution"), 5) << ")";
    std::cout << "\n";
    if (inf_all) {
      std::size_t i = 0;
      for (const auto& v : j.at("contributions")) std::cout << ++i << ',' << fixed(v, 6) << "\n";
    }
    return 0;
  }

  if (*res) {
    DataHandle d;
    FitHandle f;
    load(res_in, d, f);
    const Json o{{"envelope_sims", sims}, {"level", level}, {"seed", seed_or_env(res_seed, res_seed_opt->count() > 0)}};
    Str js;
    check(evbs_residuals_json(d.d, f.f, o.dump().c_str(), &js.p));
    if (res_json) {
      std::cout << js.str();
      return 0;
    }
    const auto j = Json::parse(js.str());
    std::cout << "Kolmogorov-Smirnov: D = " << fixed(j.at("ks").at("statistic")) << ", p = "
              << fixed(j.at("ks").at("p_value")) << "\n";
    if (!j.at("shapiro_wilk").is_null())
      std::cout << "Shapiro-Wilk:       W = " << fixed(j.at("shapiro_wilk").at("statistic")) << ", p = "
                << fixed(j.at("shapiro_wilk").at("p_value")) << "\n";
    if (j.at("clamped").get<std::size_t>() > 0)
      std::cout << "warning: " << j.at("clamped").get<std::size_t>() << " fitted cdf values clamped to [1e-15, 1-1e-15]\n";
    if (!j.at("envelope").is_null()) {
      const auto& e = j.at("envelope");
      std::cout << "envelope: " << e.at("simulations").get<std::size_t>() << " simulations at level "
                << fixed(e.at("level"), 2) << ", " << e.at("outside").get<std::size_t>()
                << " order statistics outside the bands, " << e.at("diverged").get<std::size_t>()
                << " simulated refits diverged\n";
    }
    return 0;
  }

  if (*sim) {
    std::string text;
    if (!sim_config.empty()) {
      std::ifstream in(sim_config);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str() + "\n";
    }
    // Later keys win, so flags go after the file contents.
    if (sim_scenario) text = "scenario = " + std::to_string(sim_scenario) + "\n" + text;
    if (!sim_n.empty()) text += "n = " + sim_n + "\n";
    if (!sim_gamma.empty()) text += "gamma = " + sim_gamma + "\n";
    if (sim_replicas) text += "replicas = " + std::to_string(sim_replicas) + "\n";
    if (sim_threads) text += "threads = " + std::to_string(sim_threads) + "\n";
    if (sim_seed_opt->count() > 0 || std::getenv("EVBS_SEED"))
      text += "seed = " + std::to_string(seed_or_env(sim_seed, sim_seed_opt->count() > 0)) + "\n";
    Str out;
    check(evbs_simulate(text.c_str(), sim_text ? 1 : 0, &out.p));
    if (sim_out.empty()) {
      std::cout << out.str();
    } else {
      std::ofstream f(sim_out, std::ios::binary);
      f << out.str();
      if (!f) throw Failure{1, "cannot write " + sim_out};
    }
    return 0;
  }

  if (*rep) {
    Json cfg = Json::object();
    if (!rep_config.empty()) {
      std::ifstream in(rep_config);
      try {
        cfg = Json::parse(in);
      } catch (const Json::exception& e) {
        throw Failure{2, rep_config + ": " + e.what()};
      }
    }
    cfg["input"] = rep_in.input;
    cfg["ingest"] = rep_in.ingest();
    cfg["output_dir"] = out_dir;
    if (!schemes.empty()) cfg["schemes"] = schemes;
    if (rep_q) cfg["q"] = *rep_q;
    if (!deletions.empty()) cfg["delete_indices"] = deletions;
    if (no_delete_flagged) cfg["delete_flagged"] = false;
    cfg["envelope_sims"] = rep_sims;
    if (rep_seed_opt->count() > 0) {
      cfg["seed"] = rep_seed;
      cfg["seed_from_env"] = false;
    }
    if (timestamp) cfg["timestamp"] = true;
    Str out;
    check(evbs_run_pipeline(cfg.dump().c_str(), &out.p));
    const auto j = Json::parse(out.str());
    std::cout << "wrote " << out_dir << "/report.json, tables/ and plots/\n";
    for (const auto& s : j.at("influence")) {
      std::cout << s.at("scheme").get<std::string>() << ": flagged";
      if (s.at("flagged").empty()) std::cout << " none";
      for (const auto& fl : s.at("flagged")) std::cout << " #" << fl.at("observation").get<std::size_t>();
      std::cout << "\n";
    }
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "evbs: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "evbs: " << e.what() << "\n";
    return 1;
  }
}
