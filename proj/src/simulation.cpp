#include "evbs/simulation.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "evbs/distributions.hpp"
#include "evbs/error.hpp"
#include "evbs/rng.hpp"
#include "evbs/text.hpp"

namespace evbs {

namespace {

constexpr double kZ95 = 1.96;
const char* const kEstimators[] = {"beta0", "beta1", "alpha", "gamma"};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t n, double gamma) {
  return mix(seed ^ mix(static_cast<std::uint64_t>(n) ^ mix(std::bit_cast<std::uint64_t>(gamma + 0.0))));
}

std::size_t count_of(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

template <class T>
std::vector<T> parse_list(std::string_view v, int line) {
  std::vector<T> out;
  for (auto item : split(v, ',')) {
    item = trim(item);
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(parse_double(item, line));
    } else {
      out.push_back(static_cast<T>(parse_uint(item, line)));
    }
  }
  if (out.empty()) throw Error(Errc::parse, "line " + std::to_string(line) + ": empty list");
  return out;
}

struct ReplicaOutcome {
  bool ok = false;
  std::vector<double> est, se;
};

ReplicaOutcome fit_replica(const ScenarioConfig& cfg, const FitOptions& opts, std::size_t n, double gamma,
                           std::size_t r) {
  ReplicaOutcome out;
  try {
    const RegressionData data = generate_replica(cfg, n, gamma, r);
    const FitResult fit = fit_mle(data, std::nullopt, opts);
    if (!fit.converged || !fit.hessian_negative_definite) return out;
    out.est = fit.params();
    out.se = fit.std_errors;
    out.ok = true;
  } catch (const Error&) {
  }
  return out;
}

}  // namespace

ScenarioConfig ScenarioConfig::preset(int scenario) {
  ScenarioConfig c;
  c.scenario = scenario;
  switch (scenario) {
    case 1: break;
    case 2: c.leverage_fraction = 0.1; break;
    case 3:
      c.beta0 = 1.0;
      c.beta1 = 2.0;
      c.alpha = 1.2;
      c.contamination_fraction = 0.1;
      c.contamination_alpha = 0.7;
      break;
    default: throw Error(Errc::invalid_argument, "scenario must be 1, 2 or 3");
  }
  return c;
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(Errc::invalid_argument, "scenario config: " + m); };
  if (scenario < 1 || scenario > 3) bad("scenario must be 1, 2 or 3");
  if (sample_sizes.empty() || gammas.empty()) bad("need at least one sample size and one gamma");
  for (auto n : sample_sizes)
    if (n < 4) bad("sample sizes must be at least 4");
  for (double g : gammas)
    if (!(g > -1.0 && g < fit_gamma_max)) bad("gamma values must lie inside the fitting box");
  if (replicas < 1) bad("replicas must be at least 1");
  if (!(alpha > 0.0) || !(contamination_alpha > 0.0)) bad("alpha values must be positive");
  if (!(leverage_fraction >= 0.0 && leverage_fraction < 1.0)) bad("leverage_fraction must lie in [0, 1)");
  if (!(contamination_fraction >= 0.0 && contamination_fraction < 1.0))
    bad("contamination_fraction must lie in [0, 1)");
  if (!(leverage_low < leverage_high)) bad("leverage range is empty");
  if (threads < 1) bad("threads must be at least 1");
  if (!std::isfinite(beta0) || !std::isfinite(beta1)) bad("coefficients must be finite");
}

ScenarioConfig parse_scenario_config(std::string_view text) {
  // First pass picks the preset so the remaining keys override it.
  int scenario = 1;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    if (trim(line.substr(0, eq)) == "scenario")
      scenario = static_cast<int>(parse_uint(trim(line.substr(eq + 1)), line_no));
  }
  ScenarioConfig c = ScenarioConfig::preset(scenario);

  line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "scenario") continue;
    if (key == "n") c.sample_sizes = parse_list<std::size_t>(value, line_no);
    else if (key == "gamma") c.gammas = parse_list<double>(value, line_no);
    else if (key == "replicas") c.replicas = parse_uint(value, line_no);
    else if (key == "beta0") c.beta0 = parse_double(value, line_no);
    else if (key == "beta1") c.beta1 = parse_double(value, line_no);
    else if (key == "alpha") c.alpha = parse_double(value, line_no);
    else if (key == "leverage_fraction") c.leverage_fraction = parse_double(value, line_no);
    else if (key == "leverage_low") c.leverage_low = parse_double(value, line_no);
    else if (key == "leverage_high") c.leverage_high = parse_double(value, line_no);
    else if (key == "contamination_fraction") c.contamination_fraction = parse_double(value, line_no);
    else if (key == "contamination_alpha") c.contamination_alpha = parse_double(value, line_no);
    else if (key == "seed") c.seed = parse_uint(value, line_no);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_uint(value, line_no));
    else if (key == "fit_gamma_max") c.fit_gamma_max = parse_double(value, line_no);
    else throw Error(Errc::parse, "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open scenario config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str());
}

RegressionData generate_replica(const ScenarioConfig& cfg, std::size_t n, double gamma, std::size_t replica) {
  Rng rng = Rng::stream(cell_seed(cfg.seed, n, gamma), replica);
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform();
  if (cfg.leverage_fraction > 0.0)
    for (auto i : rng.sample_without_replacement(n, count_of(cfg.leverage_fraction, n)))
      x[i] = rng.uniform(cfg.leverage_low, cfg.leverage_high);

  std::vector<double> alpha(n, cfg.alpha);
  if (cfg.contamination_fraction > 0.0)
    for (auto i : rng.sample_without_replacement(n, count_of(cfg.contamination_fraction, n)))
      alpha[i] = cfg.contamination_alpha;

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = cfg.beta0 + cfg.beta1 * x[i] + logevbs_quantile(rng.uniform(), {alpha[i], 0.0, gamma});
  return RegressionData(std::move(y), design_with_intercept({x}, n), {"(intercept)", "x"});
}

FitOptions replica_fit_options(const ScenarioConfig& cfg) {
  FitOptions o;
  o.gamma_max = cfg.fit_gamma_max;
  // Every replica is fitted in the full model so gamma always has an interval.
  o.allow_gamma_zero_submodel = false;
  return o;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const FitOptions opts = replica_fit_options(cfg);
  ScenarioResult result;
  result.scenario = cfg.scenario;
  const std::vector<double> truth_beta{cfg.beta0, cfg.beta1, cfg.alpha};

  for (std::size_t n : cfg.sample_sizes) {
    for (double gamma : cfg.gammas) {
      std::vector<ReplicaOutcome> out(cfg.replicas);
      const unsigned workers = std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.replicas));
      if (workers <= 1) {
        for (std::size_t r = 0; r < cfg.replicas; ++r) out[r] = fit_replica(cfg, opts, n, gamma, r);
      } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
          pool.emplace_back([&, w] {
            for (std::size_t r = w; r < cfg.replicas; r += workers) out[r] = fit_replica(cfg, opts, n, gamma, r);
          });
        for (auto& t : pool) t.join();
      }

      CellResult cell;
      cell.n = n;
      cell.gamma = gamma;
      cell.replicas = cfg.replicas;
      cell.truth = {cfg.beta0, cfg.beta1, cfg.alpha, gamma};
      const std::size_t m = cell.truth.size();
      std::vector<double> sum(m, 0.0), sq(m, 0.0), hit(m, 0.0);
      for (const auto& o : out) {
        if (!o.ok) {
          ++cell.diverged;
          continue;
        }
        ++cell.converged;
        for (std::size_t j = 0; j < m; ++j) {
          const double e = o.est[j] - cell.truth[j];
          sum[j] += o.est[j];
          sq[j] += e * e;
          if (std::abs(e) <= kZ95 * o.se[j]) hit[j] += 1.0;
        }
      }
      cell.flagged = static_cast<double>(cell.diverged) > 0.05 * static_cast<double>(cell.replicas);
      const double k = static_cast<double>(cell.converged);
      cell.mean.assign(m, std::nan(""));
      cell.bias.assign(m, std::nan(""));
      cell.rmse.assign(m, std::nan(""));
      cell.cp.assign(m, std::nan(""));
      if (cell.converged > 0)
        for (std::size_t j = 0; j < m; ++j) {
          cell.mean[j] = sum[j] / k;
          cell.bias[j] = cell.mean[j] - cell.truth[j];
          cell.rmse[j] = std::sqrt(sq[j] / k);
          cell.cp[j] = hit[j] / k;
        }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::string format_csv(const ScenarioResult& result) {
  std::ostringstream os;
  os << "scenario,n,gamma,replicas,converged,diverged,flagged";
  for (const char* stat : {"truth", "mean", "bias", "rmse", "cp"})
    for (const char* e : kEstimators) os << ',' << stat << '_' << e;
  os << '\n';
  for (const auto& c : result.cells) {
    os << result.scenario << ',' << c.n << ',' << format_double(c.gamma) << ',' << c.replicas << ',' << c.converged
       << ',' << c.diverged << ',' << (c.flagged ? 1 : 0);
    for (const auto* v : {&c.truth, &c.mean, &c.bias, &c.rmse, &c.cp})
      for (double x : *v) os << ',' << format_double(x);
    os << '\n';
  }
  return os.str();
}

std::string format_text(const ScenarioResult& result) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  auto block = [&](const char* left, const char* right, auto pick_left, auto pick_right) {
    os << std::setw(12) << "" << " | " << std::left << std::setw(32) << left << "| " << right << std::right << '\n';
    os << std::setw(5) << "n" << std::setw(7) << "gamma" << " |";
    for (const char* e : kEstimators) os << std::setw(8) << e;
    os << " |";
    for (const char* e : kEstimators) os << std::setw(8) << e;
    os << '\n';
    for (const auto& c : result.cells) {
      os << std::setw(5) << c.n << std::setw(7) << c.gamma << " |";
      for (double v : pick_left(c)) os << std::setw(8) << v;
      os << " |";
      for (double v : pick_right(c)) os << std::setw(8) << v;
      if (c.flagged) os << "  (" << c.diverged << " of " << c.replicas << " diverged)";
      os << '\n';
    }
  };
  os << "Scenario " << result.scenario << ": empirical mean and bias\n";
  block("MLE", "BIAS", [](const CellResult& c) { return c.mean; }, [](const CellResult& c) { return c.bias; });
  os << "\nScenario " << result.scenario << ": RMSE and coverage probability\n";
  block("RMSE", "CP", [](const CellResult& c) { return c.rmse; }, [](const CellResult& c) { return c.cp; });
  return os.str();
}

ScenarioResult parse_result_csv(std::string_view text) {
  ScenarioResult r;
  int line_no = 0;
  bool header = true;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (!line.starts_with("scenario,n,gamma")) throw Error(Errc::parse, "line 1: not a scenario result table");
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7 + 5 * 4)
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected 27 fields, got " +
                                   std::to_string(f.size()));
    CellResult c;
    r.scenario = static_cast<int>(parse_uint(f[0], line_no));
    c.n = parse_uint(f[1], line_no);
    c.gamma = parse_double(f[2], line_no);
    c.replicas = parse_uint(f[3], line_no);
    c.converged = parse_uint(f[4], line_no);
    c.diverged = parse_uint(f[5], line_no);
    c.flagged = parse_uint(f[6], line_no) != 0;
    std::size_t k = 7;
    for (auto* v : {&c.truth, &c.mean, &c.bias, &c.rmse, &c.cp})
      for (int j = 0; j < 4; ++j) v->push_back(parse_double(f[k++], line_no));
    r.cells.push_back(std::move(c));
  }
  return r;
}

}  // namespace evbs
