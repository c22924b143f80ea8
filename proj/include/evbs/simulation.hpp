#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evbs/regression.hpp"

namespace evbs {

struct ScenarioConfig {
  int scenario = 1;
  std::vector<std::size_t> sample_sizes{60, 120, 180};
  std::vector<double> gammas{-0.2, 0.0, 0.2};
  std::size_t replicas = 500;
  double beta0 = 0.5;
  double beta1 = 0.5;
  double alpha = 0.5;
  // Leverage: ceil(fraction * n) covariate values redrawn from U(low, high).
  double leverage_fraction = 0.0;
  double leverage_low = 5.0;
  double leverage_high = 10.0;
  // Contamination: ceil(fraction * n) errors drawn with alpha = contamination_alpha.
  double contamination_fraction = 0.0;
  double contamination_alpha = 0.7;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  // Upper end of the gamma search box used for the replica fits.
  double fit_gamma_max = 1.0 - 1e-6;

  static ScenarioConfig preset(int scenario);
  void validate() const;
};

// key = value lines, '#' starts a comment. Lists are comma separated.
// Keys not given keep the preset of the `scenario` key (or scenario 1).
ScenarioConfig parse_scenario_config(std::string_view text);
ScenarioConfig load_scenario_config(const std::string& path);

RegressionData generate_replica(const ScenarioConfig& cfg, std::size_t n, double gamma, std::size_t replica);

// Estimator order: beta0, beta1, alpha, gamma.
struct CellResult {
  std::size_t n = 0;
  double gamma = 0.0;
  std::size_t replicas = 0;
  std::size_t converged = 0;
  std::size_t diverged = 0;
  bool flagged = false;  // more than 5% of replicas diverged
  std::vector<double> truth, mean, bias, rmse, cp;
};

struct ScenarioResult {
  int scenario = 1;
  std::vector<CellResult> cells;
};

FitOptions replica_fit_options(const ScenarioConfig& cfg);
ScenarioResult run_scenario(const ScenarioConfig& cfg);

std::string format_csv(const ScenarioResult& result);
std::string format_text(const ScenarioResult& result);
ScenarioResult parse_result_csv(std::string_view text);

}  // namespace evbs
