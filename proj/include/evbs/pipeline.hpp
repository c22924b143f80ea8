#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evbs/influence.hpp"
#include "evbs/ingest.hpp"
#include "evbs/report.hpp"
#include "evbs/residuals.hpp"

namespace evbs {

struct AnalysisConfig {
  std::string input;
  IngestOptions ingest;
  FitOptions fit;
  // Any of "case-weights", "response", "covariate". The first one drives the plots.
  std::vector<std::string> schemes{"case-weights", "response", "covariate"};
  std::optional<double> response_scale;   // default: sd of the response
  std::string covariate;                  // default: first covariate column
  std::optional<double> covariate_scale;  // default: sd of that column
  std::optional<int> q;
  bool delete_flagged = true;
  std::vector<std::size_t> delete_indices;  // 1-based
  std::size_t envelope_sims = 100;          // 0 skips the envelope
  double envelope_level = 0.95;
  std::size_t acf_lags = 24;
  std::string output_dir;  // empty: nothing is written
  std::uint64_t seed = 20240101;
  bool seed_from_env = true;  // EVBS_SEED, when set, replaces `seed`
  bool timestamp = false;  // stamp SVG files with the wall-clock time
};

AnalysisConfig analysis_config_from_json(const Json& j);
Json to_json(const AnalysisConfig& c);

// The config seed unless EVBS_SEED is set (and seed_from_env).
std::uint64_t effective_seed(const AnalysisConfig& c);

// Failure inside a named pipeline stage; keeps the inner error code.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct SchemeResult {
  PerturbationScheme scheme;
  InfluenceReport report;
};

struct AnalysisBundle {
  Dataset dataset;
  Descriptive descriptive;
  std::optional<Acf> acf;
  FitResult fit;
  ResidualSet residuals;
  TestResult ks;
  std::optional<TestResult> shapiro_wilk;
  std::optional<Envelope> envelope;
  std::vector<SchemeResult> influence;
  std::vector<DeletionImpact> deletions;
  Json report;
  std::vector<std::string> artifacts;  // paths written, relative to output_dir
};

// ingest -> descriptive -> fit -> residuals -> influence -> deletion -> write.
// Nothing is written unless every stage succeeds; a failed write removes the
// files already written.
AnalysisBundle run_pipeline(const AnalysisConfig& config);

}  // namespace evbs
