#pragma once

#include <string>

#include "json.hpp"

#include "evbs/ingest.hpp"
#include "evbs/influence.hpp"
#include "evbs/regression.hpp"
#include "evbs/residuals.hpp"

namespace evbs {

using Json = nlohmann::ordered_json;

// Observation indices in reports are 1-based.
Json to_json(const FitResult& fit, const std::vector<std::string>& labels);
Json to_json(const InfluenceReport& report, const PerturbationScheme& scheme, std::size_t top = 10);
Json to_json(const DeletionImpact& impact, const std::vector<std::string>& labels);
Json to_json(const Descriptive& d);
Json to_json(const TestResult& t);
Json to_json(const Acf& a);
Json to_json(const IngestOptions& o);

IngestOptions ingest_options_from_json(const Json& j);
FitOptions fit_options_from_json(const Json& j);
Json to_json(const FitOptions& o);

// Parameter names in full-pack order: labels..., alpha, gamma.
std::vector<std::string> parameter_names(const std::vector<std::string>& labels, Mode mode);

// Two-space indented, trailing newline.
std::string dump(const Json& j);

}  // namespace evbs
