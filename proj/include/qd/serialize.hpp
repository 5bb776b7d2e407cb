/*
Copyright 2026 The qd Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include "qd/core.hpp"
#include "qd/diagnostics.hpp"
#include "qd/proposals.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace qd {

/// Parameter records as JSON: {"family": "gaussian", "mean", "cov"},
/// {"family": "student", "location", "scale", "dof"},
/// {"family": "mixture", "weights", "components": [gaussian...]},
/// {"family": "bernoulli", "probs"[, "p_min"]}. Matrices are arrays of rows.
nlohmann::json params_to_json(const ProposalParams& params);
ProposalParams params_from_json(const nlohmann::json& j);

nlohmann::json weight_to_json(const WeightFn& w);
WeightFn weight_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const IterationReport& report);

/// Serialized text of a JSON value; doubles use the shortest representation
/// that round-trips.
std::string dump_compact(const nlohmann::json& j);

/// FNV-1a 64 of the compact serialization, as 16 hex digits.
std::string params_digest(const ProposalParams& params);

} // namespace qd
