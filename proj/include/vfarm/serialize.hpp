// Copyright 2026 The vfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON experiment specs and JSON/CSV reports. The schema is described in README.md.

#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "vfarm/harness.hpp"

namespace vfarm {

/// A number, an array of numbers, {"hex": "..."} or {"text": "..."}.
VoteValue value_from_json(const nlohmann::json& j);
nlohmann::json value_to_json(const VoteValue& v);
nlohmann::json outcome_to_json(const VoteOutcome& o);

/// Throws SpecError on malformed documents, unknown keys, or bad enum names. Does not run
/// validate(); callers do that.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec parse_spec(std::string_view text);
nlohmann::json spec_to_json(const ExperimentSpec& spec);

nlohmann::json report_to_json(const Report& report);
/// Indented JSON; byte-identical for identical reports.
std::string report_json_text(const Report& report);
/// Header plus one row per repetition, stage and voter.
std::string report_csv(const Report& report);

std::string bench_csv(const std::vector<BenchRow>& rows);
nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);

}  // namespace vfarm
