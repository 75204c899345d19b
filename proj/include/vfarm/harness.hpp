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

// Experiment driver: farms and restoring-organ pipelines under injected faults, run either
// in virtual time (deterministic) or on the wall clock, plus reference oracles.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vfarm/algorithms.hpp"
#include "vfarm/core.hpp"
#include "vfarm/transport.hpp"

namespace vfarm {

enum class FaultKind : std::uint8_t { CrashUser, CrashVoter, CorruptInput, DropMessage, DelayMessage };
std::string_view to_string(FaultKind k);
std::optional<FaultKind> parse_fault_kind(std::string_view name);

/// One injected fault. Crashes hold for the whole repetition; CORRUPT_INPUT alters the
/// target user's input; DROP/DELAY hit the `index`-th voter-to-voter frame the target
/// voter sends (0-based).
struct FaultSpec {
  FaultKind kind = FaultKind::CrashUser;
  std::uint32_t stage = 1;   // 1-based
  std::uint32_t target = 1;  // VoterId / user rank
  /// XOR pattern for CORRUPT_INPUT; empty draws random bytes from the seed.
  std::vector<std::uint8_t> pattern;
  Duration delay{0};
  std::uint64_t index = 0;
};

struct StageSpec {
  std::uint32_t n = 3;
  AlgorithmId algorithm;
  Duration delta_t{1000};
  /// Placement; empty means nodes 1..n.
  std::vector<NodeId> nodes;

  std::vector<NodeId> placement() const;
};

/// Stage k voter i routes its output to stage k+1 user i.
struct PipelineSpec {
  std::vector<StageSpec> stages;
};

enum class ClockMode : std::uint8_t { Virtual, Real };
std::string_view to_string(ClockMode c);
std::optional<ClockMode> parse_clock_mode(std::string_view name);

struct ExperimentSpec {
  PipelineSpec pipeline;
  std::string metric = "discrete";
  /// One input per user module of the first stage.
  std::vector<VoteValue> inputs;
  std::vector<FaultSpec> faults;
  std::uint64_t seed = 0;
  ClockMode clock = ClockMode::Virtual;
  std::uint32_t repetitions = 1;
  Duration local_latency{1};
  Duration virtual_latency{0};
  bool synchronous_voter_links = false;
};

class SpecError : public std::runtime_error {
 public:
  explicit SpecError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Every violated invariant, empty when the spec is runnable.
std::vector<std::string> validation_issues(const ExperimentSpec& spec);
/// Throws SpecError listing every issue.
void validate(const ExperimentSpec& spec);
/// Legal but suspicious settings, e.g. a node listed twice.
std::vector<std::string> spec_warnings(const ExperimentSpec& spec);

struct VoterReport {
  std::uint32_t voter = 0;
  bool live = true;
  bool completed = false;
  VoteOutcome outcome;
  std::uint64_t outcome_hash = 0;
  std::size_t invalid_slots = 0;
  std::uint32_t timeouts = 0;
  /// From stage start until this voter completed its round.
  Duration duration{0};
};

struct StageReport {
  std::uint32_t stage = 0;
  TimePoint start{0};
  /// Latest completion among live voters, relative to `start`.
  Duration duration{0};
  std::vector<VoterReport> voters;
  /// Fault-free expectation for this stage.
  VoteOutcome reference;
  bool agreement = false;
  bool matches_reference = false;
  /// Messages each user sent to its voter, whole lifecycle and within the voting round.
  std::vector<std::uint64_t> client_messages;
  std::vector<std::uint64_t> client_round_messages;
  std::uint64_t voter_frames = 0;
  Census census;
  bool census_ok = false;
};

struct RepetitionReport {
  std::uint32_t index = 0;
  std::vector<StageReport> stages;
};

struct StageAggregate {
  std::uint32_t stage = 0;
  std::size_t samples = 0;
  double mean_s = 0.0;
  double stddev_s = 0.0;
};

struct Assertion {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct Report {
  ExperimentSpec spec;
  std::vector<RepetitionReport> repetitions;
  std::vector<StageAggregate> aggregate;
  std::vector<std::string> warnings;
  std::vector<Assertion> assertions;

  bool passed() const;
};

/// Runs `spec.repetitions` repetitions, each on a fresh fabric and fresh farms, driving
/// every user module through open/add/run/control/get/close. Throws SpecError.
Report run_experiment(const ExperimentSpec& spec);
/// As run_experiment, but requires at least two stages.
Report run_pipeline(const ExperimentSpec& spec);

/// Mean and sample standard deviation; the deviation of a single sample is 0.
std::pair<double, double> mean_stddev(std::span<const double> xs);

/// Reference vote: exhaustive class counting, exhaustive farthest-pair elimination, and
/// the direct weighted-average formula. Shares no code with the algorithms module.
VoteOutcome oracle_vote(const AlgorithmId& alg, std::span<const ValueSlot> slots, const Metric& metric);

/// Same value bytes, or same failure code.
bool same_outcome(const VoteOutcome& a, const VoteOutcome& b);
/// FNV-1a over the outcome's canonical text.
std::uint64_t outcome_hash(const VoteOutcome& o);

struct CensusCheck {
  bool passed = false;
  Census census;
  std::string detail;
};
/// Wires a bare farm of cardinality `n` on a fresh virtual fabric and checks
/// n(n-1)/2 virtual links, n local links and n voters.
CensusCheck census_check(std::uint32_t n);
/// Checks an existing census against the formulas for `n` voters on distinct nodes.
CensusCheck census_check(const Census& census, std::uint32_t n);
/// As above, but voters sharing a node are linked locally: each such pair moves one link
/// from the virtual to the local count.
CensusCheck census_check(const Census& census, std::span<const NodeId> placement);

/// Oracle equivalence over every slot sequence from {0, 1, 2, invalid} with N <= 5, plus
/// `random_instances` seeded scalar instances with epsilon > 0, plus the census for
/// N = 1..8. One assertion per suite.
std::vector<Assertion> selftest(std::uint64_t seed = 1, std::size_t random_instances = 1000);

struct BenchRow {
  std::uint32_t n = 0;
  std::size_t samples = 0;
  double mean_s = 0.0;
  double stddev_s = 0.0;
};

struct BenchOptions {
  std::uint32_t n_min = 1;
  std::uint32_t n_max = 4;
  std::uint32_t repetitions = 50;
  bool include_warmup = false;
  AlgorithmId algorithm;
  Duration delta_t = std::chrono::seconds(1);
  bool synchronous_voter_links = true;
  std::uint64_t seed = 0;
};

/// Fault-free wall-clock rounds for every N in range, one row per N.
std::vector<BenchRow> bench(const BenchOptions& options);

}  // namespace vfarm
