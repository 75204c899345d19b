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

// Client side of the voting farm. A user module opens a farm handle, describes the farm,
// runs it, controls it with input/output/algorithm requests, polls it with get(), and
// closes it, talking only to its own local voter:
//
//   auto vf = FarmHandle::open(partition, rank);
//   for (auto node : nodes) vf.add(node);
//   vf.run();
//   vf.control({input(v), output(target), algorithm(AlgorithmKind::WeightedAverage), scaling_factor(1.0)});
//   while (vf.last_error() == ErrorCode::None && vf.get(timeout).refused()) {}
//   vf.close();

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vfarm/algorithms.hpp"
#include "vfarm/core.hpp"
#include "vfarm/runtime.hpp"

namespace vfarm {

struct InputRequest {
  VoteValue value;
};
struct OutputRequest {
  ActivityId target;
};
struct AlgorithmRequest {
  AlgorithmId algorithm;
};
struct ScalingRequest {
  double scaling_factor;
};
using ControlRequest = std::variant<InputRequest, OutputRequest, AlgorithmRequest, ScalingRequest>;

inline ControlRequest input(VoteValue v) { return InputRequest{std::move(v)}; }
inline ControlRequest output(ActivityId target) { return OutputRequest{target}; }
inline ControlRequest algorithm(AlgorithmKind kind, double epsilon = 0.0) {
  return AlgorithmRequest{AlgorithmId{kind, epsilon, 1.0}};
}
inline ControlRequest algorithm(AlgorithmId alg) { return AlgorithmRequest{alg}; }
inline ControlRequest scaling_factor(double s) { return ScalingRequest{s}; }

/// Reply of get(): the voted outcome, or a refusal (round still open, or timed out).
struct GetResult {
  std::optional<VoteOutcome> outcome;
  std::uint32_t round = 0;

  bool done() const { return outcome.has_value(); }
  bool refused() const { return !outcome.has_value(); }
};

/// The set of user modules that share farms, one rank per user module. Every user module
/// runs the same client sequence; the k-th handle opened by each rank names the same farm,
/// which is spawned by whichever rank runs it first.
class Partition {
 public:
  struct Options {
    Duration delta_t{1000};
    AlgorithmId algorithm;
    /// How long close() waits for the voter's answer.
    Duration reply_timeout{4000};
  };

  explicit Partition(Runtime& runtime) : Partition(runtime, Options{}) {}
  Partition(Runtime& runtime, Options options) : runtime_(&runtime), options_(options) {}

  Runtime& runtime() { return *runtime_; }
  const Options& options() const { return options_; }

  /// Farm `index` as spawned by the first run(); empty until then.
  const Farm* farm(std::size_t index) const;
  std::size_t next_farm_index(std::uint32_t rank);

  /// Spawns the farm on first use, otherwise checks the caller described the same farm.
  Result<UserEndpoint> activate(std::size_t index, const FarmDescriptor& descriptor, const Metric& metric,
                                std::uint32_t rank);

 private:
  struct Slot {
    std::optional<Farm> farm;
    std::vector<bool> attached;
  };

  Runtime* runtime_;
  Options options_;
  std::vector<Slot> farms_;
  std::vector<std::size_t> opened_;  // per rank
};

/// Opaque farm handle owned by one user module; not for concurrent use.
class FarmHandle {
 public:
  /// Declares and defines a farm; `metric_id` names `metric` for consistency checks.
  static FarmHandle open(Partition& partition, std::uint32_t rank, Metric metric = default_metric,
                         std::string metric_id = "discrete");

  ErrorCode add(NodeId node);
  ErrorCode run();
  ErrorCode control(std::span<const ControlRequest> requests);
  ErrorCode control(std::initializer_list<ControlRequest> requests) {
    return control(std::span<const ControlRequest>(requests.begin(), requests.size()));
  }
  GetResult get(Duration timeout);
  ErrorCode close();

  ErrorCode last_error() const { return last_error_; }
  FarmState state() const { return descriptor_.state; }
  const FarmDescriptor& descriptor() const { return descriptor_; }
  std::uint32_t rank() const { return rank_; }
  std::optional<UserEndpoint> endpoint() const { return endpoint_; }
  /// Voter `rank` of the activated farm, if any.
  std::shared_ptr<VoterCell> local_voter() const;

  /// Messages this handle sent to its voter, and those sent since the last input().
  std::uint64_t requests_sent() const { return requests_sent_; }
  std::uint64_t requests_this_round() const { return requests_this_round_; }
  bool input_outstanding() const { return input_outstanding_; }
  /// Most recent VOTED_VALUE seen on the local link (reply or routed output).
  const std::optional<VoteOutcome>& last_outcome() const { return last_outcome_; }

 private:
  FarmHandle(Partition& partition, std::uint32_t rank, std::size_t index, Metric metric, std::string metric_id);

  ErrorCode fail(ErrorCode e) { return last_error_ = e; }
  ErrorCode send(Message msg);
  /// Handles unsolicited traffic; returns true when `m` answers request `ref`.
  bool absorb(const Message& m, std::uint32_t ref);

  Partition* partition_;
  std::uint32_t rank_;
  std::size_t index_;
  Metric metric_;
  FarmDescriptor descriptor_;
  std::optional<UserEndpoint> endpoint_;
  ErrorCode last_error_ = ErrorCode::None;
  AlgorithmId algorithm_;
  std::uint32_t next_ref_ = 1;
  std::uint64_t requests_sent_ = 0;
  std::uint64_t requests_this_round_ = 0;
  bool input_outstanding_ = false;
  std::uint32_t last_done_round_ = 0;
  std::optional<VoteOutcome> last_outcome_;
};

}  // namespace vfarm
