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

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vfarm/core.hpp"

namespace vfarm {

/// Non-negative, symmetric, d(x,x) = 0.
using Metric = std::function<double(const VoteValue&, const VoteValue&)>;

/// Discrete metric: 0 for identical bytes, 1 otherwise.
double default_metric(const VoteValue& a, const VoteValue& b);

/// L2 distance between numeric views. Falls back to the discrete metric when either side
/// is not numeric or the dimensions differ.
double euclidean_metric(const VoteValue& a, const VoteValue& b);

/// "discrete" or "euclidean"; empty optional for unknown names.
std::optional<Metric> metric_by_name(std::string_view name);

struct VoteClass {
  std::size_t leader = 0;
  std::vector<std::size_t> members;  // slot indices, ascending, leader included

  friend bool operator==(const VoteClass&, const VoteClass&) = default;
};

struct Clustering {
  std::vector<VoteClass> classes;
};

/// Leader-scan clustering over the valid slots, in slot order: each slot joins the first
/// class whose leader lies within `epsilon`, or leads a new class.
Clustering cluster(std::span<const ValueSlot> slots, double epsilon, const Metric& metric);

struct VoteOutcome {
  std::optional<VoteValue> value;
  ErrorCode failure = ErrorCode::None;
  std::optional<VoteClass> winning_class;
  std::optional<std::vector<double>> weights;

  bool ok() const { return value.has_value(); }

  static VoteOutcome success(VoteValue v) {
    VoteOutcome o;
    o.value = std::move(v);
    return o;
  }
  static VoteOutcome fail(ErrorCode code) {
    VoteOutcome o;
    o.failure = code;
    return o;
  }
};

/// Strict majority over ALL slots (invalid ones count in the denominator).
VoteOutcome vote_majority(std::span<const ValueSlot> slots, double epsilon, const Metric& metric);

/// Repeatedly drops the farthest remaining pair until at most two values remain.
VoteOutcome vote_median(std::span<const ValueSlot> slots, const Metric& metric);

/// Largest class wins; ties go to the lowest leader index.
VoteOutcome vote_plurality(std::span<const ValueSlot> slots, double epsilon, const Metric& metric);

/// w_i = 1 / (1 + s * sum_j d(x_i, x_j)) over valid slots, zero for invalid ones,
/// normalized; outputs the component-wise weighted sum.
VoteOutcome vote_weighted_average(std::span<const ValueSlot> slots, double scaling_factor,
                                  const Metric& metric);

VoteOutcome vote(const AlgorithmId& alg, std::span<const ValueSlot> slots, const Metric& metric);

}  // namespace vfarm
