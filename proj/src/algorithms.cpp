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

#include "vfarm/algorithms.hpp"

#include <cmath>
#include <limits>

namespace vfarm {

double default_metric(const VoteValue& a, const VoteValue& b) { return byte_equal(a, b) ? 0.0 : 1.0; }

double euclidean_metric(const VoteValue& a, const VoteValue& b) {
  auto xa = a.numeric_view();
  auto xb = b.numeric_view();
  if (!xa || !xb || xa->size() != xb->size()) return default_metric(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < xa->size(); ++i) {
    const double d = (*xa)[i] - (*xb)[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::optional<Metric> metric_by_name(std::string_view name) {
  if (name == "discrete" || name == "default") return Metric(default_metric);
  if (name == "euclidean") return Metric(euclidean_metric);
  return std::nullopt;
}

Clustering cluster(std::span<const ValueSlot> slots, double epsilon, const Metric& metric) {
  Clustering out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].valid) continue;
    const auto& x = *slots[i].value;
    bool placed = false;
    for (auto& c : out.classes) {
      if (metric(x, *slots[c.leader].value) <= epsilon) {
        c.members.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) out.classes.push_back(VoteClass{i, {i}});
  }
  return out;
}

namespace {

std::size_t valid_count(std::span<const ValueSlot> slots) {
  std::size_t n = 0;
  for (const auto& s : slots) n += s.valid ? 1 : 0;
  return n;
}

// Member with the smallest total distance to the rest of its class; lowest index on ties.
std::size_t representative(std::span<const ValueSlot> slots, const VoteClass& c, const Metric& metric) {
  std::size_t best = c.members.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (auto i : c.members) {
    double sum = 0.0;
    for (auto j : c.members) {
      if (i != j) sum += metric(*slots[i].value, *slots[j].value);
    }
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

VoteOutcome from_class(std::span<const ValueSlot> slots, const VoteClass& c, const Metric& metric) {
  auto out = VoteOutcome::success(*slots[representative(slots, c, metric)].value);
  out.winning_class = c;
  return out;
}

}  // namespace

VoteOutcome vote_majority(std::span<const ValueSlot> slots, double epsilon, const Metric& metric) {
  if (slots.empty()) return VoteOutcome::fail(ErrorCode::NoMajority);
  const auto clustering = cluster(slots, epsilon, metric);
  for (const auto& c : clustering.classes) {
    // |class| > N/2 without floating point.
    if (2 * c.members.size() > slots.size()) return from_class(slots, c, metric);
  }
  return VoteOutcome::fail(ErrorCode::NoMajority);
}

VoteOutcome vote_median(std::span<const ValueSlot> slots, const Metric& metric) {
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].valid) remaining.push_back(i);
  }
  if (remaining.empty()) return VoteOutcome::fail(ErrorCode::BadState);

  while (remaining.size() > 2) {
    // remaining stays ascending, so the first strict maximum is the lexicographically
    // smallest index pair among the farthest ones.
    std::size_t drop_a = 0;
    std::size_t drop_b = 1;
    double farthest = -1.0;
    for (std::size_t a = 0; a < remaining.size(); ++a) {
      for (std::size_t b = a + 1; b < remaining.size(); ++b) {
        const double d = metric(*slots[remaining[a]].value, *slots[remaining[b]].value);
        if (d > farthest) {
          farthest = d;
          drop_a = a;
          drop_b = b;
        }
      }
    }
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(drop_b));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(drop_a));
  }
  return VoteOutcome::success(*slots[remaining.front()].value);
}

VoteOutcome vote_plurality(std::span<const ValueSlot> slots, double epsilon, const Metric& metric) {
  const auto clustering = cluster(slots, epsilon, metric);
  if (clustering.classes.empty()) return VoteOutcome::fail(ErrorCode::BadState);
  // Classes are created in leader order, so the first largest one has the lowest leader.
  const VoteClass* best = &clustering.classes.front();
  for (const auto& c : clustering.classes) {
    if (c.members.size() > best->members.size()) best = &c;
  }
  return from_class(slots, *best, metric);
}

VoteOutcome vote_weighted_average(std::span<const ValueSlot> slots, double scaling_factor,
                                  const Metric& metric) {
  if (!(scaling_factor >= 0.0)) return VoteOutcome::fail(ErrorCode::BadState);
  if (valid_count(slots) == 0) return VoteOutcome::fail(ErrorCode::BadState);

  std::vector<std::vector<double>> xs(slots.size());
  std::size_t dim = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].valid) continue;
    auto view = slots[i].value->numeric_view();
    if (!view) return VoteOutcome::fail(ErrorCode::BadState);
    if (dim == 0) dim = view->size();
    if (view->size() != dim) return VoteOutcome::fail(ErrorCode::BadState);
    xs[i] = std::move(*view);
  }

  std::vector<double> weights(slots.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].valid) continue;
    double spread = 0.0;
    for (std::size_t j = 0; j < slots.size(); ++j) {
      if (j != i && slots[j].valid) spread += metric(*slots[i].value, *slots[j].value);
    }
    weights[i] = 1.0 / (1.0 + scaling_factor * spread);
    total += weights[i];
  }

  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].valid) continue;
    weights[i] /= total;
    for (std::size_t k = 0; k < dim; ++k) mean[k] += weights[i] * xs[i][k];
  }

  auto out = VoteOutcome::success(VoteValue::from_numeric(mean));
  out.weights = std::move(weights);
  return out;
}

VoteOutcome vote(const AlgorithmId& alg, std::span<const ValueSlot> slots, const Metric& metric) {
  switch (alg.kind) {
    case AlgorithmKind::Majority: return vote_majority(slots, alg.epsilon, metric);
    case AlgorithmKind::Median: return vote_median(slots, metric);
    case AlgorithmKind::Plurality: return vote_plurality(slots, alg.epsilon, metric);
    case AlgorithmKind::WeightedAverage: return vote_weighted_average(slots, alg.scaling_factor, metric);
  }
  return VoteOutcome::fail(ErrorCode::BadState);
}

}  // namespace vfarm
