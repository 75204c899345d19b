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

// Brute-force reference voting. Deliberately naive: class structure is found by
// enumerating every leader assignment and keeping the one consistent with a leader scan.

#include <map>
#include <set>
#include <stdexcept>

#include "vfarm/harness.hpp"

namespace vfarm {

namespace {

// assignment[p] is the position (into `valid`) of the leader of valid[p].
bool consistent(const std::vector<std::size_t>& valid, const std::vector<std::size_t>& assignment,
                std::span<const ValueSlot> slots, double eps, const Metric& d) {
  auto dist = [&](std::size_t p, std::size_t q) { return d(*slots[valid[p]].value, *slots[valid[q]].value); };
  auto is_leader = [&](std::size_t p) { return assignment[p] == p; };
  for (std::size_t p = 0; p < valid.size(); ++p) {
    const auto a = assignment[p];
    if (!is_leader(a)) return false;
    if (a != p && dist(a, p) > eps) return false;
    // No leader earlier than the chosen one (or, for a leader, earlier than itself) is close enough.
    for (std::size_t q = 0; q < a; ++q) {
      if (is_leader(q) && dist(q, p) <= eps) return false;
    }
  }
  return true;
}

std::map<std::size_t, std::vector<std::size_t>> classes_of(std::span<const ValueSlot> slots, double eps,
                                                           const Metric& d) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].valid) valid.push_back(i);
  }
  if (valid.size() > 8) throw std::invalid_argument("oracle_vote: too many slots for exhaustive search");

  std::vector<std::size_t> assignment(valid.size(), 0);
  std::optional<std::vector<std::size_t>> found;
  // Odometer over assignment[p] in [0, p].
  for (;;) {
    if (consistent(valid, assignment, slots, eps, d)) {
      if (found) throw std::logic_error("oracle_vote: ambiguous clustering");
      found = assignment;
    }
    std::size_t p = 0;
    while (p < assignment.size() && assignment[p] == p) assignment[p++] = 0;
    if (p == assignment.size()) break;
    ++assignment[p];
  }

  std::map<std::size_t, std::vector<std::size_t>> out;  // leader slot -> member slots
  if (!found) {
    if (!valid.empty()) throw std::logic_error("oracle_vote: no consistent clustering");
    return out;
  }
  for (std::size_t p = 0; p < valid.size(); ++p) out[valid[(*found)[p]]].push_back(valid[p]);
  return out;
}

VoteValue central_member(std::span<const ValueSlot> slots, const std::vector<std::size_t>& members, const Metric& d) {
  std::size_t best = members.front();
  double best_total = 0.0;
  bool have = false;
  for (auto i : members) {
    double total = 0.0;
    for (auto j : members) {
      if (j != i) total += d(*slots[i].value, *slots[j].value);
    }
    if (!have || total < best_total) {
      best = i;
      best_total = total;
      have = true;
    }
  }
  return *slots[best].value;
}

VoteOutcome oracle_majority(std::span<const ValueSlot> slots, double eps, const Metric& d) {
  for (const auto& [leader, members] : classes_of(slots, eps, d)) {
    if (static_cast<double>(members.size()) > static_cast<double>(slots.size()) / 2.0) {
      return VoteOutcome::success(central_member(slots, members, d));
    }
  }
  return VoteOutcome::fail(ErrorCode::NoMajority);
}

VoteOutcome oracle_plurality(std::span<const ValueSlot> slots, double eps, const Metric& d) {
  const auto classes = classes_of(slots, eps, d);
  if (classes.empty()) return VoteOutcome::fail(ErrorCode::BadState);
  std::size_t biggest = 0;
  for (const auto& [leader, members] : classes) biggest = std::max(biggest, members.size());
  for (const auto& [leader, members] : classes) {  // ascending leader
    if (members.size() == biggest) return VoteOutcome::success(central_member(slots, members, d));
  }
  return VoteOutcome::fail(ErrorCode::BadState);
}

VoteOutcome oracle_median(std::span<const ValueSlot> slots, const Metric& d) {
  std::set<std::size_t> left;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].valid) left.insert(i);
  }
  if (left.empty()) return VoteOutcome::fail(ErrorCode::BadState);
  while (left.size() > 2) {
    std::map<std::pair<std::size_t, std::size_t>, double> pairs;
    double far = 0.0;
    for (auto i : left) {
      for (auto j : left) {
        if (i < j) {
          pairs[{i, j}] = d(*slots[i].value, *slots[j].value);
          far = std::max(far, pairs[{i, j}]);
        }
      }
    }
    for (const auto& [pair, dist] : pairs) {  // lexicographic order
      if (dist == far) {
        left.erase(pair.first);
        left.erase(pair.second);
        break;
      }
    }
  }
  return VoteOutcome::success(*slots[*left.begin()].value);
}

VoteOutcome oracle_weighted(std::span<const ValueSlot> slots, double s, const Metric& d) {
  if (!(s >= 0.0)) return VoteOutcome::fail(ErrorCode::BadState);
  std::vector<std::optional<std::vector<double>>> xs(slots.size());
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].valid) continue;
    xs[i] = slots[i].value->numeric_view();
    if (!xs[i]) return VoteOutcome::fail(ErrorCode::BadState);
    if (dim && *dim != xs[i]->size()) return VoteOutcome::fail(ErrorCode::BadState);
    dim = xs[i]->size();
  }
  if (!dim) return VoteOutcome::fail(ErrorCode::BadState);

  std::vector<double> w(slots.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!xs[i]) continue;
    double sum = 0.0;
    for (std::size_t j = 0; j < slots.size(); ++j) {
      if (j != i && xs[j]) sum += d(*slots[i].value, *slots[j].value);
    }
    w[i] = 1.0 / (1.0 + s * sum);
    z += w[i];
  }
  std::vector<double> y(*dim, 0.0);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!xs[i]) continue;
    w[i] = w[i] / z;
    for (std::size_t c = 0; c < *dim; ++c) y[c] += w[i] * (*xs[i])[c];
  }
  auto out = VoteOutcome::success(VoteValue::from_numeric(y));
  out.weights = w;
  return out;
}

}  // namespace

VoteOutcome oracle_vote(const AlgorithmId& alg, std::span<const ValueSlot> slots, const Metric& metric) {
  switch (alg.kind) {
    case AlgorithmKind::Majority: return oracle_majority(slots, alg.epsilon, metric);
    case AlgorithmKind::Median: return oracle_median(slots, metric);
    case AlgorithmKind::Plurality: return oracle_plurality(slots, alg.epsilon, metric);
    case AlgorithmKind::WeightedAverage: return oracle_weighted(slots, alg.scaling_factor, metric);
  }
  return VoteOutcome::fail(ErrorCode::BadState);
}

}  // namespace vfarm
