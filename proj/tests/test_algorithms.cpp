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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vfarm/algorithms.hpp"

using namespace vfarm;

namespace {

std::vector<ValueSlot> scalars(std::initializer_list<std::optional<double>> xs) {
  std::vector<ValueSlot> out;
  std::uint32_t id = 1;
  for (const auto& x : xs) {
    out.push_back(x ? ValueSlot::of(VoteValue::scalar(*x), VoterId{id}) : ValueSlot::invalid(VoterId{id}));
    ++id;
  }
  return out;
}

double scalar_of(const VoteOutcome& o) {
  REQUIRE(o.ok());
  return o.value->numeric_view()->at(0);
}

}  // namespace

TEST_CASE("default metric") {
  const auto a = VoteValue::from_string("abc");
  CHECK(default_metric(a, VoteValue::from_string("abc")) == 0.0);
  CHECK(default_metric(a, VoteValue::from_string("abd")) == 1.0);

  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> x(3), y(3);
    for (auto& b : x) b = rng() % 3;
    for (auto& b : y) b = rng() % 3;
    const auto vx = VoteValue::from_bytes(x), vy = VoteValue::from_bytes(y);
    CHECK(default_metric(vx, vy) == default_metric(vy, vx));
    CHECK(euclidean_metric(vx, vy) == euclidean_metric(vy, vx));
  }
}

TEST_CASE("euclidean metric") {
  const double a[] = {0.0, 0.0}, b[] = {3.0, 4.0};
  CHECK(euclidean_metric(VoteValue::from_numeric(a), VoteValue::from_numeric(b)) == 5.0);
  CHECK(euclidean_metric(VoteValue::scalar(1), VoteValue::from_numeric(b)) == 1.0);
  CHECK(metric_by_name("euclidean"));
  CHECK(metric_by_name("discrete"));
  CHECK_FALSE(metric_by_name("manhattan"));
}

TEST_CASE("cluster") {
  SUBCASE("exact match classes") {
    const auto c = cluster(scalars({5, 5, 9}), 0.0, default_metric);
    REQUIRE(c.classes.size() == 2);
    CHECK(c.classes[0] == VoteClass{0, {0, 1}});
    CHECK(c.classes[1] == VoteClass{2, {2}});
  }
  SUBCASE("leader scan with epsilon") {
    const auto c = cluster(scalars({1.0, 1.4, 2.0}), 0.5, euclidean_metric);
    REQUIRE(c.classes.size() == 2);
    CHECK(c.classes[0] == VoteClass{0, {0, 1}});
    CHECK(c.classes[1] == VoteClass{2, {2}});
  }
  SUBCASE("all invalid") { CHECK(cluster(scalars({std::nullopt, std::nullopt}), 0.0, default_metric).classes.empty()); }
  SUBCASE("invalid slots appear in no class") {
    const auto c = cluster(scalars({1, std::nullopt, 1}), 0.0, default_metric);
    REQUIRE(c.classes.size() == 1);
    CHECK(c.classes[0].members == std::vector<std::size_t>{0, 2});
  }
}

TEST_CASE("majority") {
  CHECK(scalar_of(vote_majority(scalars({5, 5, 9}), 0.0, default_metric)) == 5);
  CHECK(vote_majority(scalars({5, std::nullopt, std::nullopt}), 0.0, default_metric).failure ==
        ErrorCode::NoMajority);
  CHECK(vote_majority(scalars({1, 1, 2, 2, std::nullopt}), 0.0, default_metric).failure == ErrorCode::NoMajority);
  CHECK(vote_majority(scalars({1, 1, 2, 2}), 0.0, default_metric).failure == ErrorCode::NoMajority);

  const auto o = vote_majority(scalars({9, 5, 5}), 0.0, default_metric);
  REQUIRE(o.winning_class);
  CHECK(o.winning_class->members == std::vector<std::size_t>{1, 2});
}

TEST_CASE("majority picks the central member of the class") {
  const auto o = vote_majority(scalars({1.0, 1.3, 1.2, 7.0}), 0.5, euclidean_metric);
  CHECK(scalar_of(o) == 1.2);
}

TEST_CASE("masking and failure bounds") {
  const auto good = VoteValue::from_string("good");
  for (std::size_t n = 1; n <= 7; ++n) {
    const std::size_t bound = (n - 1) / 2;
    for (std::size_t bad = 0; bad <= n; ++bad) {
      std::vector<ValueSlot> slots(n, ValueSlot::of(good));
      for (std::size_t i = 0; i < bad; ++i) slots[i] = ValueSlot::of(VoteValue::from_string("evil"));
      const auto o = vote_majority(slots, 0.0, default_metric);
      if (bad <= bound) {
        REQUIRE(o.ok());
        CHECK(byte_equal(*o.value, good));
      } else {
        CHECK_FALSE((o.ok() && byte_equal(*o.value, good)));
      }
    }
  }
}

TEST_CASE("median") {
  CHECK(scalar_of(vote_median(scalars({1, 2, 10}), euclidean_metric)) == 2);
  CHECK(scalar_of(vote_median(scalars({4}), euclidean_metric)) == 4);
  CHECK(scalar_of(vote_median(scalars({3, 3, 3, 3}), euclidean_metric)) == 3);
  CHECK(scalar_of(vote_median(scalars({8, 1}), euclidean_metric)) == 8);
  CHECK(vote_median(scalars({std::nullopt}), euclidean_metric).failure == ErrorCode::BadState);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 500; ++i) {
    std::vector<ValueSlot> slots;
    std::vector<double> xs;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) {
      if (rng() % 5 == 0) {
        slots.push_back(ValueSlot::invalid());
      } else {
        xs.push_back(u(rng));
        slots.push_back(ValueSlot::of(VoteValue::scalar(xs.back())));
      }
    }
    if (xs.empty()) continue;
    const double m = scalar_of(vote_median(slots, euclidean_metric));
    CHECK(m >= *std::min_element(xs.begin(), xs.end()));
    CHECK(m <= *std::max_element(xs.begin(), xs.end()));
  }
}

TEST_CASE("plurality") {
  CHECK(scalar_of(vote_plurality(scalars({1, 1, 2, 3, 3, 3}), 0.0, default_metric)) == 3);
  CHECK(scalar_of(vote_plurality(scalars({5, 9}), 0.0, default_metric)) == 5);
  CHECK(scalar_of(vote_plurality(scalars({5, 5, 9}), 0.0, default_metric)) == 5);
  CHECK(scalar_of(vote_plurality(scalars({std::nullopt, 2, 3}), 0.0, default_metric)) == 2);
  CHECK(vote_plurality(scalars({std::nullopt}), 0.0, default_metric).failure == ErrorCode::BadState);

  // Agrees with majority whenever majority succeeds.
  std::mt19937 rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<ValueSlot> slots;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) {
      const int x = static_cast<int>(rng() % 4);
      slots.push_back(x == 3 ? ValueSlot::invalid() : ValueSlot::of(VoteValue::scalar(x)));
    }
    const auto maj = vote_majority(slots, 0.0, default_metric);
    if (!maj.ok()) continue;
    const auto plu = vote_plurality(slots, 0.0, default_metric);
    REQUIRE(plu.ok());
    CHECK(byte_equal(*maj.value, *plu.value));
  }
}

TEST_CASE("weighted average") {
  CHECK(scalar_of(vote_weighted_average(scalars({2.0, 4.0}), 0.0, euclidean_metric)) == 3.0);
  CHECK(scalar_of(vote_weighted_average(scalars({1.0, 1.0, 1.0}), 3.7, euclidean_metric)) == 1.0);
  CHECK(scalar_of(vote_weighted_average(scalars({5.0, std::nullopt, 7.0}), 0.0, euclidean_metric)) == 6.0);

  // w = (0.1, 0.1, 1/19); output 9 * (1/19) / (0.2 + 1/19) = 9 / 4.8.
  const auto o = vote_weighted_average(scalars({0.0, 0.0, 9.0}), 1.0, euclidean_metric);
  CHECK(scalar_of(o) == doctest::Approx(1.875).epsilon(1e-14));
  REQUIRE(o.weights);
  CHECK((*o.weights)[0] == doctest::Approx(0.1 / (0.2 + 1.0 / 19)).epsilon(1e-14));

  SUBCASE("weights of invalid slots are 0 and the rest sum to 1") {
    const auto w = vote_weighted_average(scalars({1.0, std::nullopt, 3.0, 10.0}), 0.5, euclidean_metric);
    REQUIRE(w.weights);
    CHECK((*w.weights)[1] == 0.0);
    double sum = 0.0;
    for (double x : *w.weights) sum += x;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  SUBCASE("vectors") {
    const double a[] = {0.0, 2.0}, b[] = {2.0, 4.0};
    const auto v = vote_weighted_average({{ValueSlot::of(VoteValue::from_numeric(a)),
                                           ValueSlot::of(VoteValue::from_numeric(b))}},
                                         0.0, euclidean_metric);
    REQUIRE(v.ok());
    CHECK(*v.value->numeric_view() == std::vector<double>{1.0, 3.0});
  }
  SUBCASE("errors") {
    const double two[] = {1.0, 2.0};
    std::vector<ValueSlot> mixed{ValueSlot::of(VoteValue::scalar(1)), ValueSlot::of(VoteValue::from_numeric(two))};
    CHECK(vote_weighted_average(mixed, 1.0, euclidean_metric).failure == ErrorCode::BadState);
    CHECK(vote_weighted_average(scalars({std::nullopt}), 1.0, euclidean_metric).failure == ErrorCode::BadState);
    std::vector<ValueSlot> text{ValueSlot::of(VoteValue::from_string("x"))};
    CHECK(vote_weighted_average(text, 1.0, euclidean_metric).failure == ErrorCode::BadState);
    CHECK(vote_weighted_average(scalars({1.0}), -1.0, euclidean_metric).failure == ErrorCode::BadState);
  }
}

TEST_CASE("weighted average ignores payloads of invalid slots") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 300; ++i) {
    auto slots = scalars({u(rng), std::nullopt, u(rng), u(rng)});
    const auto before = vote_weighted_average(slots, 1.0, euclidean_metric);
    std::vector<std::uint8_t> junk(1 + rng() % 24);
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
    slots[1].value = VoteValue::from_bytes(junk);
    const auto after = vote_weighted_average(slots, 1.0, euclidean_metric);
    CHECK(scalar_of(after) == scalar_of(before));
  }
}

TEST_CASE("dispatch") {
  const auto slots = scalars({5, 5, 9});
  CHECK(scalar_of(vote(AlgorithmId{AlgorithmKind::Majority}, slots, default_metric)) == 5);
  CHECK(scalar_of(vote(AlgorithmId{AlgorithmKind::Median}, slots, euclidean_metric)) == 5);
  const AlgorithmId wa{AlgorithmKind::WeightedAverage, 0.0, 1.0};
  CHECK(scalar_of(vote(wa, slots, euclidean_metric)) ==
        scalar_of(vote_weighted_average(slots, 1.0, euclidean_metric)));
  CHECK(vote(AlgorithmId{static_cast<AlgorithmKind>(9)}, slots, default_metric).failure == ErrorCode::BadState);
}

TEST_CASE("determinism") {
  const auto slots = scalars({1, 2, 2, 1, std::nullopt, 3});
  for (auto kind : {AlgorithmKind::Majority, AlgorithmKind::Median, AlgorithmKind::Plurality,
                    AlgorithmKind::WeightedAverage}) {
    const AlgorithmId alg{kind, 0.0, 1.0};
    const auto a = vote(alg, slots, euclidean_metric), b = vote(alg, slots, euclidean_metric);
    CHECK(a.ok() == b.ok());
    CHECK(a.failure == b.failure);
    if (a.ok()) CHECK(byte_equal(*a.value, *b.value));
  }
}
