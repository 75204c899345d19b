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

#include <cmath>

#include "vfarm/harness.hpp"
#include "vfarm/serialize.hpp"

using namespace vfarm;

namespace {

constexpr Duration kDt{1000};

ExperimentSpec spec(std::uint32_t n, std::size_t stages = 1, VoteValue v = VoteValue::scalar(42)) {
  ExperimentSpec s;
  for (std::size_t k = 0; k < stages; ++k) {
    StageSpec st;
    st.n = n;
    st.delta_t = kDt;
    s.pipeline.stages.push_back(st);
  }
  s.inputs.assign(n, v);
  return s;
}

FaultSpec fault(FaultKind kind, std::uint32_t target, std::uint32_t stage = 1) {
  FaultSpec f;
  f.kind = kind;
  f.target = target;
  f.stage = stage;
  return f;
}

const Assertion* find(const Report& r, std::string_view name) {
  for (const auto& a : r.assertions) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const StageReport& stage(const Report& r, std::size_t k) { return r.repetitions.at(0).stages.at(k - 1); }

bool all_live_equal(const StageReport& st, const VoteValue& v) {
  for (const auto& vr : st.voters) {
    if (vr.live && !(vr.outcome.ok() && byte_equal(*vr.outcome.value, v))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("TMR fault-free") {
  const auto r = run_experiment(spec(3));
  const auto& st = stage(r, 1);
  CHECK(all_live_equal(st, VoteValue::scalar(42)));
  for (const auto& vr : st.voters) {
    CHECK(vr.invalid_slots == 0);
    CHECK(vr.timeouts == 0);
    CHECK(vr.completed);
  }
  CHECK(st.agreement);
  CHECK(st.matches_reference);
  CHECK(st.duration == Duration(1));
  CHECK(st.census_ok);
  REQUIRE(find(r, "fault_free_agreement"));
  CHECK(find(r, "fault_free_agreement")->passed);
  CHECK(r.passed());
}

TEST_CASE("TMR masks a corrupted input") {
  auto s = spec(3);
  s.faults.push_back(fault(FaultKind::CorruptInput, 2));
  s.seed = 1;
  const auto r = run_experiment(s);
  CHECK(all_live_equal(stage(r, 1), VoteValue::scalar(42)));
  REQUIRE(find(r, "masking"));
  CHECK(find(r, "masking")->passed);
}

TEST_CASE("random corruption depends on the seed only") {
  auto s = spec(3);
  s.faults.push_back(fault(FaultKind::CorruptInput, 1));
  s.faults.push_back(fault(FaultKind::CorruptInput, 2));
  s.seed = 5;
  const auto a = run_experiment(s), b = run_experiment(s);
  CHECK(report_json_text(a) == report_json_text(b));
  CHECK(stage(a, 1).voters[0].outcome.failure == ErrorCode::NoMajority);
  s.seed = 6;
  CHECK(report_json_text(run_experiment(s)) != report_json_text(a));
}

TEST_CASE("crashed users cost exactly M delta t") {
  for (std::uint32_t n = 2; n <= 5; ++n) {
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
      auto s = spec(n);
      std::uint32_t m = 0;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          s.faults.push_back(fault(FaultKind::CrashUser, i + 1));
          ++m;
        }
      }
      const auto r = run_experiment(s);
      const auto& st = stage(r, 1);
      CAPTURE(n);
      CAPTURE(mask);
      CHECK(st.duration == Duration(1) + m * kDt);
      CHECK(st.agreement);
      for (const auto& vr : st.voters) CHECK(vr.invalid_slots == m);
    }
  }
}

TEST_CASE("pipelines") {
  SUBCASE("fault-free stage 2 repeats stage 1") {
    const auto r = run_pipeline(spec(3, 2));
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(same_outcome(stage(r, 1).voters[v].outcome, stage(r, 2).voters[v].outcome));
    }
    CHECK(all_live_equal(stage(r, 2), VoteValue::scalar(42)));
    CHECK(r.passed());
  }
  SUBCASE("a crashed stage-1 voter is restored by stage 2") {
    for (std::uint32_t target = 1; target <= 3; ++target) {
      auto s = spec(3, 2);
      s.faults.push_back(fault(FaultKind::CrashVoter, target));
      const auto r = run_pipeline(s);
      CHECK_FALSE(stage(r, 1).voters[target - 1].live);
      CHECK(all_live_equal(stage(r, 2), VoteValue::scalar(42)));
      CHECK(stage(r, 2).voters.size() == 3);
      REQUIRE(find(r, "masking"));
      CHECK(find(r, "masking")->passed);
    }
  }
  SUBCASE("two crashed stage-1 voters defeat stage 2") {
    for (std::uint32_t a = 1; a <= 3; ++a) {
      for (std::uint32_t b = a + 1; b <= 3; ++b) {
        auto s = spec(3, 2);
        s.faults.push_back(fault(FaultKind::CrashVoter, a));
        s.faults.push_back(fault(FaultKind::CrashVoter, b));
        const auto r = run_pipeline(s);
        CHECK_FALSE(all_live_equal(stage(r, 2), VoteValue::scalar(42)));
        CHECK_FALSE(find(r, "masking"));
      }
    }
  }
  SUBCASE("three stages") {
    auto s = spec(5, 3);
    s.faults.push_back(fault(FaultKind::CrashVoter, 2, 1));
    s.faults.push_back(fault(FaultKind::CorruptInput, 4, 2));
    const auto r = run_pipeline(s);
    CHECK(all_live_equal(stage(r, 3), VoteValue::scalar(42)));
  }
  SUBCASE("a single stage is not a pipeline") { CHECK_THROWS_AS(run_pipeline(spec(3)), SpecError); }
}

TEST_CASE("farm output is stage-local in the census") {
  const auto r = run_pipeline(spec(4, 2));
  for (const auto& st : r.repetitions[0].stages) {
    CHECK(st.census.virtual_links == 6);
    CHECK(st.census.local_links == 4);
    CHECK(st.census.voters == 4);
  }
}

TEST_CASE("message faults") {
  SUBCASE("a dropped broadcast becomes a timeout at one fellow") {
    auto s = spec(3);
    auto f = fault(FaultKind::DropMessage, 1);
    f.index = 0;
    s.faults.push_back(f);
    const auto r = run_experiment(s);
    const auto& st = stage(r, 1);
    CHECK(st.voters[1].timeouts == 1);
    CHECK(st.voters[1].invalid_slots == 1);
    CHECK(all_live_equal(st, VoteValue::scalar(42)));
    CHECK_FALSE(find(r, "masking"));
  }
  SUBCASE("a short delay only slows the round") {
    auto s = spec(3);
    auto f = fault(FaultKind::DelayMessage, 3);
    f.delay = Duration(200);
    s.faults.push_back(f);
    const auto r = run_experiment(s);
    CHECK(stage(r, 1).duration == Duration(201));
    CHECK(stage(r, 1).agreement);
  }
}

TEST_CASE("client traffic per round is independent of N") {
  std::optional<std::uint64_t> expected;
  for (std::uint32_t n = 1; n <= 6; ++n) {
    const auto r = run_experiment(spec(n));
    for (auto c : stage(r, 1).client_round_messages) {
      if (!expected) expected = c;
      CHECK(c == *expected);
    }
  }
}

TEST_CASE("repetitions and aggregates") {
  auto s = spec(3);
  s.repetitions = 4;
  s.faults.push_back(fault(FaultKind::CrashUser, 2));
  const auto r = run_experiment(s);
  REQUIRE(r.repetitions.size() == 4);
  REQUIRE(r.aggregate.size() == 1);
  CHECK(r.aggregate[0].samples == 4);
  CHECK(r.aggregate[0].mean_s == doctest::Approx(1001e-6));
  CHECK(r.aggregate[0].stddev_s == 0.0);
}

TEST_CASE("real clock runs") {
  auto s = spec(3);
  s.clock = ClockMode::Real;
  s.pipeline.stages[0].delta_t = Duration(std::chrono::milliseconds(200));
  const auto r = run_experiment(s);
  CHECK(all_live_equal(stage(r, 1), VoteValue::scalar(42)));
  CHECK(r.passed());
}

TEST_CASE("validation lists every issue") {
  auto s = spec(3);
  s.pipeline.stages[0].n = 0;
  s.pipeline.stages[0].delta_t = Duration(0);
  s.pipeline.stages[0].algorithm.epsilon = -1;
  s.metric = "taxicab";
  s.repetitions = 0;
  s.faults.push_back(fault(FaultKind::CrashUser, 9));
  const auto issues = validation_issues(s);
  CHECK(issues.size() >= 6);
  CHECK_THROWS_AS(validate(s), SpecError);
  CHECK_THROWS_AS(run_experiment(s), SpecError);

  CHECK(validation_issues(spec(3)).empty());
  auto mismatched = spec(3, 2);
  mismatched.pipeline.stages[1].n = 5;
  CHECK_FALSE(validation_issues(mismatched).empty());
  auto inputs = spec(3);
  inputs.inputs.pop_back();
  CHECK_FALSE(validation_issues(inputs).empty());
}

TEST_CASE("duplicate nodes are legal but warned about") {
  auto s = spec(3);
  s.pipeline.stages[0].nodes = {NodeId{1}, NodeId{1}, NodeId{2}};
  CHECK(validation_issues(s).empty());
  CHECK_FALSE(spec_warnings(s).empty());
  const auto r = run_experiment(s);
  CHECK_FALSE(r.warnings.empty());
  CHECK(stage(r, 1).census.local_links == 4);
  CHECK(stage(r, 1).census.virtual_links == 2);
  CHECK(stage(r, 1).census_ok);
  CHECK(r.passed());
}

TEST_CASE("mean and sample standard deviation") {
  const double one[] = {3.0};
  CHECK(mean_stddev(one) == std::pair(3.0, 0.0));
  const double xs[] = {1.0, 2.0, 3.0, 4.0};
  const auto [m, sd] = mean_stddev(xs);
  CHECK(m == 2.5);
  CHECK(sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("oracle") {
  std::vector<ValueSlot> slots;
  for (double x : {5.0, 5.0, 9.0}) slots.push_back(ValueSlot::of(VoteValue::scalar(x)));
  CHECK(oracle_vote(AlgorithmId{AlgorithmKind::Majority}, slots, default_metric).value == VoteValue::scalar(5));
  slots.clear();
  for (double x : {1.0, 2.0, 10.0}) slots.push_back(ValueSlot::of(VoteValue::scalar(x)));
  CHECK(oracle_vote(AlgorithmId{AlgorithmKind::Median}, slots, euclidean_metric).value == VoteValue::scalar(2));
  slots = {ValueSlot::of(VoteValue::scalar(0)), ValueSlot::of(VoteValue::scalar(0)), ValueSlot::of(VoteValue::scalar(9))};
  const auto wa = oracle_vote(AlgorithmId{AlgorithmKind::WeightedAverage, 0, 1}, slots, euclidean_metric);
  CHECK(wa.value->numeric_view()->at(0) == doctest::Approx(1.875).epsilon(1e-14));
  CHECK(oracle_vote(AlgorithmId{AlgorithmKind::Plurality}, std::vector<ValueSlot>{ValueSlot::invalid()}, default_metric)
            .failure == ErrorCode::BadState);
}

TEST_CASE("selftest suites pass") {
  const auto results = selftest(1, 1000);
  REQUIRE(results.size() >= 3);
  for (const auto& a : results) {
    CAPTURE(a.name);
    CAPTURE(a.detail);
    CHECK(a.passed);
  }
}

TEST_CASE("census check") {
  for (std::uint32_t n = 1; n <= 6; ++n) CHECK(census_check(n).passed);
  CHECK(census_check(4).census.virtual_links == 6);
  const auto bad = census_check(Census{2, 3, 6, 3}, 3);
  CHECK_FALSE(bad.passed);
  CHECK_FALSE(bad.detail.empty());
}

TEST_CASE("outcome hashes") {
  const auto a = outcome_hash(VoteOutcome::success(VoteValue::scalar(1)));
  CHECK(a == outcome_hash(VoteOutcome::success(VoteValue::scalar(1))));
  CHECK(a != outcome_hash(VoteOutcome::success(VoteValue::scalar(2))));
  CHECK(outcome_hash(VoteOutcome::fail(ErrorCode::NoMajority)) != outcome_hash(VoteOutcome::fail(ErrorCode::BadState)));
  CHECK(same_outcome(VoteOutcome::fail(ErrorCode::NoMajority), VoteOutcome::fail(ErrorCode::NoMajority)));
  CHECK_FALSE(same_outcome(VoteOutcome::fail(ErrorCode::NoMajority), VoteOutcome::success(VoteValue::scalar(1))));
}

TEST_CASE("bench") {
  BenchOptions o;
  o.n_min = 1;
  o.n_max = 3;
  o.repetitions = 3;
  o.delta_t = std::chrono::milliseconds(500);
  const auto rows = bench(o);
  REQUIRE(rows.size() == 3);
  for (std::uint32_t i = 0; i < 3; ++i) {
    CHECK(rows[i].n == i + 1);
    CHECK(rows[i].samples == 3);
    CHECK(rows[i].mean_s > 0.0);
  }
  o.repetitions = 1;
  o.n_max = 1;
  const auto single = bench(o);
  REQUIRE(single.size() == 1);
  CHECK(single[0].stddev_s == 0.0);
  o.include_warmup = true;
  o.repetitions = 2;
  CHECK(bench(o)[0].samples == 2);
}
