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


// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vfarm/harness.hpp"
#include "vfarm/serialize.hpp"

namespace {

using namespace vfarm;

constexpr Duration kDt{1000};

struct Verdict {
  bool passed = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0: no runtime limit
  std::function<Verdict()> check;
};

ExperimentSpec tmr_like(std::uint32_t n, std::size_t stages, VoteValue v) {
  ExperimentSpec s;
  for (std::size_t k = 0; k < stages; ++k) {
    StageSpec st;
    st.n = n;
    st.delta_t = kDt;
    s.pipeline.stages.push_back(st);
  }
  s.inputs.assign(n, std::move(v));
  return s;
}

FaultSpec fault(FaultKind kind, std::uint32_t target, std::uint32_t stage = 1) {
  FaultSpec f;
  f.kind = kind;
  f.target = target;
  f.stage = stage;
  return f;
}

bool live_voters_equal(const StageReport& st, const VoteValue& v) {
  return std::all_of(st.voters.begin(), st.voters.end(), [&](const VoterReport& r) {
    return !r.live || (r.completed && r.outcome.ok() && byte_equal(*r.outcome.value, v));
  });
}

/// Every k-subset of {1..n}.
std::vector<std::vector<std::uint32_t>> subsets(std::uint32_t n, std::uint32_t k) {
  std::vector<std::vector<std::uint32_t>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::uint32_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<std::uint32_t> s;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(i + 1);
    }
    out.push_back(s);
  }
  return out;
}

// 1. Up to floor((N-1)/2) faults of any mix of kinds are masked. Corruptions and user
// crashes hit stage 2 inputs; voter crashes hit stage 1 and surface in stage 2.
Verdict masking_bound() {
  const auto correct = VoteValue::from_string("correct value");
  const FaultKind kinds[] = {FaultKind::CorruptInput, FaultKind::CrashUser, FaultKind::CrashVoter};
  std::size_t cases = 0;
  std::ostringstream bad;
  for (std::uint32_t n : {3u, 5u}) {
    const std::uint32_t m = (n - 1) / 2;
    for (const auto& positions : subsets(n, m)) {
      std::size_t combos = 1;
      for (std::uint32_t i = 0; i < m; ++i) combos *= 3;
      for (std::size_t c = 0; c < combos; ++c) {
        for (bool equal_corruption : {false, true}) {
          auto s = tmr_like(n, 2, correct);
          s.seed = cases;
          std::size_t code = c;
          for (auto pos : positions) {
            const auto kind = kinds[code % 3];
            code /= 3;
            auto f = fault(kind, pos, kind == FaultKind::CrashVoter ? 1 : 2);
            if (kind == FaultKind::CorruptInput && equal_corruption) f.pattern = {0x5a};
            s.faults.push_back(f);
          }
          ++cases;
          const auto r = run_pipeline(s);
          for (const auto& st : r.repetitions[0].stages) {
            if (!live_voters_equal(st, correct)) bad << "N=" << n << " case " << cases << " stage " << st.stage << "; ";
          }
        }
      }
    }
  }
  if (!bad.str().empty()) return {false, bad.str()};
  return {true, std::to_string(cases) + " fault assignments (N=3, N=5), every live voter exact"};
}

// 2. Beyond the bound: distinct corruptions give NO_MAJORITY, equal ones a wrong value.
Verdict failure_beyond_bound() {
  const auto correct = VoteValue::scalar(42);
  auto run = [&](std::vector<std::uint8_t> p1, std::vector<std::uint8_t> p2) {
    auto s = tmr_like(3, 1, correct);
    auto f1 = fault(FaultKind::CorruptInput, 1), f2 = fault(FaultKind::CorruptInput, 2);
    f1.pattern = std::move(p1);
    f2.pattern = std::move(p2);
    s.faults = {f1, f2};
    return run_experiment(s).repetitions[0].stages[0];
  };
  const auto distinct = run({0x01}, {0x02});
  const bool no_majority = std::all_of(distinct.voters.begin(), distinct.voters.end(), [](const VoterReport& v) {
    return v.outcome.failure == ErrorCode::NoMajority;
  });
  const auto equal = run({0x10}, {0x10});
  const auto wrong = correct.corrupted(std::vector<std::uint8_t>{0x10});
  const bool wrong_value = live_voters_equal(equal, wrong) && !byte_equal(wrong, correct);
  std::string detail = std::string("distinct corruptions: ") + (no_majority ? "NO_MAJORITY on all voters" : "not NO_MAJORITY") +
                       "; equal corruptions: " + (wrong_value ? "wrong value on all voters" : "no wrong value");
  return {no_majority && wrong_value, detail};
}

// 3. Exact M * delta t cost in virtual time.
Verdict timeout_cost() {
  const auto base = run_experiment(tmr_like(4, 1, VoteValue::scalar(1))).repetitions[0].stages[0].duration;
  std::ostringstream detail, bad;
  detail << "fault-free " << base.count() << " us";
  for (std::uint32_t m = 1; m <= 3; ++m) {
    std::size_t count = 0;
    for (const auto& crashed : subsets(4, m)) {
      auto s = tmr_like(4, 1, VoteValue::scalar(1));
      for (auto u : crashed) s.faults.push_back(fault(FaultKind::CrashUser, u));
      const auto d = run_experiment(s).repetitions[0].stages[0].duration;
      if (d != base + m * kDt) bad << "M=" << m << " got " << d.count() << " us; ";
      ++count;
    }
    detail << ", M=" << m << ": " << count << " subsets = +" << m << "dt";
  }
  if (!bad.str().empty()) return {false, bad.str()};
  return {true, detail.str()};
}

// 4. Each single stage-1 voter crash is restored by stage 2.
Verdict pipeline_restoration() {
  const auto v = VoteValue::scalar(3.5);
  const auto reference = run_pipeline(tmr_like(3, 2, v)).repetitions[0].stages[1];
  if (!live_voters_equal(reference, v)) return {false, "fault-free pipeline did not produce the input"};
  std::ostringstream bad;
  for (std::uint32_t pos = 1; pos <= 3; ++pos) {
    auto s = tmr_like(3, 2, v);
    s.faults.push_back(fault(FaultKind::CrashVoter, pos));
    const auto st2 = run_pipeline(s).repetitions[0].stages[1];
    for (std::size_t i = 0; i < st2.voters.size(); ++i) {
      const auto& vr = st2.voters[i];
      if (!vr.live || !vr.completed || !same_outcome(vr.outcome, reference.voters[i].outcome)) {
        bad << "crash " << pos << " stage-2 voter " << vr.voter << "; ";
      }
    }
    if (st2.voters.size() != 3) bad << "crash " << pos << ": " << st2.voters.size() << " stage-2 voters; ";
  }
  if (!bad.str().empty()) return {false, bad.str()};
  return {true, "3 crash positions, all 3 stage-2 outputs equal the fault-free value"};
}

// 5. Link census.
Verdict census() {
  std::ostringstream bad, detail;
  for (std::uint32_t n = 1; n <= 6; ++n) {
    const auto c = census_check(n);
    const auto st = run_experiment(tmr_like(n, 1, VoteValue::scalar(0))).repetitions[0].stages[0];
    const auto want = n * (n - 1) / 2;
    if (!c.passed) bad << "bare N=" << n << ": " << c.detail << "; ";
    if (st.census.virtual_links != want || st.census.local_links != n || st.census.voters != n) {
      bad << "experiment N=" << n << "; ";
    }
    detail << (n > 1 ? ", " : "") << "N=" << n << ":" << c.census.virtual_links << "/" << c.census.local_links << "/"
           << c.census.voters;
  }
  if (!bad.str().empty()) return {false, bad.str()};
  return {true, "virtual/local/voters " + detail.str()};
}

// 6. Oracle equivalence.
Verdict oracle_equivalence() {
  std::ostringstream detail;
  bool ok = true;
  for (const auto& a : selftest(1, 1000)) {
    if (a.name == "census") continue;
    ok = ok && a.passed;
    detail << (detail.tellp() > 0 ? "; " : "") << a.name << ": " << a.detail;
  }
  return {ok, detail.str()};
}

// 7. Weighted-average properties.
Verdict weighted_average() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  double worst = 0.0;
  std::size_t changed = 0;
  const int instances = 2000;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng() % 7, dim = 1 + rng() % 4;
    std::vector<ValueSlot> slots;
    std::vector<double> sum(dim, 0.0);
    std::size_t valid = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0 && rng() % 4 == 0) {
        slots.push_back(ValueSlot::invalid());
        continue;
      }
      std::vector<double> x(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        x[d] = u(rng);
        sum[d] += x[d];
      }
      ++valid;
      slots.push_back(ValueSlot::of(VoteValue::from_numeric(x)));
    }
    const auto mean = vote_weighted_average(slots, 0.0, euclidean_metric);
    if (!mean.ok()) return {false, "s=0 vote failed"};
    const auto got = *mean.value->numeric_view();
    for (std::size_t d = 0; d < dim; ++d) worst = std::max(worst, std::abs(got[d] - sum[d] / static_cast<double>(valid)));

    const double s = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const auto before = vote_weighted_average(slots, s, euclidean_metric);
    for (auto& slot : slots) {
      if (slot.valid) continue;
      std::vector<std::uint8_t> junk(1 + rng() % 40);
      for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
      slot.value = VoteValue::from_bytes(junk);
    }
    const auto after = vote_weighted_average(slots, s, euclidean_metric);
    if (!before.ok() || !after.ok() || !byte_equal(*before.value, *after.value)) ++changed;
  }
  std::ostringstream detail;
  detail << instances << " instances: max |s=0 output - mean| = " << worst << " (limit 1e-12), outputs changed by junk in "
         << "invalid slots: " << changed;
  return {worst <= 1e-12 && changed == 0, detail.str()};
}

// 8. Wall-clock overhead grows with N.
Verdict overhead_scaling() {
  BenchOptions o;
  o.n_min = 1;
  o.n_max = 4;
  o.repetitions = 50;
  const auto rows = bench(o);
  std::ostringstream detail;
  detail.precision(3);
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail << (i ? ", " : "") << "N=" << rows[i].n << " " << rows[i].mean_s << "s";
    if (i > 0 && rows[i].mean_s < rows[i - 1].mean_s) monotone = false;
  }
  const double ratio = rows.back().mean_s / rows.front().mean_s;
  detail << "; N=4/N=1 = " << ratio << " (limit > 1.5)" << (monotone ? "" : "; not monotone");
  return {rows.size() == 4 && monotone && ratio > 1.5, detail.str()};
}

// 9. A user module's traffic per round does not depend on N.
Verdict replication_transparency() {
  std::optional<std::uint64_t> per_round;
  std::ostringstream bad;
  for (std::uint32_t n = 1; n <= 6; ++n) {
    const auto st = run_experiment(tmr_like(n, 1, VoteValue::scalar(9))).repetitions[0].stages[0];
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto issued = st.client_round_messages[i];
      if (!per_round) per_round = issued;
      if (issued != *per_round) bad << "N=" << n << " user " << i + 1 << " issued " << issued << "; ";
      // Frames on the link: the round's requests plus CLOSE.
      if (st.client_messages[i] != issued + 1) bad << "N=" << n << " user " << i + 1 << " link frames differ; ";
    }
  }
  if (!bad.str().empty()) return {false, bad.str()};
  return {true, std::to_string(*per_round) + " client-to-voter messages per round for every N in 1..6"};
}

// 10. Virtual-clock reports are byte-identical across runs.
Verdict determinism() {
  std::vector<ExperimentSpec> specs;
  specs.push_back(tmr_like(3, 1, VoteValue::scalar(1)));
  auto corrupt = tmr_like(5, 1, VoteValue::from_string("abc"));
  corrupt.faults = {fault(FaultKind::CorruptInput, 2), fault(FaultKind::CorruptInput, 4)};
  corrupt.seed = 77;
  corrupt.repetitions = 3;
  specs.push_back(corrupt);
  auto pipe = tmr_like(4, 3, VoteValue::scalar(2.5));
  auto drop = fault(FaultKind::DropMessage, 1, 2);
  drop.index = 1;
  auto delay = fault(FaultKind::DelayMessage, 3, 3);
  delay.delay = Duration(700);
  pipe.faults = {fault(FaultKind::CrashVoter, 2), drop, delay, fault(FaultKind::CrashUser, 4, 3)};
  pipe.pipeline.stages[1].algorithm.kind = AlgorithmKind::WeightedAverage;
  pipe.metric = "euclidean";
  specs.push_back(pipe);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto a = report_json_text(run_experiment(specs[i]));
    const auto b = report_json_text(run_experiment(specs[i]));
    if (a != b) return {false, "spec " + std::to_string(i + 1) + " differs between runs"};
  }
  return {true, std::to_string(specs.size()) + " specs, two runs each, byte-identical JSON"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "masking bound", 10.0, masking_bound},
      {2, "failure beyond the bound", 0.0, failure_beyond_bound},
      {3, "timeout cost M*dt", 0.0, timeout_cost},
      {4, "pipeline restoration", 0.0, pipeline_restoration},
      {5, "resource census", 0.0, census},
      {6, "oracle equivalence", 30.0, oracle_equivalence},
      {7, "weighted average", 0.0, weighted_average},
      {8, "overhead scaling", 60.0, overhead_scaling},
      {9, "replication transparency", 0.0, replication_transparency},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      v.passed = false;
      v.detail += "; over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget";
    }
    failed += v.passed ? 0 : 1;
    std::printf("%s %2d %s: %s (%.2f s)\n", v.passed ? "PASS" : "FAIL", c.id, c.name.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%s: %d of %zu criteria passed\n", failed ? "FAIL" : "PASS", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed ? 1 : 0;
}
