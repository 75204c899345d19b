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

#include "vfarm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vfarm/client.hpp"
#include "vfarm/runtime.hpp"

namespace vfarm {

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::CrashUser: return "crash_user";
    case FaultKind::CrashVoter: return "crash_voter";
    case FaultKind::CorruptInput: return "corrupt_input";
    case FaultKind::DropMessage: return "drop_message";
    case FaultKind::DelayMessage: return "delay_message";
  }
  return "unknown";
}

std::optional<FaultKind> parse_fault_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return c == '-' ? '_' : std::tolower(c); });
  for (auto k : {FaultKind::CrashUser, FaultKind::CrashVoter, FaultKind::CorruptInput, FaultKind::DropMessage,
                 FaultKind::DelayMessage}) {
    if (s == to_string(k)) return k;
  }
  if (s == "corrupt") return FaultKind::CorruptInput;
  if (s == "drop") return FaultKind::DropMessage;
  if (s == "delay") return FaultKind::DelayMessage;
  return std::nullopt;
}

std::string_view to_string(ClockMode c) { return c == ClockMode::Virtual ? "virtual" : "real"; }

std::optional<ClockMode> parse_clock_mode(std::string_view name) {
  if (name == "virtual" || name == "VIRTUAL") return ClockMode::Virtual;
  if (name == "real" || name == "REAL") return ClockMode::Real;
  return std::nullopt;
}

std::vector<NodeId> StageSpec::placement() const {
  if (!nodes.empty()) return nodes;
  std::vector<NodeId> out;
  for (std::uint32_t i = 1; i <= n; ++i) out.push_back(NodeId{i});
  return out;
}

namespace {

std::string join(const std::vector<std::string>& issues) {
  std::string out = "invalid experiment spec";
  for (const auto& i : issues) out += "\n  - " + i;
  return out;
}

}  // namespace

SpecError::SpecError(std::vector<std::string> issues) : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

std::vector<std::string> validation_issues(const ExperimentSpec& spec) {
  std::vector<std::string> out;
  const auto& stages = spec.pipeline.stages;
  if (stages.empty()) out.push_back("pipeline needs at least one stage");
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto& st = stages[k];
    const auto where = "stage " + std::to_string(k + 1) + ": ";
    if (st.n == 0) out.push_back(where + "n must be >= 1");
    if (st.n != stages.front().n) out.push_back(where + "all stages must have the same n");
    if (st.delta_t <= Duration::zero()) out.push_back(where + "delta_t must be > 0");
    if (!(st.algorithm.epsilon >= 0.0)) out.push_back(where + "epsilon must be >= 0");
    if (!(st.algorithm.scaling_factor >= 0.0)) out.push_back(where + "scaling factor must be >= 0");
    if (!st.nodes.empty() && st.nodes.size() != st.n) out.push_back(where + "nodes must list exactly n entries");
    for (auto node : st.nodes) {
      if (!node.valid()) out.push_back(where + "node ids must be > 0");
    }
    if (k > 0 && st.placement() != stages.front().placement()) {
      out.push_back(where + "all stages must share one placement");
    }
  }
  if (!metric_by_name(spec.metric)) out.push_back("unknown metric '" + spec.metric + "'");
  if (!stages.empty() && spec.inputs.size() != stages.front().n) {
    out.push_back("inputs: expected " + std::to_string(stages.front().n) + " values, got " +
                  std::to_string(spec.inputs.size()));
  }
  if (spec.repetitions == 0) out.push_back("repetitions must be >= 1");
  if (spec.local_latency < Duration::zero() || spec.virtual_latency < Duration::zero()) {
    out.push_back("latencies must be >= 0");
  }
  for (std::size_t f = 0; f < spec.faults.size(); ++f) {
    const auto& fault = spec.faults[f];
    const auto where = "fault " + std::to_string(f + 1) + " (" + std::string(to_string(fault.kind)) + "): ";
    if (fault.stage == 0 || fault.stage > stages.size()) out.push_back(where + "stage out of range");
    if (!stages.empty() && (fault.target == 0 || fault.target > stages.front().n)) {
      out.push_back(where + "target out of range");
    }
    if (fault.kind == FaultKind::DelayMessage && fault.delay <= Duration::zero()) {
      out.push_back(where + "delay must be > 0");
    }
  }
  return out;
}

void validate(const ExperimentSpec& spec) {
  auto issues = validation_issues(spec);
  if (!issues.empty()) throw SpecError(std::move(issues));
}

std::vector<std::string> spec_warnings(const ExperimentSpec& spec) {
  std::vector<std::string> out;
  if (spec.pipeline.stages.empty()) return out;
  FarmDescriptor d;
  d.nodes = spec.pipeline.stages.front().placement();
  for (auto node : d.duplicate_nodes()) {
    out.push_back("node " + std::to_string(node.value) + " hosts more than one voter");
  }
  return out;
}

bool Report::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

std::pair<double, double> mean_stddev(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

bool same_outcome(const VoteOutcome& a, const VoteOutcome& b) {
  if (a.ok() != b.ok()) return false;
  return a.ok() ? byte_equal(*a.value, *b.value) : a.failure == b.failure;
}

std::uint64_t outcome_hash(const VoteOutcome& o) {
  const std::string text = o.ok() ? "value:" + to_hex(o.value->bytes()) : "failure:" + std::string(to_string(o.failure));
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

CensusCheck census_check(const Census& census, std::span<const NodeId> placement) {
  const std::size_t n = placement.size();
  std::size_t shared = 0;  // voter pairs on one node get a local link
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) shared += placement[i] == placement[j] ? 1 : 0;
  }
  CensusCheck out;
  out.census = census;
  const std::size_t want_virtual = n * (n - (n > 0 ? 1 : 0)) / 2 - shared;
  const std::size_t want_local = n + shared;
  std::ostringstream detail;
  if (census.virtual_links != want_virtual) {
    detail << "virtual links " << census.virtual_links << " != " << want_virtual << "; ";
  }
  if (census.local_links != want_local) detail << "local links " << census.local_links << " != " << want_local << "; ";
  if (census.voters != n) detail << "voters " << census.voters << " != " << n << "; ";
  out.detail = detail.str();
  out.passed = out.detail.empty();
  if (out.passed) {
    out.detail = "virtual " + std::to_string(census.virtual_links) + ", local " + std::to_string(census.local_links) +
                 ", voters " + std::to_string(census.voters);
  }
  return out;
}

CensusCheck census_check(const Census& census, std::uint32_t n) {
  std::vector<NodeId> distinct;
  for (std::uint32_t i = 1; i <= n; ++i) distinct.push_back(NodeId{i});
  return census_check(census, distinct);
}

CensusCheck census_check(std::uint32_t n) {
  VirtualRuntime rt;
  FarmDescriptor d;
  for (std::uint32_t i = 1; i <= n; ++i) d = descriptor_add(d, NodeId{i}).value();
  auto farm = spawn_farm(d, default_metric, Duration(1000), rt);
  if (!farm) {
    CensusCheck out;
    out.detail = "spawn failed: " + std::string(to_string(farm.error()));
    return out;
  }
  return census_check(farm->census(rt.fabric()), n);
}

namespace {

/// Fault-free expectation for every stage.
std::vector<VoteOutcome> references(const ExperimentSpec& spec, const Metric& metric) {
  std::vector<VoteOutcome> out;
  std::vector<ValueSlot> slots;
  for (const auto& v : spec.inputs) slots.push_back(ValueSlot::of(v));
  for (const auto& st : spec.pipeline.stages) {
    out.push_back(oracle_vote(st.algorithm, slots, metric));
    const auto& ref = out.back();
    for (auto& s : slots) s = ref.ok() ? ValueSlot::of(*ref.value) : ValueSlot::invalid();
  }
  return out;
}

bool has_fault(const ExperimentSpec& spec, FaultKind kind, std::uint32_t stage, std::uint32_t target) {
  return std::any_of(spec.faults.begin(), spec.faults.end(), [&](const FaultSpec& f) {
    return f.kind == kind && f.stage == stage && f.target == target;
  });
}

std::vector<std::uint8_t> random_pattern(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(1, 255);
  std::vector<std::uint8_t> out(8);
  for (auto& b : out) b = static_cast<std::uint8_t>(byte(rng));
  return out;
}

std::unique_ptr<Runtime> make_runtime(const ExperimentSpec& spec) {
  if (spec.clock == ClockMode::Virtual) {
    return std::make_unique<VirtualRuntime>(FabricOptions{spec.local_latency, spec.virtual_latency, false});
  }
  return std::make_unique<ThreadedRuntime>(FabricOptions{Duration(0), Duration(0), spec.synchronous_voter_links});
}

class Repetition {
 public:
  Repetition(const ExperimentSpec& spec, std::uint32_t index, const Metric& metric,
             const std::vector<VoteOutcome>& refs)
      : spec_(spec), index_(index), metric_(metric), refs_(refs), runtime_(make_runtime(spec)) {
    std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(index)};
    rng_.seed(seq);
  }

  ~Repetition() { runtime_->shutdown(); }

  RepetitionReport run() {
    const auto s_count = spec_.pipeline.stages.size();
    n_ = spec_.pipeline.stages.front().n;
    for (const auto& f : spec_.faults) {
      patterns_.push_back(f.kind == FaultKind::CorruptInput && f.pattern.empty() ? random_pattern(rng_) : f.pattern);
    }

    for (std::size_t k = 0; k < s_count; ++k) activate_stage(k);
    wire_outputs();
    install_faults();

    RepetitionReport rep;
    rep.index = index_;
    for (std::size_t k = 0; k < s_count; ++k) rep.stages.push_back(run_stage(k));
    return rep;
  }

 private:
  struct StageState {
    std::unique_ptr<Partition> partition;
    std::vector<FarmHandle> handles;
    const Farm* farm = nullptr;
    std::vector<std::optional<LinkId>> upstream;  // consumer link from the previous stage
  };

  const StageSpec& stage_spec(std::size_t k) const { return spec_.pipeline.stages[k]; }

  void activate_stage(std::size_t k) {
    const auto& st = stage_spec(k);
    auto& state = stages_.emplace_back();
    Partition::Options opts;
    opts.delta_t = st.delta_t;
    opts.algorithm = st.algorithm;
    opts.reply_timeout = 4 * st.delta_t;
    state.partition = std::make_unique<Partition>(*runtime_, opts);
    for (std::uint32_t r = 1; r <= n_; ++r) {
      auto h = FarmHandle::open(*state.partition, r, metric_, spec_.metric);
      for (auto node : st.placement()) h.add(node);
      if (h.run() != ErrorCode::None) {
        throw std::runtime_error("stage " + std::to_string(k + 1) + " rank " + std::to_string(r) +
                                 ": run failed: " + std::string(to_string(h.last_error())));
      }
      state.handles.push_back(std::move(h));
    }
    state.farm = state.partition->farm(0);
    state.upstream.assign(n_, std::nullopt);
  }

  void wire_outputs() {
    for (std::size_t k = 0; k + 1 < stages_.size(); ++k) {
      for (std::uint32_t i = 0; i < n_; ++i) {
        const auto consumer = stages_[k + 1].farm->users[i].user;
        stages_[k + 1].upstream[i] = attach_consumer(*runtime_, *stages_[k].farm, i, consumer);
      }
    }
  }

  void install_faults() {
    struct FrameFault {
      ActivityId voter;
      std::uint64_t index;
      bool drop;
      Duration delay;
    };
    std::vector<FrameFault> frame_faults;
    for (const auto& f : spec_.faults) {
      const auto& cell = stages_[f.stage - 1].farm->voters[f.target - 1];
      switch (f.kind) {
        case FaultKind::CrashVoter:
          cell->halt();
          break;
        case FaultKind::DropMessage:
          frame_faults.push_back({cell->activity(), f.index, true, Duration(0)});
          break;
        case FaultKind::DelayMessage:
          frame_faults.push_back({cell->activity(), f.index, false, f.delay});
          break;
        default:
          break;
      }
    }
    if (frame_faults.empty()) return;
    runtime_->fabric().set_fault_hook(
        [frame_faults](const FrameContext& ctx, std::vector<std::uint8_t>&, FrameFate& fate) {
          if (ctx.from_role != ActivityRole::Voter || ctx.to_role != ActivityRole::Voter) return;
          for (const auto& ff : frame_faults) {
            if (ff.voter != ctx.from || ff.index != ctx.voter_frame_index) continue;
            fate.drop = fate.drop || ff.drop;
            fate.delay += ff.delay;
          }
        });
  }

  std::optional<VoteValue> stage_input(std::size_t k, std::uint32_t i) {
    std::optional<VoteValue> value;
    if (k == 0) {
      value = spec_.inputs[i];
    } else if (auto link = stages_[k].upstream[i]) {
      const auto me = stages_[k].farm->users[i].user;
      const TimePoint deadline = runtime_->now() + stage_spec(k - 1).delta_t;
      for (;;) {
        const auto remaining = deadline - runtime_->now();
        if (remaining <= Duration::zero()) break;
        auto msg = runtime_->await(me, *link, remaining);
        if (!msg) break;
        if (msg->tag != MessageTag::VotedValue) continue;
        if (const auto* v = std::get_if<VoteValue>(&msg->payload)) value = *v;
        break;
      }
    }
    if (!value) return value;
    for (std::size_t f = 0; f < spec_.faults.size(); ++f) {
      const auto& fault = spec_.faults[f];
      if (fault.kind == FaultKind::CorruptInput && fault.stage == k + 1 && fault.target == i + 1) {
        value = value->corrupted(patterns_[f]);
      }
    }
    return value;
  }

  StageReport run_stage(std::size_t k) {
    const auto& st = stage_spec(k);
    auto& state = stages_[k];
    const auto stage_no = static_cast<std::uint32_t>(k + 1);
    auto crashed = [&](std::uint32_t i) { return has_fault(spec_, FaultKind::CrashUser, stage_no, i + 1); };

    std::vector<std::optional<VoteValue>> inputs(n_);
    for (std::uint32_t i = 0; i < n_; ++i) {
      if (!crashed(i)) inputs[i] = stage_input(k, i);
    }

    StageReport report;
    report.stage = stage_no;
    report.start = runtime_->now();

    for (std::uint32_t i = 0; i < n_; ++i) {
      if (crashed(i)) continue;
      auto& h = state.handles[i];
      const auto target = k + 1 < stages_.size() ? stages_[k + 1].farm->users[i].user : h.endpoint()->user;
      std::vector<ControlRequest> reqs;
      if (inputs[i]) reqs.push_back(input(*inputs[i]));
      reqs.push_back(output(target));
      reqs.push_back(algorithm(st.algorithm));
      reqs.push_back(scaling_factor(st.algorithm.scaling_factor));
      h.control(reqs);
    }

    const TimePoint give_up = report.start + static_cast<std::int64_t>(n_ + 2) * st.delta_t;
    for (std::uint32_t i = 0; i < n_; ++i) {
      if (crashed(i)) continue;
      auto& h = state.handles[i];
      while (h.last_error() == ErrorCode::None && h.get(2 * st.delta_t).refused() && runtime_->now() < give_up) {
      }
    }
    runtime_->settle(static_cast<std::int64_t>(n_ + 2) * st.delta_t);

    report.census = state.farm->census(runtime_->fabric());
    report.census_ok = census_check(report.census, state.farm->descriptor.nodes).passed;

    report.client_round_messages.assign(n_, 0);
    for (std::uint32_t i = 0; i < n_; ++i) {
      if (crashed(i)) continue;
      report.client_round_messages[i] = state.handles[i].requests_sent();
      state.handles[i].close();
    }
    runtime_->settle(st.delta_t);

    const auto& farm = *state.farm;
    auto& fabric = runtime_->fabric();
    for (std::uint32_t i = 0; i < n_; ++i) {
      report.client_messages.push_back(fabric.frames_sent(farm.users[i].link, farm.users[i].user));
      for (std::uint32_t j = 0; j < n_; ++j) {
        if (i == j) continue;
        const auto a = farm.voters[i]->activity();
        if (auto l = fabric.find_link(a, farm.voters[j]->activity())) report.voter_frames += fabric.frames_sent(*l, a);
      }
    }

    report.reference = refs_[k];
    report.agreement = true;
    report.matches_reference = true;
    std::optional<VoteOutcome> first;
    for (std::uint32_t i = 0; i < n_; ++i) {
      const auto& cell = farm.voters[i];
      VoterReport vr;
      vr.voter = i + 1;
      vr.live = !cell->halted();
      cell->with_voter([&](const Voter& v) {
        if (v.history().empty()) return;
        const auto& rec = v.history().front();
        vr.completed = true;
        vr.outcome = rec.outcome;
        vr.timeouts = rec.timeouts;
        vr.invalid_slots = static_cast<std::size_t>(
            std::count_if(rec.slots.begin(), rec.slots.end(), [](const ValueSlot& s) { return !s.valid; }));
        vr.duration = rec.completed_at - report.start;
      });
      if (!vr.completed) vr.outcome = VoteOutcome::fail(ErrorCode::Timeout);
      vr.outcome_hash = outcome_hash(vr.outcome);
      if (vr.live) {
        if (!vr.completed) report.agreement = false;
        if (!first) first = vr.outcome;
        if (!same_outcome(*first, vr.outcome)) report.agreement = false;
        if (!vr.completed || !same_outcome(vr.outcome, report.reference)) report.matches_reference = false;
        if (vr.completed) report.duration = std::max(report.duration, vr.duration);
      }
      report.voters.push_back(std::move(vr));
    }
    return report;
  }

  const ExperimentSpec& spec_;
  std::uint32_t index_;
  Metric metric_;
  const std::vector<VoteOutcome>& refs_;
  std::unique_ptr<Runtime> runtime_;
  std::mt19937_64 rng_;
  std::uint32_t n_ = 0;
  std::vector<std::vector<std::uint8_t>> patterns_;
  std::vector<StageState> stages_;
};

bool is_masking_kind(FaultKind k) {
  return k == FaultKind::CorruptInput || k == FaultKind::CrashUser || k == FaultKind::CrashVoter;
}

/// Stages whose inputs, counting every upstream fault, stay within the masking bound.
std::vector<bool> within_masking_bound(const ExperimentSpec& spec) {
  const auto& stages = spec.pipeline.stages;
  std::vector<bool> out(stages.size(), false);
  if (spec.metric != "discrete") return out;
  if (!std::all_of(spec.faults.begin(), spec.faults.end(), [](const FaultSpec& f) { return is_masking_kind(f.kind); })) {
    return out;
  }
  const auto n = stages.front().n;
  const auto bound = (n - 1) / 2;
  bool upstream_ok = true;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto stage = static_cast<std::uint32_t>(k + 1);
    std::set<std::uint32_t> affected;
    for (const auto& f : spec.faults) {
      const bool here = f.stage == stage;
      const bool crashed_upstream = f.kind == FaultKind::CrashVoter && f.stage + 1 == stage;
      if (here || crashed_upstream) affected.insert(f.target);
    }
    const auto& alg = stages[k].algorithm;
    upstream_ok = upstream_ok && alg.kind == AlgorithmKind::Majority && alg.epsilon == 0.0 && affected.size() <= bound;
    out[k] = upstream_ok;
  }
  return out;
}

void add_assertions(Report& report) {
  const auto& spec = report.spec;
  bool census_ok = true;
  bool agree = true;
  bool masked = true;
  const auto bounded = within_masking_bound(spec);
  const bool any_bounded = !spec.faults.empty() && std::any_of(bounded.begin(), bounded.end(), [](bool b) { return b; });
  std::ostringstream census_detail, agree_detail, mask_detail;
  for (const auto& rep : report.repetitions) {
    for (const auto& st : rep.stages) {
      const auto where = "repetition " + std::to_string(rep.index) + " stage " + std::to_string(st.stage);
      if (!st.census_ok) {
        census_ok = false;
        census_detail << where << "; ";
      }
      if (spec.faults.empty() && !(st.agreement && st.matches_reference)) {
        agree = false;
        agree_detail << where << "; ";
      }
      if (!spec.faults.empty() && bounded[st.stage - 1] && !st.matches_reference) {
        masked = false;
        mask_detail << where << "; ";
      }
    }
  }
  report.assertions.push_back({"census", census_ok, census_ok ? "n(n-1)/2 virtual, n local, n voters" : census_detail.str()});
  if (spec.faults.empty()) {
    report.assertions.push_back({"fault_free_agreement", agree, agree ? "all voters agree on the reference" : agree_detail.str()});
  }
  if (any_bounded) {
    report.assertions.push_back({"masking", masked, masked ? "faults within the bound were masked" : mask_detail.str()});
  }
}

}  // namespace

Report run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  const auto metric = *metric_by_name(spec.metric);
  Report report;
  report.spec = spec;
  report.warnings = spec_warnings(spec);
  const auto refs = references(spec, metric);

  for (std::uint32_t r = 0; r < spec.repetitions; ++r) {
    Repetition rep(spec, r, metric, refs);
    report.repetitions.push_back(rep.run());
  }

  for (std::size_t k = 0; k < spec.pipeline.stages.size(); ++k) {
    std::vector<double> xs;
    for (const auto& rep : report.repetitions) {
      xs.push_back(std::chrono::duration<double>(rep.stages[k].duration).count());
    }
    const auto [mean, sd] = mean_stddev(xs);
    report.aggregate.push_back({static_cast<std::uint32_t>(k + 1), xs.size(), mean, sd});
  }
  add_assertions(report);
  return report;
}

Report run_pipeline(const ExperimentSpec& spec) {
  auto issues = validation_issues(spec);
  if (spec.pipeline.stages.size() < 2) issues.push_back("a pipeline needs at least two stages");
  if (!issues.empty()) throw SpecError(std::move(issues));
  return run_experiment(spec);
}

std::vector<BenchRow> bench(const BenchOptions& options) {
  std::vector<BenchRow> rows;
  for (auto n = options.n_min; n <= options.n_max; ++n) {
    ExperimentSpec spec;
    StageSpec st;
    st.n = n;
    st.algorithm = options.algorithm;
    st.delta_t = options.delta_t;
    spec.pipeline.stages.push_back(st);
    spec.inputs.assign(n, VoteValue::scalar(1.0));
    spec.clock = ClockMode::Real;
    spec.seed = options.seed;
    spec.synchronous_voter_links = options.synchronous_voter_links;
    spec.repetitions = options.repetitions + (options.include_warmup ? 0 : 1);
    const auto report = run_experiment(spec);

    std::vector<double> xs;
    for (std::size_t r = options.include_warmup ? 0 : 1; r < report.repetitions.size(); ++r) {
      xs.push_back(std::chrono::duration<double>(report.repetitions[r].stages.front().duration).count());
    }
    const auto [mean, sd] = mean_stddev(xs);
    rows.push_back({n, xs.size(), mean, sd});
  }
  return rows;
}

namespace {

std::string describe_slots(std::span<const ValueSlot> slots) {
  std::string out = "[";
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) out += ",";
    out += slots[i].valid ? describe(*slots[i].value) : "invalid";
  }
  return out + "]";
}

std::string describe_outcome(const VoteOutcome& o) {
  return o.ok() ? describe(*o.value) : std::string(to_string(o.failure));
}

}  // namespace

std::vector<Assertion> selftest(std::uint64_t seed, std::size_t random_instances) {
  std::vector<Assertion> out;
  const AlgorithmKind kinds[] = {AlgorithmKind::Majority, AlgorithmKind::Median, AlgorithmKind::Plurality,
                                 AlgorithmKind::WeightedAverage};
  const std::pair<const char*, Metric> metrics[] = {{"discrete", default_metric}, {"euclidean", euclidean_metric}};

  auto check = [](Assertion& a, const AlgorithmId& alg, std::span<const ValueSlot> slots, const Metric& m,
                  std::size_t& cases) {
    ++cases;
    const auto got = vote(alg, slots, m);
    const auto want = oracle_vote(alg, slots, m);
    if (same_outcome(got, want) || !a.passed) return;
    a.passed = false;
    a.detail = std::string(to_string(alg.kind)) + " on " + describe_slots(slots) + ": module " +
               describe_outcome(got) + ", oracle " + describe_outcome(want);
  };

  {
    Assertion a{"oracle_exhaustive", true, ""};
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 5; ++n) {
      std::vector<int> digits(n, 0);  // 0..2 values, 3 invalid
      for (;;) {
        std::vector<ValueSlot> slots;
        for (int d : digits) slots.push_back(d == 3 ? ValueSlot::invalid() : ValueSlot::of(VoteValue::scalar(d)));
        for (const auto& [name, m] : metrics) {
          for (auto k : kinds) check(a, AlgorithmId{k, 0.0, 1.0}, slots, m, cases);
        }
        std::size_t p = 0;
        while (p < n && digits[p] == 3) digits[p++] = 0;
        if (p == n) break;
        ++digits[p];
      }
    }
    if (a.passed) a.detail = std::to_string(cases) + " cases";
    out.push_back(a);
  }

  {
    Assertion a{"oracle_random", true, ""};
    std::size_t cases = 0;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, 6), grid(0, 12), coin(0, 99);
    std::uniform_real_distribution<double> real(-3.0, 3.0);
    const double epsilons[] = {0.25, 0.5, 0.75, 1.0, 1.5};
    std::uniform_int_distribution<std::size_t> eps_pick(0, std::size(epsilons) - 1);
    for (std::size_t t = 0; t < random_instances; ++t) {
      const int n = size(rng);
      const bool on_grid = coin(rng) < 70;
      std::vector<ValueSlot> slots;
      for (int i = 0; i < n; ++i) {
        if (coin(rng) < 15) {
          slots.push_back(ValueSlot::invalid());
        } else {
          slots.push_back(ValueSlot::of(VoteValue::scalar(on_grid ? 0.25 * grid(rng) : real(rng))));
        }
      }
      const double eps = epsilons[eps_pick(rng)];
      for (auto k : kinds) check(a, AlgorithmId{k, eps, eps}, slots, euclidean_metric, cases);
    }
    if (a.passed) a.detail = std::to_string(cases) + " cases";
    out.push_back(a);
  }

  {
    Assertion a{"census", true, ""};
    for (std::uint32_t n = 1; n <= 8; ++n) {
      const auto c = census_check(n);
      if (!c.passed && a.passed) {
        a.passed = false;
        a.detail = "n=" + std::to_string(n) + ": " + c.detail;
      }
    }
    if (a.passed) a.detail = "n = 1..8";
    out.push_back(a);
  }
  return out;
}

}  // namespace vfarm
