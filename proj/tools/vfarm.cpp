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

// vfarm: run voting-farm experiments, pipelines, benchmarks and the self-test.
//
// Exit status: 0 success, 1 an experiment assertion failed, 2 usage or spec error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "vfarm/harness.hpp"
#include "vfarm/serialize.hpp"

namespace {

using namespace vfarm;

constexpr int kOk = 0;
constexpr int kAssertion = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Inline {
  std::uint32_t n = 3;
  std::uint32_t stages = 1;
  std::string algorithm = "majority";
  double epsilon = 0.0;
  double scaling = 1.0;
  std::int64_t delta_t_us = 1000;
  std::vector<std::string> faults;
  std::uint64_t seed = 0;
  std::uint32_t repetitions = 1;
  std::string clock = "virtual";
  std::string metric = "discrete";
  std::string value = "1";
  std::vector<std::string> inputs;
};

struct Output {
  std::string format = "json";
  std::string path;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& what) {
  std::istringstream is(text);
  T v{};
  if (!(is >> v) || !is.eof()) throw UsageError("bad " + what + " '" + text + "'");
  return v;
}

/// kind:target[:param[:param2]][@stage]
FaultSpec parse_fault(const std::string& text) {
  FaultSpec f;
  std::string body = text;
  if (auto at = body.find('@'); at != std::string::npos) {
    f.stage = parse_number<std::uint32_t>(body.substr(at + 1), "fault stage");
    body = body.substr(0, at);
  }
  const auto parts = split(body, ':');
  if (parts.size() < 2 || parts.size() > 4) throw UsageError("fault '" + text + "': expected kind:target[:param]");
  const auto kind = parse_fault_kind(parts[0]);
  if (!kind) throw UsageError("fault '" + text + "': unknown kind '" + parts[0] + "'");
  f.kind = *kind;
  f.target = parse_number<std::uint32_t>(parts[1], "fault target");
  const std::size_t extra = parts.size() - 2;
  switch (f.kind) {
    case FaultKind::CrashUser:
    case FaultKind::CrashVoter:
      if (extra) throw UsageError("fault '" + text + "': crashes take no parameter");
      break;
    case FaultKind::CorruptInput:
      if (extra > 1) throw UsageError("fault '" + text + "': corrupt_input takes one hex pattern");
      if (extra) {
        try {
          f.pattern = from_hex(parts[2]);
        } catch (const std::exception&) {
          throw UsageError("fault '" + text + "': pattern must be hex");
        }
      }
      break;
    case FaultKind::DropMessage:
      if (extra > 1) throw UsageError("fault '" + text + "': drop_message takes one frame index");
      if (extra) f.index = parse_number<std::uint64_t>(parts[2], "frame index");
      break;
    case FaultKind::DelayMessage:
      if (extra == 0) throw UsageError("fault '" + text + "': delay_message needs a delay in microseconds");
      f.delay = Duration(parse_number<std::int64_t>(parts[2], "delay"));
      if (extra == 2) f.index = parse_number<std::uint64_t>(parts[3], "frame index");
      break;
  }
  return f;
}

VoteValue parse_value(const std::string& text) {
  try {
    return value_from_json(nlohmann::json::parse(text));
  } catch (const std::exception&) {
    return VoteValue::from_string(text);
  }
}

ExperimentSpec spec_from_flags(const Inline& in) {
  ExperimentSpec spec;
  const auto kind = parse_algorithm(in.algorithm);
  if (!kind) throw UsageError("unknown algorithm '" + in.algorithm + "'");
  const auto clock = parse_clock_mode(in.clock);
  if (!clock) throw UsageError("clock must be virtual or real");
  for (std::uint32_t k = 0; k < in.stages; ++k) {
    StageSpec st;
    st.n = in.n;
    st.algorithm = AlgorithmId{*kind, in.epsilon, in.scaling};
    st.delta_t = Duration(in.delta_t_us);
    spec.pipeline.stages.push_back(st);
  }
  if (in.inputs.empty()) {
    spec.inputs.assign(in.n, parse_value(in.value));
  } else {
    for (const auto& v : in.inputs) spec.inputs.push_back(parse_value(v));
  }
  for (const auto& f : in.faults) spec.faults.push_back(parse_fault(f));
  spec.seed = in.seed;
  spec.repetitions = in.repetitions;
  spec.clock = *clock;
  spec.metric = in.metric;
  return spec;
}

ExperimentSpec spec_from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read spec file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_spec(ss.str());
}

void emit(const Output& out, const std::string& text) {
  if (out.path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out.path, std::ios::binary);
  if (!os) throw UsageError("cannot write '" + out.path + "'");
  os << text;
}

void add_inline(CLI::App& cmd, Inline& in, std::vector<CLI::Option*>& opts) {
  opts.push_back(cmd.add_option("--n", in.n, "Farm cardinality"));
  opts.push_back(cmd.add_option("--algorithm", in.algorithm, "majority, median, plurality or weighted_average"));
  opts.push_back(cmd.add_option("--epsilon", in.epsilon, "Equivalence threshold"));
  opts.push_back(cmd.add_option("--scaling", in.scaling, "Weighted-average scaling factor"));
  opts.push_back(cmd.add_option("--delta-t", in.delta_t_us, "Timeout in microseconds"));
  opts.push_back(cmd.add_option("--faults", in.faults, "kind:target[:param][@stage], repeatable")->delimiter(','));
  opts.push_back(cmd.add_option("--seed", in.seed, "Seed for randomized corruption"));
  opts.push_back(cmd.add_option("--repetitions", in.repetitions, "Repetitions"));
  opts.push_back(cmd.add_option("--clock", in.clock, "virtual or real"));
  opts.push_back(cmd.add_option("--metric", in.metric, "discrete or euclidean"));
  opts.push_back(cmd.add_option("--value", in.value, "Input for every user (JSON value or text)"));
  opts.push_back(cmd.add_option("--input", in.inputs, "Input of one user, in rank order, repeatable"));
}

void add_output(CLI::App& cmd, Output& out) {
  cmd.add_option("--output", out.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  cmd.add_option("--out", out.path, "Write the report here instead of stdout");
}

int report_exit(const Report& report, const Output& out) {
  emit(out, out.format == "csv" ? report_csv(report) : report_json_text(report));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& a : report.assertions) {
    if (!a.passed) std::cerr << "assertion failed: " << a.name << ": " << a.detail << '\n';
  }
  return report.passed() ? kOk : kAssertion;
}

std::pair<std::uint32_t, std::uint32_t> parse_range(const std::string& text) {
  if (auto dots = text.find(".."); dots != std::string::npos) {
    return {parse_number<std::uint32_t>(text.substr(0, dots), "range start"),
            parse_number<std::uint32_t>(text.substr(dots + 2), "range end")};
  }
  const auto n = parse_number<std::uint32_t>(text, "n");
  return {n, n};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voting farm experiments: N-modular redundancy with a turn-taking voter protocol"};
  app.require_subcommand(1);

  Inline run_in, pipe_in;
  pipe_in.stages = 2;
  std::string run_spec, pipe_spec;
  Output run_out, pipe_out, bench_out;
  std::vector<CLI::Option*> run_opts, pipe_opts;

  auto* run = app.add_subcommand("run", "Run one experiment");
  add_inline(*run, run_in, run_opts);
  run_opts.push_back(run->add_option("--stages", run_in.stages, "Pipeline stages"));
  auto* run_spec_opt = run->add_option("--spec", run_spec, "ExperimentSpec JSON file");
  for (auto* o : run_opts) run_spec_opt->excludes(o);
  add_output(*run, run_out);

  auto* pipe = app.add_subcommand("pipeline", "Run a restoring-organ pipeline (>= 2 stages)");
  add_inline(*pipe, pipe_in, pipe_opts);
  pipe_opts.push_back(pipe->add_option("--stages", pipe_in.stages, "Pipeline stages"));
  auto* pipe_spec_opt = pipe->add_option("--spec", pipe_spec, "ExperimentSpec JSON file");
  for (auto* o : pipe_opts) pipe_spec_opt->excludes(o);
  add_output(*pipe, pipe_out);

  auto* bench_cmd = app.add_subcommand("bench", "Wall-clock round time for a range of farm sizes");
  std::string bench_range = "1..4";
  BenchOptions bench_opts;
  std::string bench_alg = "majority";
  std::int64_t bench_dt_us = 1000000;
  bool async_links = false;
  bench_cmd->add_option("--n", bench_range, "Cardinality or range lo..hi");
  bench_cmd->add_option("--repetitions", bench_opts.repetitions, "Measured repetitions per N");
  bench_cmd->add_option("--algorithm", bench_alg, "Voting algorithm");
  bench_cmd->add_option("--delta-t", bench_dt_us, "Timeout in microseconds");
  bench_cmd->add_flag("--include-warmup", bench_opts.include_warmup, "Keep the first repetition in the statistics");
  bench_cmd->add_flag("--async-links", async_links, "Buffered instead of rendezvous voter links");
  add_output(*bench_cmd, bench_out);

  auto* self = app.add_subcommand("selftest", "Oracle equivalence and census suites");
  std::uint64_t self_seed = 1;
  std::size_t self_random = 1000;
  self->add_option("--seed", self_seed, "Seed for the random instances");
  self->add_option("--random", self_random, "Number of random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*run) {
      const auto spec = run_spec.empty() ? spec_from_flags(run_in) : spec_from_file(run_spec);
      return report_exit(run_experiment(spec), run_out);
    }
    if (*pipe) {
      const auto spec = pipe_spec.empty() ? spec_from_flags(pipe_in) : spec_from_file(pipe_spec);
      return report_exit(run_pipeline(spec), pipe_out);
    }
    if (*bench_cmd) {
      const auto [lo, hi] = parse_range(bench_range);
      if (lo == 0 || hi < lo) throw UsageError("bench range must satisfy 1 <= lo <= hi");
      if (bench_opts.repetitions == 0) throw UsageError("repetitions must be >= 1");
      const auto kind = parse_algorithm(bench_alg);
      if (!kind) throw UsageError("unknown algorithm '" + bench_alg + "'");
      if (bench_dt_us <= 0) throw UsageError("delta-t must be > 0");
      bench_opts.n_min = lo;
      bench_opts.n_max = hi;
      bench_opts.algorithm.kind = *kind;
      bench_opts.delta_t = Duration(bench_dt_us);
      bench_opts.synchronous_voter_links = !async_links;
      const auto rows = bench(bench_opts);
      emit(bench_out, bench_out.format == "csv" ? bench_csv(rows) : bench_to_json(rows).dump(2) + "\n");
      return kOk;
    }
    if (*self) {
      bool ok = true;
      for (const auto& a : selftest(self_seed, self_random)) {
        std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
        ok = ok && a.passed;
      }
      return ok ? kOk : kAssertion;
    }
  } catch (const SpecError& e) {
    std::cerr << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  }
  return kUsage;
}
