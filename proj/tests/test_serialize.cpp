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

#include <sstream>

#include "vfarm/serialize.hpp"

using namespace vfarm;
using nlohmann::json;

namespace {

constexpr const char* kSpec = R"({
  "pipeline": {"stages": [
    {"n": 5, "algorithm": "majority", "delta_t_us": 500, "nodes": [1, 2, 2, 3, 4]},
    {"n": 5, "algorithm": "median", "epsilon": 0.5, "nodes": [1, 2, 2, 3, 4]}
  ]},
  "metric": "euclidean",
  "inputs": [2, [2.0], {"hex": "0000000000000040"}, 2, 2],
  "faults": [
    {"kind": "crash_voter", "stage": 1, "target": 2},
    {"kind": "corrupt", "target": 1, "pattern": "ff00"},
    {"kind": "delay_message", "target": 3, "delay_us": 10, "index": 1}
  ],
  "seed": 9,
  "clock": "virtual",
  "repetitions": 2
})";

}  // namespace

TEST_CASE("values") {
  CHECK(value_from_json(json(2.5)) == VoteValue::scalar(2.5));
  CHECK(value_from_json(json::array({1, 2})) == VoteValue::from_numeric(std::vector<double>{1, 2}));
  CHECK(value_from_json(json("ab")) == VoteValue::from_string("ab"));
  CHECK(value_from_json(json{{"text", "ab"}}) == VoteValue::from_string("ab"));
  CHECK(byte_equal(value_from_json(json{{"hex", "6162"}}), VoteValue::from_string("ab")));
  CHECK_THROWS(value_from_json(json(nullptr)));
  CHECK_THROWS(value_from_json(json::array({1, "x"})));

  for (const auto& v : {VoteValue::scalar(-3.25), VoteValue::from_string("x"),
                        VoteValue::from_numeric(std::vector<double>{1, 2, 3})}) {
    CHECK(byte_equal(value_from_json(value_to_json(v)), v));
  }
  CHECK(value_to_json(VoteValue::scalar(std::nan(""))).contains("hex"));
}

TEST_CASE("outcomes") {
  const auto ok = outcome_to_json(VoteOutcome::success(VoteValue::scalar(1)));
  CHECK(ok["ok"] == true);
  CHECK(ok["value"] == 1.0);
  CHECK(ok["hex"] == "000000000000f03f");
  const auto bad = outcome_to_json(VoteOutcome::fail(ErrorCode::NoMajority));
  CHECK(bad["ok"] == false);
  CHECK(bad["failure"] == "NO_MAJORITY");
}

TEST_CASE("spec documents") {
  const auto s = parse_spec(kSpec);
  REQUIRE(s.pipeline.stages.size() == 2);
  CHECK(s.pipeline.stages[0].delta_t == Duration(500));
  CHECK(s.pipeline.stages[1].algorithm.kind == AlgorithmKind::Median);
  CHECK(s.pipeline.stages[1].algorithm.epsilon == 0.5);
  CHECK(s.pipeline.stages[1].nodes == std::vector<NodeId>{NodeId{1}, NodeId{2}, NodeId{2}, NodeId{3}, NodeId{4}});
  CHECK(s.metric == "euclidean");
  REQUIRE(s.inputs.size() == 5);
  CHECK(byte_equal(s.inputs[2], VoteValue::scalar(2.0)));
  CHECK(byte_equal(s.inputs[0], s.inputs[1]));
  REQUIRE(s.faults.size() == 3);
  CHECK(s.faults[0].kind == FaultKind::CrashVoter);
  CHECK(s.faults[1].kind == FaultKind::CorruptInput);
  CHECK(s.faults[1].pattern == std::vector<std::uint8_t>{0xff, 0x00});
  CHECK(s.faults[2].delay == Duration(10));
  CHECK(s.faults[2].index == 1);
  CHECK(s.seed == 9);
  CHECK(s.repetitions == 2);
  CHECK(validation_issues(s).empty());

  const auto again = spec_from_json(spec_to_json(s));
  CHECK(spec_to_json(again) == spec_to_json(s));
}

TEST_CASE("malformed spec documents") {
  auto issues_of = [](std::string_view text) {
    try {
      parse_spec(text);
    } catch (const SpecError& e) {
      return e.issues();
    }
    return std::vector<std::string>{};
  };
  CHECK(issues_of("{").size() == 1);
  CHECK(issues_of("{}").size() == 1);
  CHECK(issues_of(R"({"pipeline": {"stages": []}, "colour": 1})").size() == 1);
  const auto many = issues_of(R"({"pipeline": {"stages": [{"n": -1, "algorithm": "mode", "extra": 0}]},
                                  "clock": "sundial", "faults": [{"kind": "meteor"}], "seed": "x"})");
  CHECK(many.size() == 6);
}

TEST_CASE("reports") {
  auto s = parse_spec(kSpec);
  const auto r = run_pipeline(s);
  const auto text = report_json_text(r);
  CHECK(text.back() == '\n');
  const auto j = json::parse(text);
  CHECK(j["repetitions"].size() == 2);
  CHECK(j["repetitions"][0]["stages"].size() == 2);
  CHECK(j["repetitions"][0]["stages"][0]["voters"].size() == 5);
  CHECK(j["aggregate"].size() == 2);
  CHECK(j["passed"] == r.passed());
  CHECK(j["spec"] == spec_to_json(s));
  CHECK(report_json_text(run_pipeline(s)) == text);

  const auto csv = report_csv(r);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "repetition,stage,voter,outcome_hash,duration_s");
  int rows = 0;
  int blank = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    if (line.back() == ',') ++blank;
  }
  CHECK(rows == 2 * 2 * 5);
  CHECK(blank == 2);  // the crashed voter in each repetition
  CHECK(r.passed());
}

TEST_CASE("bench output") {
  const std::vector<BenchRow> rows{{1, 50, 1e-5, 2e-6}, {2, 50, 3e-5, 4e-6}};
  CHECK(bench_csv(rows) == "n,samples,mean_s,stddev_s\n1,50,1e-05,2e-06\n2,50,3e-05,4e-06\n");
  const auto j = bench_to_json(rows);
  CHECK(j["bench"].size() == 2);
  CHECK(j["bench"][1]["n"] == 2);
}
