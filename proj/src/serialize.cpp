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

#include "vfarm/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace vfarm {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string where, std::vector<std::string>& issues)
      : j_(j), where_(std::move(where)), issues_(issues) {
    if (!j_.is_object()) issue("expected an object");
  }

  ~Reader() {
    if (!j_.is_object()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) issue("unknown key '" + key + "'");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object()) return nullptr;
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const auto* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v->is_number_unsigned()) throw std::invalid_argument("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      issue("bad value for '" + key + "'");
    }
  }

  void get_us(const std::string& key, Duration& out) {
    std::int64_t us = out.count();
    get(key, us);
    out = Duration(us);
  }

  void issue(const std::string& what) { issues_.push_back(where_ + what); }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

StageSpec stage_from_json(const json& j, const std::string& where, std::vector<std::string>& issues) {
  StageSpec st;
  Reader r(j, where, issues);
  r.get("n", st.n);
  if (const auto* a = r.find("algorithm")) {
    auto kind = a->is_string() ? parse_algorithm(a->get<std::string>()) : std::nullopt;
    if (kind) {
      st.algorithm.kind = *kind;
    } else {
      r.issue("unknown algorithm " + a->dump());
    }
  }
  r.get("epsilon", st.algorithm.epsilon);
  r.get("scaling", st.algorithm.scaling_factor);
  r.get_us("delta_t_us", st.delta_t);
  if (const auto* nodes = r.find("nodes")) {
    if (!nodes->is_array()) {
      r.issue("nodes must be an array");
    } else {
      for (const auto& node : *nodes) {
        if (node.is_number_unsigned()) {
          st.nodes.push_back(NodeId{node.get<std::uint32_t>()});
        } else {
          r.issue("node ids must be non-negative integers");
        }
      }
    }
  }
  return st;
}

FaultSpec fault_from_json(const json& j, const std::string& where, std::vector<std::string>& issues) {
  FaultSpec f;
  Reader r(j, where, issues);
  const auto* kind = r.find("kind");
  auto parsed = kind && kind->is_string() ? parse_fault_kind(kind->get<std::string>()) : std::nullopt;
  if (parsed) {
    f.kind = *parsed;
  } else {
    r.issue(kind ? "unknown fault kind " + kind->dump() : "missing 'kind'");
  }
  r.get("stage", f.stage);
  r.get("target", f.target);
  r.get("index", f.index);
  r.get_us("delay_us", f.delay);
  if (const auto* p = r.find("pattern")) {
    try {
      f.pattern = from_hex(p->get<std::string>());
    } catch (const std::exception&) {
      r.issue("pattern must be a hex string");
    }
  }
  return f;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

VoteValue value_from_json(const json& j) {
  if (j.is_number()) return VoteValue::scalar(j.get<double>());
  if (j.is_array()) {
    std::vector<double> xs;
    for (const auto& x : j) {
      if (!x.is_number()) throw std::invalid_argument("numeric arrays may only hold numbers");
      xs.push_back(x.get<double>());
    }
    return VoteValue::from_numeric(xs);
  }
  if (j.is_string()) return VoteValue::from_string(j.get<std::string>());
  if (j.is_object() && j.size() == 1 && j.contains("hex")) return VoteValue::from_bytes(from_hex(j.at("hex").get<std::string>()));
  if (j.is_object() && j.size() == 1 && j.contains("text")) return VoteValue::from_string(j.at("text").get<std::string>());
  throw std::invalid_argument("a value is a number, an array of numbers, a string, {\"hex\"} or {\"text\"}");
}

json value_to_json(const VoteValue& v) {
  if (auto xs = v.numeric_view()) {
    const bool finite = std::all_of(xs->begin(), xs->end(), [](double x) { return std::isfinite(x); });
    if (finite && xs->size() == 1) return (*xs)[0];
    if (finite) return *xs;
  }
  return json{{"hex", to_hex(v.bytes())}};
}

json outcome_to_json(const VoteOutcome& o) {
  if (!o.ok()) return json{{"ok", false}, {"failure", std::string(to_string(o.failure))}};
  return json{{"ok", true}, {"value", value_to_json(*o.value)}, {"hex", to_hex(o.value->bytes())}};
}

ExperimentSpec spec_from_json(const json& j) {
  std::vector<std::string> issues;
  ExperimentSpec spec;
  {
    Reader r(j, "", issues);
    if (const auto* p = r.find("pipeline")) {
      Reader pr(*p, "pipeline: ", issues);
      const auto* stages = pr.find("stages");
      if (!stages || !stages->is_array()) {
        pr.issue("'stages' must be an array");
      } else {
        for (std::size_t k = 0; k < stages->size(); ++k) {
          spec.pipeline.stages.push_back(stage_from_json((*stages)[k], "stage " + std::to_string(k + 1) + ": ", issues));
        }
      }
    } else {
      r.issue("missing 'pipeline'");
    }
    r.get("metric", spec.metric);
    if (const auto* in = r.find("inputs")) {
      if (!in->is_array()) {
        r.issue("'inputs' must be an array");
      } else {
        for (std::size_t i = 0; i < in->size(); ++i) {
          try {
            spec.inputs.push_back(value_from_json((*in)[i]));
          } catch (const std::exception& e) {
            r.issue("input " + std::to_string(i + 1) + ": " + e.what());
          }
        }
      }
    }
    if (const auto* faults = r.find("faults")) {
      if (!faults->is_array()) {
        r.issue("'faults' must be an array");
      } else {
        for (std::size_t f = 0; f < faults->size(); ++f) {
          spec.faults.push_back(fault_from_json((*faults)[f], "fault " + std::to_string(f + 1) + ": ", issues));
        }
      }
    }
    r.get("seed", spec.seed);
    if (const auto* c = r.find("clock")) {
      auto mode = c->is_string() ? parse_clock_mode(c->get<std::string>()) : std::nullopt;
      if (mode) {
        spec.clock = *mode;
      } else {
        r.issue("clock must be \"virtual\" or \"real\"");
      }
    }
    r.get("repetitions", spec.repetitions);
    r.get_us("local_latency_us", spec.local_latency);
    r.get_us("virtual_latency_us", spec.virtual_latency);
    r.get("synchronous_voter_links", spec.synchronous_voter_links);
  }
  if (!issues.empty()) throw SpecError(std::move(issues));
  return spec;
}

ExperimentSpec parse_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError({std::string("not valid JSON: ") + e.what()});
  }
  return spec_from_json(j);
}

json spec_to_json(const ExperimentSpec& spec) {
  json stages = json::array();
  for (const auto& st : spec.pipeline.stages) {
    json s{{"n", st.n},
           {"algorithm", std::string(to_string(st.algorithm.kind))},
           {"epsilon", st.algorithm.epsilon},
           {"scaling", st.algorithm.scaling_factor},
           {"delta_t_us", st.delta_t.count()}};
    if (!st.nodes.empty()) {
      json nodes = json::array();
      for (auto n : st.nodes) nodes.push_back(n.value);
      s["nodes"] = nodes;
    }
    stages.push_back(s);
  }
  json inputs = json::array();
  for (const auto& v : spec.inputs) inputs.push_back(value_to_json(v));
  json faults = json::array();
  for (const auto& f : spec.faults) {
    json fj{{"kind", std::string(to_string(f.kind))}, {"stage", f.stage}, {"target", f.target}};
    if (!f.pattern.empty()) fj["pattern"] = to_hex(f.pattern);
    if (f.delay != Duration::zero()) fj["delay_us"] = f.delay.count();
    if (f.index != 0) fj["index"] = f.index;
    faults.push_back(fj);
  }
  return json{{"pipeline", json{{"stages", stages}}},
              {"metric", spec.metric},
              {"inputs", inputs},
              {"faults", faults},
              {"seed", spec.seed},
              {"clock", std::string(to_string(spec.clock))},
              {"repetitions", spec.repetitions},
              {"local_latency_us", spec.local_latency.count()},
              {"virtual_latency_us", spec.virtual_latency.count()},
              {"synchronous_voter_links", spec.synchronous_voter_links}};
}

json report_to_json(const Report& report) {
  json reps = json::array();
  for (const auto& rep : report.repetitions) {
    json stages = json::array();
    for (const auto& st : rep.stages) {
      json voters = json::array();
      for (const auto& v : st.voters) {
        voters.push_back(json{{"voter", v.voter},
                              {"live", v.live},
                              {"completed", v.completed},
                              {"outcome", outcome_to_json(v.outcome)},
                              {"outcome_hash", hash_hex(v.outcome_hash)},
                              {"invalid_slots", v.invalid_slots},
                              {"timeouts", v.timeouts},
                              {"duration_us", v.duration.count()}});
      }
      stages.push_back(json{{"stage", st.stage},
                            {"start_us", st.start.count()},
                            {"duration_us", st.duration.count()},
                            {"duration_s", std::chrono::duration<double>(st.duration).count()},
                            {"reference", outcome_to_json(st.reference)},
                            {"agreement", st.agreement},
                            {"matches_reference", st.matches_reference},
                            {"client_messages", st.client_messages},
                            {"client_round_messages", st.client_round_messages},
                            {"voter_frames", st.voter_frames},
                            {"census",
                             json{{"virtual_links", st.census.virtual_links},
                                  {"local_links", st.census.local_links},
                                  {"activities", st.census.activities},
                                  {"voters", st.census.voters}}},
                            {"census_ok", st.census_ok},
                            {"voters", voters}});
    }
    reps.push_back(json{{"repetition", rep.index}, {"stages", stages}});
  }
  json aggregate = json::array();
  for (const auto& a : report.aggregate) {
    aggregate.push_back(json{{"stage", a.stage}, {"samples", a.samples}, {"mean_s", a.mean_s}, {"stddev_s", a.stddev_s}});
  }
  json assertions = json::array();
  for (const auto& a : report.assertions) {
    assertions.push_back(json{{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  return json{{"spec", spec_to_json(report.spec)}, {"warnings", report.warnings}, {"repetitions", reps},
              {"aggregate", aggregate}, {"assertions", assertions}, {"passed", report.passed()}};
}

std::string report_json_text(const Report& report) { return report_to_json(report).dump(2) + "\n"; }

std::string report_csv(const Report& report) {
  std::ostringstream os;
  os.precision(12);
  os << "repetition,stage,voter,outcome_hash,duration_s\n";
  for (const auto& rep : report.repetitions) {
    for (const auto& st : rep.stages) {
      for (const auto& v : st.voters) {
        os << rep.index << ',' << st.stage << ',' << v.voter << ',' << hash_hex(v.outcome_hash) << ',';
        if (v.live && v.completed) os << std::chrono::duration<double>(v.duration).count();
        os << '\n';
      }
    }
  }
  return os.str();
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "n,samples,mean_s,stddev_s\n";
  for (const auto& r : rows) os << r.n << ',' << r.samples << ',' << r.mean_s << ',' << r.stddev_s << '\n';
  return os.str();
}

json bench_to_json(const std::vector<BenchRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back(json{{"n", r.n}, {"samples", r.samples}, {"mean_s", r.mean_s}, {"stddev_s", r.stddev_s}});
  }
  return json{{"bench", out}};
}

}  // namespace vfarm
