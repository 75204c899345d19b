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

#include <map>
#include <optional>
#include <vector>

#include "vfarm/algorithms.hpp"
#include "vfarm/core.hpp"
#include "vfarm/transport.hpp"

namespace vfarm {

struct VoterConfig {
  VoterId self;
  FarmDescriptor farm;
  Duration delta_t{1000};
  Metric metric = default_metric;
  AlgorithmId algorithm;
  ActivityId output_target;  // defaults to the own user module
};

/// Links a voter listens on. `peers[k]` reaches voter k+1; the own entry is unused.
struct VoterLinks {
  ActivityId self;
  ActivityId user;
  LinkId user_link;
  std::vector<ActivityId> peer_activities;
  std::vector<LinkId> peers;
  /// Additional consumers the farm output may be routed to (SET_OUTPUT).
  std::map<ActivityId, LinkId> consumers;

  std::vector<LinkId> all() const;
};

enum class RoundPhase : std::uint8_t { Idle, Collecting, BroadcastDone, Voted };
std::string_view to_string(RoundPhase p);

struct RoundState {
  std::uint32_t number = 0;
  std::vector<ValueSlot> slots;
  std::vector<bool> resolved;
  std::uint32_t input_messages = 0;
  std::optional<std::size_t> own_input;  // index of the own user's slot once it arrived
  RoundPhase phase = RoundPhase::Idle;
  bool broadcast_done = false;
};

/// What happened in one completed round, kept for inspection by tests and the harness.
struct RoundRecord {
  std::uint32_t round = 0;
  TimePoint started_at{0};
  TimePoint completed_at{0};
  std::vector<ValueSlot> slots;
  VoteOutcome outcome;
  std::uint32_t broadcasts = 0;
  /// input_messages at the moment this voter broadcast.
  std::uint32_t resolved_at_broadcast = 0;
  std::uint32_t timeouts = 0;
  bool own_input_arrived = false;
};

/// The voter automaton. Events come in through `on_message` and `on_timeout`; everything
/// it sends goes through the outbox. The caller decides when the deadline is reached.
///
/// Per round: every slot-resolving arrival or timeout increments input_messages; when the
/// counter equals the voter's own id it broadcasts its user's value (or an invalid marker)
/// to all fellows; at N it votes, sends DONE to its user and VOTED_VALUE to the output
/// target. Arrivals are attributed to the origin carried in the message; a timeout
/// invalidates the lowest-index unresolved slot.
class Voter {
 public:
  Voter(VoterConfig config, VoterLinks links);

  void on_message(LinkId from, const Message& msg, TimePoint now, Outbox& out);
  void on_timeout(TimePoint now, Outbox& out);
  /// Link failure: every unresolved slot becomes invalid and the round is voted as is.
  void abort_round(TimePoint now, Outbox& out);

  /// Makes `consumer` a legal SET_OUTPUT target reachable over `link`.
  void add_consumer(ActivityId consumer, LinkId link) { links_.consumers[consumer] = link; }

  /// Pending Δt expiry while collecting.
  std::optional<TimePoint> deadline() const;
  bool closed() const { return closed_; }

  const VoterConfig& config() const { return config_; }
  const VoterLinks& links() const { return links_; }
  const RoundState& round() const { return round_; }
  const std::vector<RoundRecord>& history() const { return history_; }
  std::size_t cardinality() const { return config_.farm.cardinality(); }

  std::uint64_t discarded_messages() const { return discarded_; }
  std::uint64_t late_inputs() const { return late_inputs_; }
  std::uint64_t deferred_messages() const { return deferred_.size(); }

 private:
  void handle_input(const Message& msg, TimePoint now, Outbox& out);
  void handle_broadcast(LinkId from, const Message& msg, TimePoint now, Outbox& out);
  void handle_get(const Message& msg, Outbox& out);
  void handle_close(const Message& msg, Outbox& out);

  void begin_round(std::uint32_t number, TimePoint now, Outbox& out);
  void resolve(std::size_t index, std::optional<VoteValue> value, TimePoint now, Outbox& out);
  void after_resolve(TimePoint now, Outbox& out);
  void broadcast_own(Outbox& out);
  void complete(TimePoint now, Outbox& out);
  void send_to_user(Message msg, Outbox& out);
  LinkId output_link() const;

  VoterConfig config_;
  VoterLinks links_;
  RoundState round_;
  RoundRecord current_;
  std::vector<RoundRecord> history_;
  std::vector<Message> deferred_;  // broadcasts for rounds not started yet
  std::optional<TimePoint> deadline_;
  bool closed_ = false;
  std::uint64_t discarded_ = 0;
  std::uint64_t late_inputs_ = 0;
};

}  // namespace vfarm
