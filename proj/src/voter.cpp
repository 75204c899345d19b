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

#include "vfarm/voter.hpp"

#include <algorithm>

namespace vfarm {

std::vector<LinkId> VoterLinks::all() const {
  std::vector<LinkId> out{user_link};
  for (std::size_t k = 0; k < peers.size(); ++k) {
    if (peer_activities[k] != self) out.push_back(peers[k]);
  }
  for (const auto& [_, l] : consumers) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::string_view to_string(RoundPhase p) {
  switch (p) {
    case RoundPhase::Idle: return "IDLE";
    case RoundPhase::Collecting: return "COLLECTING";
    case RoundPhase::BroadcastDone: return "BROADCAST_DONE";
    case RoundPhase::Voted: return "VOTED";
  }
  return "UNKNOWN";
}

Voter::Voter(VoterConfig config, VoterLinks links) : config_(std::move(config)), links_(std::move(links)) {
  const auto n = config_.farm.cardinality();
  if (n == 0) throw std::invalid_argument("Voter: empty farm");
  if (config_.self.value == 0 || config_.self.value > n) throw std::invalid_argument("Voter: id out of range");
  if (config_.delta_t <= Duration::zero()) throw std::invalid_argument("Voter: delta_t must be > 0");
  if (links_.peers.size() != n || links_.peer_activities.size() != n) {
    throw std::invalid_argument("Voter: one peer entry per farm member required");
  }
  if (config_.output_target == ActivityId{}) config_.output_target = links_.user;
}

std::optional<TimePoint> Voter::deadline() const {
  if (closed_ || round_.phase != RoundPhase::Collecting) return std::nullopt;
  return deadline_;
}

void Voter::on_message(LinkId from, const Message& msg, TimePoint now, Outbox& out) {
  if (closed_) return;
  const bool from_user = from == links_.user_link;
  switch (msg.tag) {
    case MessageTag::BroadcastValue:
    case MessageTag::BroadcastInvalid:
      handle_broadcast(from, msg, now, out);
      return;
    default:
      break;
  }
  if (!from_user || direction_of(msg.tag) != Direction::ClientToVoter) {
    ++discarded_;
    return;
  }
  switch (msg.tag) {
    case MessageTag::Input:
      handle_input(msg, now, out);
      break;
    case MessageTag::SetAlgorithm:
      config_.algorithm = std::get<AlgorithmId>(msg.payload);
      break;
    case MessageTag::SetOutput: {
      const auto target = std::get<ActivityId>(msg.payload);
      if (target == links_.user || links_.consumers.contains(target)) {
        config_.output_target = target;
      } else {
        ++discarded_;
      }
      break;
    }
    case MessageTag::Get:
      handle_get(msg, out);
      break;
    case MessageTag::Close:
      handle_close(msg, out);
      break;
    default:
      ++discarded_;
  }
}

void Voter::handle_input(const Message& msg, TimePoint now, Outbox& out) {
  if (round_.phase != RoundPhase::Collecting) begin_round(round_.number + 1, now, out);
  const auto own = config_.self.index();
  if (round_.resolved[own]) {
    ++late_inputs_;
    return;
  }
  round_.own_input = own;
  current_.own_input_arrived = true;
  resolve(own, std::get<VoteValue>(msg.payload), now, out);
}

void Voter::handle_broadcast(LinkId from, const Message& msg, TimePoint now, Outbox& out) {
  const auto k = msg.sender.value;
  const auto n = cardinality();
  if (k == 0 || k > n || k == config_.self.value || from != links_.peers[k - 1] || msg.round == 0) {
    ++discarded_;
    return;
  }
  if (msg.round > round_.number) {
    if (round_.phase == RoundPhase::Collecting) {
      deferred_.push_back(msg);
      return;
    }
    begin_round(msg.round, now, out);
    handle_broadcast(from, msg, now, out);
    return;
  }
  if (msg.round < round_.number || round_.phase != RoundPhase::Collecting || round_.resolved[k - 1]) {
    ++discarded_;
    return;
  }
  std::optional<VoteValue> value;
  if (msg.tag == MessageTag::BroadcastValue) value = std::get<VoteValue>(msg.payload);
  resolve(k - 1, std::move(value), now, out);
}

void Voter::handle_get(const Message& msg, Outbox& out) {
  const bool own_round_open = round_.phase == RoundPhase::Collecting && round_.own_input.has_value();
  if (history_.empty() || own_round_open) {
    send_to_user(Message{MessageTag::Refused, config_.self, round_.number, msg.ref, {}}, out);
    return;
  }
  const auto& last = history_.back();
  Payload p = last.outcome.ok() ? Payload(*last.outcome.value) : Payload(last.outcome.failure);
  send_to_user(Message{MessageTag::VotedValue, config_.self, last.round, msg.ref, std::move(p)}, out);
}

void Voter::handle_close(const Message& msg, Outbox& out) {
  if (round_.phase == RoundPhase::Collecting) {
    send_to_user(Message{MessageTag::Refused, config_.self, round_.number, msg.ref, {}}, out);
    return;
  }
  send_to_user(Message{MessageTag::Done, config_.self, 0, msg.ref, {}}, out);
  closed_ = true;
  deadline_.reset();
}

void Voter::begin_round(std::uint32_t number, TimePoint now, Outbox& out) {
  const auto n = cardinality();
  round_ = RoundState{};
  round_.number = number;
  round_.phase = RoundPhase::Collecting;
  round_.resolved.assign(n, false);
  round_.slots.resize(n);
  for (std::size_t i = 0; i < n; ++i) round_.slots[i] = ValueSlot::invalid(VoterId{static_cast<std::uint32_t>(i + 1)});
  current_ = RoundRecord{};
  current_.round = number;
  current_.started_at = now;
  deadline_ = now + config_.delta_t;

  std::vector<Message> replay;
  std::erase_if(deferred_, [&](const Message& m) {
    if (m.round != number) return false;
    replay.push_back(m);
    return true;
  });
  for (const auto& m : replay) handle_broadcast(links_.peers[m.sender.index()], m, now, out);
}

void Voter::resolve(std::size_t index, std::optional<VoteValue> value, TimePoint now, Outbox& out) {
  const auto origin = VoterId{static_cast<std::uint32_t>(index + 1)};
  round_.slots[index] = value ? ValueSlot::of(std::move(*value), origin) : ValueSlot::invalid(origin);
  round_.resolved[index] = true;
  ++round_.input_messages;
  deadline_ = now + config_.delta_t;
  after_resolve(now, out);
}

void Voter::after_resolve(TimePoint now, Outbox& out) {
  if (!round_.broadcast_done && round_.input_messages == config_.self.value) broadcast_own(out);
  if (round_.input_messages == cardinality()) complete(now, out);
}

void Voter::broadcast_own(Outbox& out) {
  round_.broadcast_done = true;
  ++current_.broadcasts;
  current_.resolved_at_broadcast = round_.input_messages;

  const auto own = config_.self.index();
  const auto& slot = round_.slots[own];
  Message m{MessageTag::BroadcastInvalid, config_.self, round_.number, 0, {}};
  if (round_.resolved[own] && slot.valid) {
    m.tag = MessageTag::BroadcastValue;
    m.payload = *slot.value;
  }
  for (std::size_t k = 0; k < cardinality(); ++k) {
    if (k != own) out.post(links_.peers[k], m);
  }
  // The own input missed its turn: it is faulty from here on.
  if (!round_.resolved[own]) {
    round_.resolved[own] = true;
    ++round_.input_messages;
  }
}

void Voter::complete(TimePoint now, Outbox& out) {
  round_.phase = RoundPhase::BroadcastDone;
  current_.outcome = vote(config_.algorithm, round_.slots, config_.metric);
  round_.phase = RoundPhase::Voted;
  deadline_.reset();
  current_.completed_at = now;
  current_.slots = round_.slots;
  history_.push_back(current_);

  const auto& outcome = history_.back().outcome;
  send_to_user(Message{MessageTag::Done, config_.self, round_.number, 0, {}}, out);
  Payload p = outcome.ok() ? Payload(*outcome.value) : Payload(outcome.failure);
  out.post(output_link(), Message{MessageTag::VotedValue, config_.self, round_.number, 0, std::move(p)});

  std::optional<std::uint32_t> next;
  for (const auto& m : deferred_) {
    if (!next || m.round < *next) next = m.round;
  }
  if (next) begin_round(*next, now, out);
}

void Voter::abort_round(TimePoint now, Outbox& out) {
  if (round_.phase != RoundPhase::Collecting) return;
  round_.broadcast_done = true;
  for (std::size_t i = 0; i < cardinality(); ++i) {
    if (!round_.resolved[i]) {
      round_.resolved[i] = true;
      round_.slots[i] = ValueSlot::invalid(VoterId{static_cast<std::uint32_t>(i + 1)});
      ++round_.input_messages;
    }
  }
  deferred_.clear();
  complete(now, out);
}

void Voter::on_timeout(TimePoint now, Outbox& out) {
  if (closed_ || round_.phase != RoundPhase::Collecting || !deadline_ || now < *deadline_) return;
  const auto it = std::find(round_.resolved.begin(), round_.resolved.end(), false);
  if (it == round_.resolved.end()) return;
  ++current_.timeouts;
  resolve(static_cast<std::size_t>(it - round_.resolved.begin()), std::nullopt, now, out);
}

void Voter::send_to_user(Message msg, Outbox& out) { out.post(links_.user_link, std::move(msg)); }

LinkId Voter::output_link() const {
  if (config_.output_target == links_.user) return links_.user_link;
  return links_.consumers.at(config_.output_target);
}

}  // namespace vfarm
