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

#include "vfarm/client.hpp"

namespace vfarm {

namespace {

VoteOutcome outcome_of(const Message& m) {
  if (const auto* v = std::get_if<VoteValue>(&m.payload)) return VoteOutcome::success(*v);
  return VoteOutcome::fail(std::get<ErrorCode>(m.payload));
}

}  // namespace

const Farm* Partition::farm(std::size_t index) const {
  if (index >= farms_.size() || !farms_[index].farm) return nullptr;
  return &*farms_[index].farm;
}

std::size_t Partition::next_farm_index(std::uint32_t rank) {
  if (opened_.size() <= rank) opened_.resize(rank + 1, 0);
  return opened_[rank]++;
}

Result<UserEndpoint> Partition::activate(std::size_t index, const FarmDescriptor& descriptor, const Metric& metric,
                                         std::uint32_t rank) {
  if (descriptor.state != FarmState::Described) return ErrorCode::BadState;
  if (rank == 0 || rank > descriptor.cardinality()) return ErrorCode::BadState;
  if (farms_.size() <= index) farms_.resize(index + 1);
  auto& slot = farms_[index];

  if (!slot.farm) {
    auto desc = descriptor;
    auto farm = spawn_farm(desc, metric, options_.delta_t, *runtime_, SpawnOptions{options_.algorithm});
    if (!farm) return farm.error();
    slot.farm = std::move(farm).value();
    slot.attached.assign(descriptor.cardinality(), false);
  } else if (slot.farm->descriptor.nodes != descriptor.nodes ||
             slot.farm->descriptor.metric_id != descriptor.metric_id) {
    return ErrorCode::BadState;
  }
  if (slot.attached[rank - 1]) return ErrorCode::BadState;
  slot.attached[rank - 1] = true;
  return slot.farm->users[rank - 1];
}

FarmHandle::FarmHandle(Partition& partition, std::uint32_t rank, std::size_t index, Metric metric,
                       std::string metric_id)
    : partition_(&partition), rank_(rank), index_(index), metric_(std::move(metric)),
      algorithm_(partition.options().algorithm) {
  descriptor_.metric_id = std::move(metric_id);
}

FarmHandle FarmHandle::open(Partition& partition, std::uint32_t rank, Metric metric, std::string metric_id) {
  const auto index = partition.next_farm_index(rank);
  return FarmHandle(partition, rank, index, metric ? std::move(metric) : Metric(default_metric),
                    std::move(metric_id));
}

ErrorCode FarmHandle::add(NodeId node) {
  last_error_ = ErrorCode::None;
  auto next = descriptor_add(descriptor_, node);
  if (!next) return fail(next.error());
  descriptor_ = std::move(next).value();
  return ErrorCode::None;
}

ErrorCode FarmHandle::run() {
  last_error_ = ErrorCode::None;
  if (descriptor_.state != FarmState::Described) return fail(ErrorCode::BadState);
  auto ep = partition_->activate(index_, descriptor_, metric_, rank_);
  if (!ep) return fail(ep.error());
  endpoint_ = ep.value();
  descriptor_.state = FarmState::Running;
  return ErrorCode::None;
}

std::shared_ptr<VoterCell> FarmHandle::local_voter() const {
  const auto* farm = partition_->farm(index_);
  if (!farm || !endpoint_) return nullptr;
  return farm->voters.at(rank_ - 1);
}

ErrorCode FarmHandle::send(Message msg) {
  msg.sender = VoterId::user();
  const auto rc = partition_->runtime().fabric().transmit(endpoint_->link, endpoint_->user, msg);
  if (rc != ErrorCode::None) return rc;
  ++requests_sent_;
  ++requests_this_round_;
  return ErrorCode::None;
}

ErrorCode FarmHandle::control(std::span<const ControlRequest> requests) {
  last_error_ = ErrorCode::None;
  if (descriptor_.state != FarmState::Running) return fail(ErrorCode::NotRunning);

  // Configuration goes out ahead of the input so the round it starts already sees it.
  std::vector<const ControlRequest*> ordered;
  for (const auto& req : requests) {
    if (!std::holds_alternative<InputRequest>(req)) ordered.push_back(&req);
  }
  for (const auto& req : requests) {
    if (std::holds_alternative<InputRequest>(req)) ordered.push_back(&req);
  }

  ErrorCode result = ErrorCode::None;
  for (const auto* p : ordered) {
    const auto& req = *p;
    Message m;
    if (const auto* in = std::get_if<InputRequest>(&req)) {
      if (input_outstanding_) {
        result = ErrorCode::Refused;
        continue;
      }
      requests_this_round_ = 0;
      m = Message{MessageTag::Input, {}, 0, 0, in->value};
    } else if (const auto* out = std::get_if<OutputRequest>(&req)) {
      m = Message{MessageTag::SetOutput, {}, 0, 0, out->target};
    } else if (const auto* alg = std::get_if<AlgorithmRequest>(&req)) {
      algorithm_ = alg->algorithm;
      m = Message{MessageTag::SetAlgorithm, {}, 0, 0, algorithm_};
    } else {
      algorithm_.scaling_factor = std::get<ScalingRequest>(req).scaling_factor;
      m = Message{MessageTag::SetAlgorithm, {}, 0, 0, algorithm_};
    }
    const bool is_input = m.tag == MessageTag::Input;
    if (auto rc = send(std::move(m)); rc != ErrorCode::None) return fail(rc);
    if (is_input) input_outstanding_ = true;
  }
  if (result != ErrorCode::None) return fail(result);
  return ErrorCode::None;
}

bool FarmHandle::absorb(const Message& m, std::uint32_t ref) {
  if (m.ref != 0) return m.ref == ref;  // anything else answers an abandoned request
  if (m.tag == MessageTag::Done && m.round > last_done_round_) {
    last_done_round_ = m.round;
    input_outstanding_ = false;
  } else if (m.tag == MessageTag::VotedValue) {
    last_outcome_ = outcome_of(m);
  }
  return false;
}

GetResult FarmHandle::get(Duration timeout) {
  last_error_ = ErrorCode::None;
  if (descriptor_.state != FarmState::Running) {
    fail(ErrorCode::NotRunning);
    return {};
  }
  const auto ref = next_ref_++;
  if (auto rc = send(Message{MessageTag::Get, {}, 0, ref, {}}); rc != ErrorCode::None) {
    fail(rc);
    return {};
  }
  auto& rt = partition_->runtime();
  const TimePoint deadline = rt.now() + timeout;
  for (;;) {
    const auto remaining = deadline - rt.now();
    auto msg = remaining > Duration::zero() ? rt.await(endpoint_->user, endpoint_->link, remaining) : std::nullopt;
    if (!msg) {
      fail(ErrorCode::Timeout);
      return {};
    }
    if (!absorb(*msg, ref)) continue;
    if (msg->tag == MessageTag::VotedValue) {
      last_outcome_ = outcome_of(*msg);
      return GetResult{last_outcome_, msg->round};
    }
    return {};  // REFUSED: round still open
  }
}

ErrorCode FarmHandle::close() {
  last_error_ = ErrorCode::None;
  if (descriptor_.state != FarmState::Running) return fail(ErrorCode::NotRunning);
  const auto ref = next_ref_++;
  if (auto rc = send(Message{MessageTag::Close, {}, 0, ref, {}}); rc != ErrorCode::None) return fail(rc);

  auto& rt = partition_->runtime();
  const TimePoint deadline = rt.now() + partition_->options().reply_timeout;
  for (;;) {
    const auto remaining = deadline - rt.now();
    auto msg = remaining > Duration::zero() ? rt.await(endpoint_->user, endpoint_->link, remaining) : std::nullopt;
    if (!msg) return fail(ErrorCode::Timeout);
    if (!absorb(*msg, ref)) continue;
    if (msg->tag == MessageTag::Refused) return fail(ErrorCode::Refused);
    descriptor_.state = FarmState::Closed;
    rt.fabric().close(endpoint_->link);
    return ErrorCode::None;
  }
}

}  // namespace vfarm
