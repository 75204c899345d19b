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

#include "vfarm/transport.hpp"

#include <algorithm>
#include <tuple>

namespace vfarm {

namespace {

auto order_key(const PendingFrame& p) { return std::tuple(p.deliver_at, p.priority, p.seq); }

}  // namespace

Fabric::Fabric(std::shared_ptr<Clock> clock, FabricOptions options)
    : clock_(std::move(clock)), options_(options) {
  if (!clock_) throw std::invalid_argument("Fabric: null clock");
}

ActivityId Fabric::place(NodeId node, ActivityRole role, std::string label) {
  if (!node.valid()) throw TransportError("place: node ids must be > 0");
  std::lock_guard lk(mu_);
  activities_.push_back(Activity{node, role, std::move(label)});
  return ActivityId{static_cast<std::uint32_t>(activities_.size())};
}

const Fabric::Activity& Fabric::activity(ActivityId a) const {
  if (a.value == 0 || a.value > activities_.size()) throw TransportError("unknown activity");
  return activities_[a.value - 1];
}

NodeId Fabric::node_of(ActivityId a) const {
  std::lock_guard lk(mu_);
  return activity(a).node;
}

ActivityRole Fabric::role_of(ActivityId a) const {
  std::lock_guard lk(mu_);
  return activity(a).role;
}

const std::string& Fabric::label_of(ActivityId a) const {
  std::lock_guard lk(mu_);
  return activity(a).label;
}

LinkId Fabric::connect(ActivityId a, ActivityId b) {
  std::lock_guard lk(mu_);
  if (a == b) throw TransportError("connect: endpoints must differ");
  const auto& aa = activity(a);
  const auto& bb = activity(b);
  auto key = std::minmax(a.value, b.value);
  if (pairs_.contains(key)) throw TransportError("connect: link already exists");
  links_.push_back(LinkState{a, b, aa.node == bb.node ? LinkKind::Local : LinkKind::Virtual, true, {}, {}});
  LinkId id{static_cast<std::uint32_t>(links_.size())};
  pairs_.emplace(key, id);
  return id;
}

std::optional<LinkId> Fabric::find_link(ActivityId a, ActivityId b) const {
  std::lock_guard lk(mu_);
  auto it = pairs_.find(std::minmax(a.value, b.value));
  if (it == pairs_.end()) return std::nullopt;
  return it->second;
}

Fabric::LinkState& Fabric::link(LinkId l) {
  if (l.value == 0 || l.value > links_.size()) throw TransportError("unknown link");
  return links_[l.value - 1];
}

const Fabric::LinkState& Fabric::link(LinkId l) const {
  if (l.value == 0 || l.value > links_.size()) throw TransportError("unknown link");
  return links_[l.value - 1];
}

Fabric::Lane& Fabric::inbound(LinkState& s, ActivityId me) {
  if (me == s.a) return s.to_a;
  if (me == s.b) return s.to_b;
  throw TransportError("activity is not an endpoint of this link");
}

const Fabric::Lane& Fabric::inbound(const LinkState& s, ActivityId me) const {
  if (me == s.a) return s.to_a;
  if (me == s.b) return s.to_b;
  throw TransportError("activity is not an endpoint of this link");
}

LinkKind Fabric::kind_of(LinkId l) const {
  std::lock_guard lk(mu_);
  return link(l).kind;
}

ActivityId Fabric::peer_of(LinkId l, ActivityId me) const {
  std::lock_guard lk(mu_);
  const auto& s = link(l);
  if (me == s.a) return s.b;
  if (me == s.b) return s.a;
  throw TransportError("activity is not an endpoint of this link");
}

bool Fabric::is_open(LinkId l) const {
  std::lock_guard lk(mu_);
  return link(l).open && !shutdown_;
}

void Fabric::close(LinkId l) {
  {
    std::lock_guard lk(mu_);
    link(l).open = false;
  }
  cv_.notify_all();
}

ErrorCode Fabric::transmit(LinkId l, ActivityId from, const Message& msg) {
  std::unique_lock lk(mu_);
  auto& s = link(l);
  if (!s.open || shutdown_) return ErrorCode::TransportDown;
  if (from != s.a && from != s.b) throw TransportError("transmit: sender is not an endpoint");
  const ActivityId to = from == s.a ? s.b : s.a;
  Lane& lane = inbound(s, to);

  auto& sender = activities_[from.value - 1];
  const auto& receiver = activity(to);
  const bool voter_link = sender.role == ActivityRole::Voter && receiver.role == ActivityRole::Voter;

  auto bytes = encode_message(msg);
  FrameContext ctx{l, from, to, sender.role, receiver.role,
                   voter_link ? sender.voter_frames : 0, lane.sent, msg};
  if (voter_link) ++sender.voter_frames;
  ++lane.sent;

  FrameFate fate;
  if (hook_) hook_(ctx, bytes, fate);
  if (fate.drop) {
    ++dropped_;
    return ErrorCode::None;
  }

  const Duration latency = s.kind == LinkKind::Local ? options_.local_latency : options_.virtual_latency;
  Frame f{std::move(bytes), clock_->now() + latency + fate.delay, voter_link ? 0 : 1, next_seq_++};
  const auto seq = f.seq;
  auto pos = std::upper_bound(lane.queue.begin(), lane.queue.end(), f, [](const Frame& x, const Frame& y) {
    return std::tie(x.deliver_at, x.seq) < std::tie(y.deliver_at, y.seq);
  });
  lane.queue.insert(pos, std::move(f));
  cv_.notify_all();

  if (voter_link && options_.synchronous_voter_links && !clock_->is_virtual()) {
    cv_.wait(lk, [&] {
      if (shutdown_ || !s.open) return true;
      return std::none_of(lane.queue.begin(), lane.queue.end(), [&](const Frame& q) { return q.seq == seq; });
    });
  }
  return ErrorCode::None;
}

std::optional<PendingFrame> Fabric::peek_locked(ActivityId me, std::span<const LinkId> links) const {
  std::optional<PendingFrame> best;
  for (auto l : links) {
    const auto& lane = inbound(link(l), me);
    if (lane.queue.empty()) continue;
    const auto& f = lane.queue.front();
    PendingFrame p{f.deliver_at, f.priority, f.seq, l};
    if (!best || order_key(p) < order_key(*best)) best = p;
  }
  return best;
}

std::optional<PendingFrame> Fabric::peek(ActivityId me, std::span<const LinkId> links) const {
  std::lock_guard lk(mu_);
  return peek_locked(me, links);
}

std::optional<Message> Fabric::take_locked(ActivityId me, LinkId l) {
  auto& lane = inbound(link(l), me);
  if (lane.queue.empty()) return std::nullopt;
  auto frame = std::move(lane.queue.front());
  lane.queue.pop_front();
  lane.taken_seq = frame.seq;
  cv_.notify_all();
  try {
    return decode_message(frame.bytes);
  } catch (const MalformedFrame&) {
    ++malformed_;
    return std::nullopt;
  }
}

std::optional<Message> Fabric::take(ActivityId me, LinkId l) {
  std::lock_guard lk(mu_);
  return take_locked(me, l);
}

ReceiveEvent Fabric::receive_any(ActivityId me, std::span<const LinkId> links, Duration timeout) {
  if (timeout <= Duration::zero()) throw std::invalid_argument("receive_any: timeout must be > 0");
  auto* vclock = dynamic_cast<VirtualClock*>(clock_.get());
  std::unique_lock lk(mu_);
  const TimePoint deadline = clock_->now() + timeout;
  for (;;) {
    if (shutdown_) return {ReceiveStatus::Down, {}, std::nullopt};
    const auto head = peek_locked(me, links);
    const TimePoint now = clock_->now();
    if (head && head->deliver_at <= now) {
      if (auto msg = take_locked(me, head->link)) return {ReceiveStatus::Arrived, head->link, std::move(msg)};
      continue;
    }
    const bool all_closed =
        std::all_of(links.begin(), links.end(), [&](LinkId l) { return !link(l).open; });
    if (all_closed && !head) return {ReceiveStatus::Down, {}, std::nullopt};

    if (vclock) {
      if (head && head->deliver_at <= deadline) {
        vclock->advance_to(head->deliver_at);
        continue;
      }
      vclock->advance_to(deadline);
      return {ReceiveStatus::TimedOut, {}, std::nullopt};
    }
    if (now >= deadline) return {ReceiveStatus::TimedOut, {}, std::nullopt};
    const TimePoint wake = head ? std::min(head->deliver_at, deadline) : deadline;
    cv_.wait_for(lk, wake - now);
  }
}

Census Fabric::census() const {
  std::lock_guard lk(mu_);
  Census c;
  c.activities = activities_.size();
  for (const auto& a : activities_) c.voters += a.role == ActivityRole::Voter ? 1 : 0;
  for (const auto& s : links_) {
    if (!s.open) continue;
    (s.kind == LinkKind::Local ? c.local_links : c.virtual_links) += 1;
  }
  return c;
}

Census Fabric::census(std::span<const ActivityId> scope) const {
  std::lock_guard lk(mu_);
  auto in_scope = [&](ActivityId a) { return std::find(scope.begin(), scope.end(), a) != scope.end(); };
  Census c;
  for (auto a : scope) {
    ++c.activities;
    c.voters += activity(a).role == ActivityRole::Voter ? 1 : 0;
  }
  for (const auto& s : links_) {
    if (!s.open || !in_scope(s.a) || !in_scope(s.b)) continue;
    (s.kind == LinkKind::Local ? c.local_links : c.virtual_links) += 1;
  }
  return c;
}

std::uint64_t Fabric::frames_sent(LinkId l, ActivityId from) const {
  std::lock_guard lk(mu_);
  const auto& s = link(l);
  if (from == s.a) return s.to_b.sent;
  if (from == s.b) return s.to_a.sent;
  throw TransportError("activity is not an endpoint of this link");
}

std::uint64_t Fabric::frames_dropped() const {
  std::lock_guard lk(mu_);
  return dropped_;
}

std::uint64_t Fabric::malformed_frames() const {
  std::lock_guard lk(mu_);
  return malformed_;
}

void Fabric::set_fault_hook(FaultHook hook) {
  std::lock_guard lk(mu_);
  hook_ = std::move(hook);
}

void Fabric::shutdown() {
  {
    std::lock_guard lk(mu_);
    shutdown_ = true;
  }
  cv_.notify_all();
}

ErrorCode Outbox::post(LinkId link, Message msg) {
  if (!fabric_->is_open(link)) return ErrorCode::TransportDown;
  {
    std::lock_guard lk(mu_);
    pending_.push_back(Entry{link, std::move(msg)});
    ++posted_;
  }
  cv_.notify_one();
  return ErrorCode::None;
}

std::optional<Outbox::Entry> Outbox::try_take() {
  std::lock_guard lk(mu_);
  if (pending_.empty()) return std::nullopt;
  auto e = std::move(pending_.front());
  pending_.pop_front();
  return e;
}

std::optional<Outbox::Entry> Outbox::wait_take(std::stop_token stop) {
  std::unique_lock lk(mu_);
  if (!cv_.wait(lk, stop, [&] { return !pending_.empty(); })) return std::nullopt;
  auto e = std::move(pending_.front());
  pending_.pop_front();
  return e;
}

std::size_t Outbox::pending() const {
  std::lock_guard lk(mu_);
  return pending_.size();
}

std::uint64_t Outbox::posted() const {
  std::lock_guard lk(mu_);
  return posted_;
}

void Outbox::flush() {
  while (auto e = try_take()) fabric_->transmit(e->link, owner_, e->message);
}

}  // namespace vfarm
