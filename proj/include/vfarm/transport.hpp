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

// Link fabric: ordered point-to-point channels between placed activities, with timed
// receive, fault hooks, and a per-voter outbox so that senders never block.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <vector>

#include "vfarm/core.hpp"

namespace vfarm {

using Duration = std::chrono::microseconds;
/// Offset from the clock's epoch.
using TimePoint = std::chrono::microseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  virtual bool is_virtual() const = 0;
};

class RealClock final : public Clock {
 public:
  RealClock() : start_(std::chrono::steady_clock::now()) {}
  TimePoint now() const override {
    return std::chrono::duration_cast<TimePoint>(std::chrono::steady_clock::now() - start_);
  }
  bool is_virtual() const override { return false; }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Logical clock; only moves when someone advances it.
class VirtualClock final : public Clock {
 public:
  TimePoint now() const override { return TimePoint(ticks_.load()); }
  bool is_virtual() const override { return true; }

  /// Never moves backwards.
  void advance_to(TimePoint t) {
    auto cur = ticks_.load();
    while (t.count() > cur && !ticks_.compare_exchange_weak(cur, t.count())) {
    }
  }
  void advance_by(Duration d) { advance_to(now() + d); }

 private:
  std::atomic<std::int64_t> ticks_{0};
};

struct LinkId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(LinkId, LinkId) = default;
};

enum class LinkKind : std::uint8_t { Local, Virtual };
enum class ActivityRole : std::uint8_t { User, Voter, Consumer };

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Census {
  std::size_t virtual_links = 0;
  std::size_t local_links = 0;
  std::size_t activities = 0;
  std::size_t voters = 0;

  friend bool operator==(const Census&, const Census&) = default;
};

/// What a fault hook sees about a frame about to enter a link.
struct FrameContext {
  LinkId link;
  ActivityId from;
  ActivityId to;
  ActivityRole from_role;
  ActivityRole to_role;
  /// Index among frames `from` has sent on voter-to-voter links (0-based).
  std::uint64_t voter_frame_index;
  /// Index among frames sent on this link in this direction (0-based).
  std::uint64_t link_frame_index;
  const Message& message;
};

struct FrameFate {
  bool drop = false;
  Duration delay{0};
};

/// May flip bytes of the encoded frame, drop it, or delay it.
using FaultHook = std::function<void(const FrameContext&, std::vector<std::uint8_t>& frame, FrameFate&)>;

struct FabricOptions {
  Duration local_latency{0};
  Duration virtual_latency{0};
  /// EPX-style rendezvous: a transmit on a voter-to-voter link blocks until the peer has
  /// taken the frame (real clock only).
  bool synchronous_voter_links = false;
};

/// Head of a link direction, used by the virtual scheduler to order events.
struct PendingFrame {
  TimePoint deliver_at;
  int priority = 0;  // 0: voter-to-voter, 1: everything else
  std::uint64_t seq = 0;
  LinkId link;
};

enum class ReceiveStatus : std::uint8_t { Arrived, TimedOut, Down };

struct ReceiveEvent {
  ReceiveStatus status = ReceiveStatus::TimedOut;
  LinkId link;
  std::optional<Message> message;
};

class Fabric {
 public:
  explicit Fabric(std::shared_ptr<Clock> clock, FabricOptions options = {});
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  Clock& clock() const { return *clock_; }
  const FabricOptions& options() const { return options_; }

  ActivityId place(NodeId node, ActivityRole role, std::string label = {});
  NodeId node_of(ActivityId a) const;
  ActivityRole role_of(ActivityId a) const;
  const std::string& label_of(ActivityId a) const;

  /// Bidirectional ordered channel; LOCAL iff both ends sit on the same node.
  /// Throws TransportError for self-links, unplaced endpoints, or an existing pair.
  LinkId connect(ActivityId a, ActivityId b);
  std::optional<LinkId> find_link(ActivityId a, ActivityId b) const;
  LinkKind kind_of(LinkId l) const;
  ActivityId peer_of(LinkId l, ActivityId me) const;
  bool is_open(LinkId l) const;
  void close(LinkId l);

  /// Encodes and enqueues `msg` towards the peer of `from`. Returns TransportDown on a
  /// closed link. Blocks only for synchronous voter links.
  ErrorCode transmit(LinkId l, ActivityId from, const Message& msg);

  /// Earliest arrival on `links` addressed to `me`, or TimedOut once `timeout` elapsed.
  /// With a virtual clock the call advances the clock itself, so it must be the only
  /// driver of that clock.
  ReceiveEvent receive_any(ActivityId me, std::span<const LinkId> links, Duration timeout);

  /// Earliest queued frame towards `me` on `links`, deliverable or not.
  std::optional<PendingFrame> peek(ActivityId me, std::span<const LinkId> links) const;
  /// Pops the head frame of `link` towards `me`. Undecodable frames are dropped and
  /// reported as an empty optional.
  std::optional<Message> take(ActivityId me, LinkId link);

  Census census() const;
  /// Counts only links with both endpoints inside `scope`.
  Census census(std::span<const ActivityId> scope) const;

  std::uint64_t frames_sent(LinkId l, ActivityId from) const;
  std::uint64_t frames_dropped() const;
  std::uint64_t malformed_frames() const;

  void set_fault_hook(FaultHook hook);
  /// Wakes every blocked caller; subsequent blocking calls return immediately.
  void shutdown();

 private:
  struct Frame {
    std::vector<std::uint8_t> bytes;
    TimePoint deliver_at;
    int priority;
    std::uint64_t seq;
  };
  struct Lane {
    std::deque<Frame> queue;  // ordered by (deliver_at, seq)
    std::uint64_t sent = 0;
    std::uint64_t taken_seq = 0;
  };
  struct LinkState {
    ActivityId a;
    ActivityId b;
    LinkKind kind;
    bool open = true;
    Lane to_a;
    Lane to_b;
  };
  struct Activity {
    NodeId node;
    ActivityRole role;
    std::string label;
    std::uint64_t voter_frames = 0;
  };

  LinkState& link(LinkId l);
  const LinkState& link(LinkId l) const;
  Lane& inbound(LinkState& s, ActivityId me);
  const Lane& inbound(const LinkState& s, ActivityId me) const;
  const Activity& activity(ActivityId a) const;
  std::optional<PendingFrame> peek_locked(ActivityId me, std::span<const LinkId> links) const;
  std::optional<Message> take_locked(ActivityId me, LinkId l);

  std::shared_ptr<Clock> clock_;
  FabricOptions options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Activity> activities_;  // deque: references stay valid while a transmit waits
  std::deque<LinkState> links_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, LinkId> pairs_;
  FaultHook hook_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t dropped_ = 0;
  std::uint64_t malformed_ = 0;
  bool shutdown_ = false;
};

/// Per-voter queue of outgoing messages. `post` never waits on a peer; a dedicated sender
/// activity (or the virtual scheduler) drains it into the fabric.
class Outbox {
 public:
  struct Entry {
    LinkId link;
    Message message;
  };

  Outbox(Fabric& fabric, ActivityId owner) : fabric_(&fabric), owner_(owner) {}

  ErrorCode post(LinkId link, Message msg);
  std::optional<Entry> try_take();
  /// Blocks until an entry is available or `stop` is requested.
  std::optional<Entry> wait_take(std::stop_token stop);
  std::size_t pending() const;
  std::uint64_t posted() const;

  /// Transmits every pending entry on the calling thread.
  void flush();
  ActivityId owner() const { return owner_; }

 private:
  Fabric* fabric_;
  ActivityId owner_;
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<Entry> pending_;
  std::uint64_t posted_ = 0;
};

}  // namespace vfarm
