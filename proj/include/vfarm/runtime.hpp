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

// Execution of voter automata: a deterministic virtual-time scheduler for tests and
// simulation, and a thread-per-voter runtime (plus one sender thread each) on the wall clock.

#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "vfarm/transport.hpp"
#include "vfarm/voter.hpp"

namespace vfarm {

/// A voter automaton together with the endpoints it owns.
class VoterCell {
 public:
  VoterCell(Fabric& fabric, Voter voter);

  ActivityId activity() const { return activity_; }
  const std::vector<LinkId>& listen_links() const { return listen_; }
  Outbox& outbox() { return outbox_; }

  bool halted() const { return halted_.load(); }
  void halt() { halted_.store(true); }
  /// Neither halted nor closed.
  bool live() const;

  /// Runs `f(voter)` under the cell lock.
  template <class F>
  decltype(auto) with_voter(F&& f) {
    std::lock_guard lk(mu_);
    return f(voter_);
  }
  template <class F>
  decltype(auto) with_voter(F&& f) const {
    std::lock_guard lk(mu_);
    return f(static_cast<const Voter&>(voter_));
  }

 private:
  ActivityId activity_;
  std::vector<LinkId> listen_;
  Voter voter_;
  Outbox outbox_;
  std::atomic<bool> halted_{false};
  mutable std::mutex mu_;
};

class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual Fabric& fabric() = 0;
  TimePoint now() { return fabric().clock().now(); }
  bool is_virtual() { return fabric().clock().is_virtual(); }

  virtual void launch(std::shared_ptr<VoterCell> cell) = 0;
  /// Blocks the calling user activity until a message for `me` arrives on `link` or
  /// `timeout` elapses. Undecodable frames are skipped.
  virtual std::optional<Message> await(ActivityId me, LinkId link, Duration timeout) = 0;
  /// Processes voter work until nothing is pending or `horizon` has passed.
  virtual void settle(Duration horizon) = 0;
  virtual void shutdown() = 0;
};

/// Single-threaded discrete-event execution. The clock only moves when no voter can make
/// progress at the current instant. Events at equal times are ordered timer expiries
/// first, then voter-to-voter frames, then client frames; ties by global send sequence.
class VirtualRuntime final : public Runtime {
 public:
  explicit VirtualRuntime(FabricOptions options = {Duration(1), Duration(0), false});
  ~VirtualRuntime() override;

  Fabric& fabric() override { return *fabric_; }
  VirtualClock& clock() { return *clock_; }

  void launch(std::shared_ptr<VoterCell> cell) override;
  std::optional<Message> await(ActivityId me, LinkId link, Duration timeout) override;
  void settle(Duration horizon) override;
  void shutdown() override {}

  /// Runs the earliest voter event if it is due no later than `limit`.
  bool step(TimePoint limit);
  std::uint64_t events_processed() const { return events_; }

 private:
  struct Event {
    TimePoint at;
    int priority;
    std::uint64_t seq;
    VoterCell* cell;
    std::optional<LinkId> link;  // empty: timer expiry
  };
  std::optional<Event> next_event() const;
  void dispatch(const Event& e);

  std::shared_ptr<VirtualClock> clock_;
  std::unique_ptr<Fabric> fabric_;
  std::vector<std::shared_ptr<VoterCell>> cells_;
  std::uint64_t events_ = 0;
  // Timer events sort as if sent when armed.
  std::map<const VoterCell*, std::pair<TimePoint, std::uint64_t>> armed_;
  std::uint64_t timer_seq_ = 0;
};

/// One voter thread and one sender thread per cell, wall-clock time.
class ThreadedRuntime final : public Runtime {
 public:
  explicit ThreadedRuntime(FabricOptions options = {});
  ~ThreadedRuntime() override;

  Fabric& fabric() override { return *fabric_; }

  void launch(std::shared_ptr<VoterCell> cell) override;
  std::optional<Message> await(ActivityId me, LinkId link, Duration timeout) override;
  void settle(Duration horizon) override;
  void shutdown() override;

 private:
  void voter_main(std::stop_token stop, std::shared_ptr<VoterCell> cell);
  static void sender_main(std::stop_token stop, Fabric& fabric, std::shared_ptr<VoterCell> cell);

  std::shared_ptr<RealClock> clock_;
  std::unique_ptr<Fabric> fabric_;
  std::vector<std::shared_ptr<VoterCell>> cells_;
  std::vector<std::jthread> threads_;
  bool stopped_ = false;
};

struct UserEndpoint {
  ActivityId user;
  LinkId link;  // LOCAL link to the own voter
};

/// A running farm: N voters, N user endpoints, and their wiring.
struct Farm {
  FarmDescriptor descriptor;
  std::vector<UserEndpoint> users;
  std::vector<std::shared_ptr<VoterCell>> voters;

  std::vector<ActivityId> activities() const;
  Census census(const Fabric& fabric) const;
};

struct SpawnOptions {
  AlgorithmId algorithm;
};

/// Places one user module and one voter per descriptor entry, wires N user-voter links and
/// N(N-1)/2 voter-voter links, launches the voters, and marks the descriptor RUNNING.
Result<Farm> spawn_farm(FarmDescriptor& descriptor, const Metric& metric, Duration delta_t, Runtime& runtime,
                        SpawnOptions options = {});

/// Allows voter `v` of `farm` to route its output to `consumer` over a fresh link.
/// Must be called before any round starts.
LinkId attach_consumer(Runtime& runtime, const Farm& farm, std::size_t voter_index, ActivityId consumer);

}  // namespace vfarm
