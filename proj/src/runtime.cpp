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

#include "vfarm/runtime.hpp"

#include <algorithm>
#include <tuple>

namespace vfarm {

namespace {

constexpr Duration kIdlePoll = std::chrono::milliseconds(20);
// Below every frame priority: a deadline due now fires before same-instant arrivals.
constexpr int kTimerPriority = -1;

}  // namespace

VoterCell::VoterCell(Fabric& fabric, Voter voter)
    : activity_(voter.links().self),
      listen_(voter.links().all()),
      voter_(std::move(voter)),
      outbox_(fabric, activity_) {}

bool VoterCell::live() const {
  return !halted() && !with_voter([](const Voter& v) { return v.closed(); });
}

// ---------------------------------------------------------------------------
// VirtualRuntime

VirtualRuntime::VirtualRuntime(FabricOptions options)
    : clock_(std::make_shared<VirtualClock>()), fabric_(std::make_unique<Fabric>(clock_, options)) {}

VirtualRuntime::~VirtualRuntime() = default;

void VirtualRuntime::launch(std::shared_ptr<VoterCell> cell) { cells_.push_back(std::move(cell)); }

std::optional<VirtualRuntime::Event> VirtualRuntime::next_event() const {
  std::optional<Event> best;
  auto consider = [&](const Event& e) {
    if (!best || std::tie(e.at, e.priority, e.seq) < std::tie(best->at, best->priority, best->seq)) best = e;
  };
  for (const auto& cell : cells_) {
    if (!cell->live()) continue;
    if (auto head = fabric_->peek(cell->activity(), cell->listen_links())) {
      consider(Event{head->deliver_at, head->priority, head->seq, cell.get(), head->link});
    }
    if (auto it = armed_.find(cell.get()); it != armed_.end()) {
      consider(Event{it->second.first, kTimerPriority, it->second.second, cell.get(), std::nullopt});
    }
  }
  return best;
}

void VirtualRuntime::dispatch(const Event& e) {
  clock_->advance_to(e.at);
  const auto now = clock_->now();
  auto* cell = e.cell;
  if (e.link) {
    auto msg = fabric_->take(cell->activity(), *e.link);
    if (msg) cell->with_voter([&](Voter& v) { v.on_message(*e.link, *msg, now, cell->outbox()); });
  } else {
    cell->with_voter([&](Voter& v) { v.on_timeout(now, cell->outbox()); });
  }
  cell->outbox().flush();
  ++events_;

  const auto deadline = cell->with_voter([](const Voter& v) { return v.deadline(); });
  auto it = armed_.find(cell);
  if (!deadline) {
    if (it != armed_.end()) armed_.erase(it);
  } else if (it == armed_.end() || it->second.first != *deadline || !e.link) {
    armed_[cell] = {*deadline, ++timer_seq_};
  }
}

bool VirtualRuntime::step(TimePoint limit) {
  auto e = next_event();
  if (!e || e->at > limit) return false;
  dispatch(*e);
  return true;
}

std::optional<Message> VirtualRuntime::await(ActivityId me, LinkId link, Duration timeout) {
  const TimePoint deadline = clock_->now() + timeout;
  const LinkId links[] = {link};
  for (;;) {
    const auto mine = fabric_->peek(me, links);
    const auto ev = next_event();
    const bool mine_first =
        mine && mine->deliver_at <= deadline &&
        (!ev || std::tie(mine->deliver_at, mine->priority, mine->seq) < std::tie(ev->at, ev->priority, ev->seq));
    if (mine_first) {
      clock_->advance_to(mine->deliver_at);
      if (auto msg = fabric_->take(me, link)) return msg;
      continue;
    }
    if (ev && ev->at <= deadline) {
      dispatch(*ev);
      continue;
    }
    clock_->advance_to(deadline);
    return std::nullopt;
  }
}

void VirtualRuntime::settle(Duration horizon) {
  const TimePoint limit = clock_->now() + horizon;
  while (step(limit)) {
  }
}

// ---------------------------------------------------------------------------
// ThreadedRuntime

ThreadedRuntime::ThreadedRuntime(FabricOptions options)
    : clock_(std::make_shared<RealClock>()), fabric_(std::make_unique<Fabric>(clock_, options)) {}

ThreadedRuntime::~ThreadedRuntime() { shutdown(); }

void ThreadedRuntime::launch(std::shared_ptr<VoterCell> cell) {
  cells_.push_back(cell);
  threads_.emplace_back([this, cell](std::stop_token st) { voter_main(st, cell); });
  threads_.emplace_back([f = fabric_.get(), cell](std::stop_token st) { sender_main(st, *f, cell); });
}

void ThreadedRuntime::voter_main(std::stop_token stop, std::shared_ptr<VoterCell> cell) {
  while (!stop.stop_requested()) {
    if (cell->halted()) return;  // silent crash: links stay open
    const auto [closed, deadline] =
        cell->with_voter([](const Voter& v) { return std::pair(v.closed(), v.deadline()); });
    if (closed) return;
    const TimePoint now = clock_->now();
    if (deadline && *deadline <= now) {
      cell->with_voter([&](Voter& v) { v.on_timeout(now, cell->outbox()); });
      continue;
    }
    Duration wait = deadline ? std::min(*deadline - now, kIdlePoll) : kIdlePoll;
    wait = std::max(wait, Duration(1));
    auto ev = fabric_->receive_any(cell->activity(), cell->listen_links(), wait);
    if (cell->halted()) return;
    switch (ev.status) {
      case ReceiveStatus::Arrived:
        cell->with_voter([&](Voter& v) { v.on_message(ev.link, *ev.message, clock_->now(), cell->outbox()); });
        break;
      case ReceiveStatus::Down:
        cell->with_voter([&](Voter& v) { v.abort_round(clock_->now(), cell->outbox()); });
        return;
      case ReceiveStatus::TimedOut:
        break;
    }
  }
}

void ThreadedRuntime::sender_main(std::stop_token stop, Fabric& fabric, std::shared_ptr<VoterCell> cell) {
  while (auto e = cell->outbox().wait_take(stop)) fabric.transmit(e->link, cell->activity(), e->message);
}

std::optional<Message> ThreadedRuntime::await(ActivityId me, LinkId link, Duration timeout) {
  const LinkId links[] = {link};
  auto ev = fabric_->receive_any(me, links, std::max(timeout, Duration(1)));
  if (ev.status == ReceiveStatus::Arrived) return std::move(ev.message);
  return std::nullopt;
}

void ThreadedRuntime::settle(Duration horizon) {
  const TimePoint limit = clock_->now() + horizon;
  while (clock_->now() < limit) {
    const bool busy = std::any_of(cells_.begin(), cells_.end(), [](const auto& c) {
      if (!c->live()) return false;
      const bool collecting =
          c->with_voter([](const Voter& v) { return v.round().phase == RoundPhase::Collecting; });
      return collecting || c->outbox().pending() > 0;
    });
    if (!busy) return;
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
}

void ThreadedRuntime::shutdown() {
  if (stopped_) return;
  stopped_ = true;
  fabric_->shutdown();
  for (auto& t : threads_) t.request_stop();
  threads_.clear();  // joins
}

// ---------------------------------------------------------------------------
// Farm wiring

std::vector<ActivityId> Farm::activities() const {
  std::vector<ActivityId> out;
  for (const auto& u : users) out.push_back(u.user);
  for (const auto& v : voters) out.push_back(v->activity());
  return out;
}

Census Farm::census(const Fabric& fabric) const {
  const auto scope = activities();
  return fabric.census(scope);
}

Result<Farm> spawn_farm(FarmDescriptor& descriptor, const Metric& metric, Duration delta_t, Runtime& runtime,
                        SpawnOptions options) {
  if (descriptor.state != FarmState::Described || descriptor.nodes.empty()) return ErrorCode::BadState;
  if (delta_t <= Duration::zero()) return ErrorCode::BadState;
  auto& fabric = runtime.fabric();
  const auto n = descriptor.cardinality();

  Farm farm;
  std::vector<ActivityId> voter_ids(n);
  std::vector<std::vector<LinkId>> peer_links(n, std::vector<LinkId>(n));
  try {
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = std::to_string(i + 1);
      farm.users.push_back({fabric.place(descriptor.nodes[i], ActivityRole::User, "user " + label), {}});
      voter_ids[i] = fabric.place(descriptor.nodes[i], ActivityRole::Voter, "voter " + label);
    }
    for (std::size_t i = 0; i < n; ++i) farm.users[i].link = fabric.connect(farm.users[i].user, voter_ids[i]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        peer_links[i][j] = peer_links[j][i] = fabric.connect(voter_ids[i], voter_ids[j]);
      }
    }
  } catch (const TransportError&) {
    return ErrorCode::TransportDown;
  }

  farm.descriptor = descriptor;
  farm.descriptor.state = FarmState::Running;
  for (std::size_t i = 0; i < n; ++i) {
    VoterConfig cfg{VoterId{static_cast<std::uint32_t>(i + 1)}, farm.descriptor, delta_t, metric,
                    options.algorithm, farm.users[i].user};
    VoterLinks links{voter_ids[i], farm.users[i].user, farm.users[i].link, voter_ids, peer_links[i], {}};
    farm.voters.push_back(std::make_shared<VoterCell>(fabric, Voter(std::move(cfg), std::move(links))));
  }
  for (const auto& cell : farm.voters) runtime.launch(cell);
  descriptor.state = FarmState::Running;
  return farm;
}

LinkId attach_consumer(Runtime& runtime, const Farm& farm, std::size_t voter_index, ActivityId consumer) {
  const auto& cell = farm.voters.at(voter_index);
  const auto link = runtime.fabric().connect(cell->activity(), consumer);
  cell->with_voter([&](Voter& v) { v.add_consumer(consumer, link); });
  return link;
}

}  // namespace vfarm
