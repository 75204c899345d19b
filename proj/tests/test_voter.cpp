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

#include "vfarm/runtime.hpp"

using namespace vfarm;
using namespace std::chrono_literals;

namespace {

constexpr Duration kDt{1000};

FarmDescriptor descriptor(std::uint32_t n) {
  FarmDescriptor d;
  for (std::uint32_t i = 1; i <= n; ++i) d = descriptor_add(d, NodeId{i}).value();
  return d;
}

Message input_msg(VoteValue v) { return Message{MessageTag::Input, VoterId::user(), 0, 0, std::move(v)}; }
Message request(MessageTag tag, std::uint32_t ref) { return Message{tag, VoterId::user(), 0, ref, {}}; }

struct TestFarm {
  VirtualRuntime rt;
  Farm farm;

  explicit TestFarm(std::uint32_t n, AlgorithmId alg = {}, Metric metric = default_metric) {
    auto d = descriptor(n);
    farm = spawn_farm(d, metric, kDt, rt, SpawnOptions{alg}).value();
  }

  void send(std::size_t user, Message m) {
    const auto& u = farm.users.at(user);
    REQUIRE(rt.fabric().transmit(u.link, u.user, m) == ErrorCode::None);
  }
  std::optional<Message> recv(std::size_t user, Duration timeout = kDt) {
    const auto& u = farm.users.at(user);
    return rt.await(u.user, u.link, timeout);
  }
  /// Next non-round message, skipping DONE/VOTED_VALUE notifications.
  std::optional<Message> reply(std::size_t user, std::uint32_t ref) {
    for (;;) {
      auto m = recv(user, 10 * kDt);
      if (!m || m->ref == ref) return m;
    }
  }
  RoundRecord record(std::size_t voter) const {
    return farm.voters.at(voter)->with_voter([](const Voter& v) {
      REQUIRE(v.history().size() == 1);
      return v.history().front();
    });
  }
};

double scalar_of(const std::optional<VoteValue>& v) {
  REQUIRE(v);
  return v->numeric_view()->at(0);
}

}  // namespace

TEST_CASE("TMR fault-free round") {
  TestFarm f(3);
  for (std::size_t i = 0; i < 3; ++i) f.send(i, input_msg(VoteValue::scalar(10.0 + i)));
  f.rt.settle(10 * kDt);
  for (std::size_t v = 0; v < 3; ++v) {
    const auto r = f.record(v);
    REQUIRE(r.slots.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(r.slots[s].valid);
      CHECK(scalar_of(r.slots[s].value) == 10.0 + s);
      CHECK(r.slots[s].origin.value == s + 1);
    }
    CHECK(r.broadcasts == 1);
    CHECK(r.resolved_at_broadcast == v + 1);
    CHECK(r.timeouts == 0);
    CHECK(r.completed_at == TimePoint(1));
    CHECK(r.outcome.failure == ErrorCode::NoMajority);
  }
}

TEST_CASE("every voter notifies its user with DONE and the voted value") {
  TestFarm f(3);
  for (std::size_t i = 0; i < 3; ++i) f.send(i, input_msg(VoteValue::scalar(i == 1 ? 9.0 : 5.0)));
  for (std::size_t i = 0; i < 3; ++i) {
    auto done = f.recv(i);
    REQUIRE(done);
    CHECK(done->tag == MessageTag::Done);
    CHECK(done->round == 1);
    auto voted = f.recv(i);
    REQUIRE(voted);
    CHECK(voted->tag == MessageTag::VotedValue);
    CHECK(scalar_of(std::get<VoteValue>(voted->payload)) == 5.0);
  }
}

TEST_CASE("crashed user costs one extra delta t") {
  TestFarm f(3);
  f.send(0, input_msg(VoteValue::scalar(1)));
  f.send(2, input_msg(VoteValue::scalar(1)));
  f.rt.settle(10 * kDt);
  for (std::size_t v = 0; v < 3; ++v) {
    const auto r = f.record(v);
    CHECK(r.slots[0].valid);
    CHECK_FALSE(r.slots[1].valid);
    CHECK(r.slots[2].valid);
    CHECK(r.completed_at <= TimePoint(1) + kDt);
    REQUIRE(r.outcome.ok());
    CHECK(scalar_of(r.outcome.value) == 1.0);
  }
  CHECK(f.record(0).timeouts + f.record(2).timeouts >= 1);
}

TEST_CASE("single voter farm") {
  TestFarm f(1);
  f.send(0, input_msg(VoteValue::from_string("solo")));
  f.rt.settle(kDt);
  const auto r = f.record(0);
  CHECK(f.farm.voters[0]->outbox().posted() == 2);
  CHECK(f.rt.fabric().frames_sent(f.farm.users[0].link, f.farm.voters[0]->activity()) == 2);
  REQUIRE(r.outcome.ok());
  CHECK(*r.outcome.value == VoteValue::from_string("solo"));
  CHECK(f.farm.census(f.rt.fabric()).virtual_links == 0);
}

TEST_CASE("fault cost bound and agreement for every set of crashed users") {
  for (std::uint32_t n = 2; n <= 5; ++n) {
    for (std::uint32_t mask = 0; mask + 1 < (1u << n); ++mask) {
      TestFarm f(n);
      std::uint32_t m = 0;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          ++m;
        } else {
          f.send(i, input_msg(VoteValue::scalar(7)));
        }
      }
      f.rt.settle(Duration(20 * kDt));
      const auto ref = f.record(0);
      for (std::uint32_t v = 0; v < n; ++v) {
        const auto r = f.record(v);
        CAPTURE(n);
        CAPTURE(mask);
        CHECK(r.completed_at <= TimePoint(1) + m * kDt);
        for (std::uint32_t s = 0; s < n; ++s) {
          CHECK(r.slots[s].valid == ((mask & (1u << s)) == 0));
          CHECK(r.slots[s].value == ref.slots[s].value);
        }
        CHECK(r.broadcasts == 1);
      }
    }
  }
}

TEST_CASE("GET and CLOSE during an open round are refused") {
  TestFarm f(3);
  f.send(0, input_msg(VoteValue::scalar(1)));
  f.send(0, request(MessageTag::Get, 1));
  auto get = f.reply(0, 1);
  REQUIRE(get);
  CHECK(get->tag == MessageTag::Refused);

  f.send(0, request(MessageTag::Close, 2));
  auto close = f.reply(0, 2);
  REQUIRE(close);
  CHECK(close->tag == MessageTag::Refused);
  CHECK(f.farm.voters[0]->live());

  f.send(1, input_msg(VoteValue::scalar(1)));
  f.send(2, input_msg(VoteValue::scalar(2)));
  f.rt.settle(10 * kDt);

  f.send(0, request(MessageTag::Get, 3));
  auto voted = f.reply(0, 3);
  REQUIRE(voted);
  CHECK(voted->tag == MessageTag::VotedValue);
  CHECK(scalar_of(std::get<VoteValue>(voted->payload)) == 1.0);

  f.send(0, request(MessageTag::Close, 4));
  auto done = f.reply(0, 4);
  REQUIRE(done);
  CHECK(done->tag == MessageTag::Done);
  CHECK_FALSE(f.farm.voters[0]->live());
}

TEST_CASE("GET before any round is refused") {
  TestFarm f(2);
  f.send(1, request(MessageTag::Get, 9));
  auto r = f.reply(1, 9);
  REQUIRE(r);
  CHECK(r->tag == MessageTag::Refused);
}

TEST_CASE("SET_ALGORITHM selects the voting algorithm") {
  TestFarm f(3, {}, euclidean_metric);
  const double xs[] = {1.0, 2.0, 10.0};
  for (std::size_t i = 0; i < 3; ++i) {
    f.send(i, Message{MessageTag::SetAlgorithm, VoterId::user(), 0, 0, AlgorithmId{AlgorithmKind::Median}});
  }
  for (std::size_t i = 0; i < 3; ++i) f.send(i, input_msg(VoteValue::scalar(xs[i])));
  f.rt.settle(10 * kDt);
  for (std::size_t v = 0; v < 3; ++v) CHECK(scalar_of(f.record(v).outcome.value) == 2.0);
}

TEST_CASE("vote failures are reported, not dropped") {
  TestFarm f(3);
  for (std::size_t i = 0; i < 3; ++i) f.send(i, input_msg(VoteValue::scalar(i)));
  REQUIRE(f.recv(0)->tag == MessageTag::Done);
  auto voted = f.recv(0);
  REQUIRE(voted);
  CHECK(voted->tag == MessageTag::VotedValue);
  CHECK(std::get<ErrorCode>(voted->payload) == ErrorCode::NoMajority);
}

TEST_CASE("SET_OUTPUT routes the voted value to an attached consumer") {
  TestFarm f(2);
  auto& fabric = f.rt.fabric();
  const auto sink = fabric.place(NodeId{1}, ActivityRole::Consumer);
  const auto link = attach_consumer(f.rt, f.farm, 0, sink);
  f.send(0, Message{MessageTag::SetOutput, VoterId::user(), 0, 0, sink});
  f.send(1, Message{MessageTag::SetOutput, VoterId::user(), 0, 0, ActivityId{4242}});  // unknown: ignored
  f.send(0, input_msg(VoteValue::scalar(3)));
  f.send(1, input_msg(VoteValue::scalar(3)));

  auto routed = f.rt.await(sink, link, 10 * kDt);
  REQUIRE(routed);
  CHECK(routed->tag == MessageTag::VotedValue);
  CHECK(scalar_of(std::get<VoteValue>(routed->payload)) == 3.0);

  REQUIRE(f.recv(1)->tag == MessageTag::Done);
  CHECK(f.recv(1)->tag == MessageTag::VotedValue);
  CHECK(f.farm.voters[1]->with_voter([](const Voter& v) { return v.discarded_messages(); }) == 1);
}

TEST_CASE("fellows time out on a crashed voter") {
  TestFarm f(3);
  f.farm.voters[0]->halt();
  for (std::size_t i = 0; i < 3; ++i) f.send(i, input_msg(VoteValue::scalar(4)));
  f.rt.settle(10 * kDt);
  for (std::size_t v = 1; v < 3; ++v) {
    const auto r = f.record(v);
    CHECK_FALSE(r.slots[0].valid);
    CHECK(r.slots[1].valid);
    CHECK(r.slots[2].valid);
    CHECK(r.completed_at == TimePoint(1) + kDt);
    CHECK(scalar_of(r.outcome.value) == 4.0);
  }
}

TEST_CASE("spawn_farm") {
  SUBCASE("census") {
    for (std::uint32_t n = 1; n <= 8; ++n) {
      TestFarm f(n);
      const auto c = f.farm.census(f.rt.fabric());
      CHECK(c.virtual_links == n * (n - 1) / 2);
      CHECK(c.local_links == n);
      CHECK(c.voters == n);
      CHECK(f.farm.descriptor.state == FarmState::Running);
    }
  }
  SUBCASE("bad descriptor state") {
    VirtualRuntime rt;
    FarmDescriptor d;
    CHECK(spawn_farm(d, default_metric, kDt, rt).error() == ErrorCode::BadState);
    d = descriptor(2);
    REQUIRE(spawn_farm(d, default_metric, kDt, rt));
    CHECK(d.state == FarmState::Running);
    CHECK(spawn_farm(d, default_metric, kDt, rt).error() == ErrorCode::BadState);
  }
  SUBCASE("shared nodes give local voter links") {
    VirtualRuntime rt;
    auto d = descriptor_add(descriptor_add(FarmDescriptor{}, NodeId{1}).value(), NodeId{1}).value();
    auto farm = spawn_farm(d, default_metric, kDt, rt).value();
    const auto c = farm.census(rt.fabric());
    CHECK(c.local_links == 3);
    CHECK(c.virtual_links == 0);
  }
}

TEST_CASE("broadcasts of the next round are deferred") {
  TestFarm f(2);
  f.send(0, input_msg(VoteValue::scalar(1)));
  f.send(1, input_msg(VoteValue::scalar(1)));
  f.rt.settle(10 * kDt);
  f.send(0, input_msg(VoteValue::scalar(2)));
  f.send(1, input_msg(VoteValue::scalar(2)));
  f.rt.settle(10 * kDt);
  for (std::size_t v = 0; v < 2; ++v) {
    f.farm.voters[v]->with_voter([](const Voter& voter) {
      REQUIRE(voter.history().size() == 2);
      CHECK(voter.history()[1].round == 2);
      CHECK(voter.history()[1].outcome.value == VoteValue::scalar(2));
    });
  }
}

TEST_CASE("threaded runtime completes a round on the wall clock") {
  ThreadedRuntime rt(FabricOptions{Duration(0), Duration(0), true});
  auto d = descriptor(3);
  auto farm = spawn_farm(d, default_metric, Duration(200ms), rt).value();
  for (std::size_t i = 0; i < 3; ++i) {
    rt.fabric().transmit(farm.users[i].link, farm.users[i].user, input_msg(VoteValue::scalar(6)));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    auto done = rt.await(farm.users[i].user, farm.users[i].link, 5s);
    REQUIRE(done);
    CHECK(done->tag == MessageTag::Done);
    auto voted = rt.await(farm.users[i].user, farm.users[i].link, 5s);
    REQUIRE(voted);
    CHECK(std::get<VoteValue>(voted->payload) == VoteValue::scalar(6));
  }
  rt.shutdown();
}
