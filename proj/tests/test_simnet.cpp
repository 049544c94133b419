#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "collsim/simnet.hpp"
#include "collsim/valuemodel.hpp"

using namespace collsim;
using simnet::Rank;
using simnet::RunResult;
using simnet::RunStatus;
using simnet::Simulator;
using simnet::SimOptions;
using simnet::Task;
using valuemodel::Buffer;
using valuemodel::DatatypeKind;

namespace {

SimOptions traced(simnet::SendMode mode = simnet::SendMode::Buffered) {
  SimOptions o;
  o.send_mode = mode;
  o.record_trace = true;
  return o;
}

}  // namespace

TEST_CASE("send to self, buffered, delivered by a later recv") {
  Simulator sim(1, traced());
  Buffer got;
  auto res = sim.run([&](Rank& self) -> Task {
    co_await self.send(0, 7, Buffer::of_int64({42}));
    got = co_await self.recv(0, 7);
  });
  CHECK(res.status == RunStatus::Completed);
  CHECK(got == Buffer::of_int64({42}));
  CHECK(res.messages_sent == 1);
  CHECK(res.messages_received == 1);
  CHECK(res.unreceived.empty());
}

TEST_CASE("per-channel FIFO: payloads arrive in send order") {
  Simulator sim(2);
  std::vector<Buffer> got;
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) {
      co_await self.send(1, 14, Buffer::of_int64({1}));
      co_await self.send(1, 14, Buffer::of_int64({2}));
    } else {
      got.push_back(co_await self.recv(0, 14));
      got.push_back(co_await self.recv(0, 14));
    }
  });
  CHECK(res.status == RunStatus::Completed);
  REQUIRE(got.size() == 2);
  CHECK(got[0] == Buffer::of_int64({1}));
  CHECK(got[1] == Buffer::of_int64({2}));
}

TEST_CASE("mutual recv with no sender deadlocks, naming both ranks") {
  Simulator sim(2);
  auto res = sim.run([&](Rank& self) -> Task {
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.recv_into(1 - self.rank(), 5, slot);
  });
  REQUIRE(res.status == RunStatus::Deadlock);
  REQUIRE(res.deadlock.size() == 2);
  CHECK(res.deadlock[0].rank == 0);
  CHECK(res.deadlock[1].rank == 1);
  REQUIRE(res.deadlock[0].waiting_for.size() == 1);
  CHECK(res.deadlock[0].waiting_for[0].kind == simnet::OpKind::Recv);
  CHECK(res.deadlock[0].waiting_for[0].peer == 1);
  CHECK(res.deadlock[0].waiting_for[0].tag == 5);
}

TEST_CASE("invalid destination rank is an error") {
  Simulator sim(2);
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) co_await self.send(2, 1, Buffer::of_int64({1}));
  });
  CHECK(res.status == RunStatus::Error);
  CHECK(res.error_rank == 0);
  CHECK(res.error.find("out of range") != std::string::npos);
}

TEST_CASE("negative tag is an error") {
  Simulator sim(1);
  auto res = sim.run([&](Rank& self) -> Task {
    co_await self.send(0, -1, Buffer::of_int64({1}));
  });
  CHECK(res.status == RunStatus::Error);
}

TEST_CASE("mutual sendrecv completes in synchronous mode") {
  Simulator sim(2, SimOptions{simnet::SendMode::Synchronous, false, 1000});
  std::vector<Buffer> got(2);
  auto res = sim.run([&](Rank& self) -> Task {
    const int peer = 1 - self.rank();
    Buffer mine = Buffer::of_int64({self.rank() + 10});
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.sendrecv(mine, peer, 3, slot, peer, 3);
    got[static_cast<std::size_t>(self.rank())] = slot;
  });
  REQUIRE(res.status == RunStatus::Completed);
  CHECK(got[0] == Buffer::of_int64({11}));
  CHECK(got[1] == Buffer::of_int64({10}));
}

TEST_CASE("head-to-head blocking sends deadlock in synchronous mode") {
  Simulator sim(2, SimOptions{simnet::SendMode::Synchronous, false, 1000});
  auto res = sim.run([&](Rank& self) -> Task {
    const int peer = 1 - self.rank();
    co_await self.send(peer, 3, Buffer::of_int64({1}));
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.recv_into(peer, 3, slot);
  });
  REQUIRE(res.status == RunStatus::Deadlock);
  CHECK(res.deadlock.size() == 2);
  CHECK(res.deadlock[0].waiting_for[0].kind == simnet::OpKind::Send);
}

TEST_CASE("the same program completes in buffered mode") {
  Simulator sim(2, SimOptions{simnet::SendMode::Buffered, false, 1000});
  auto res = sim.run([&](Rank& self) -> Task {
    const int peer = 1 - self.rank();
    co_await self.send(peer, 3, Buffer::of_int64({1}));
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.recv_into(peer, 3, slot);
  });
  CHECK(res.status == RunStatus::Completed);
}

TEST_CASE("sendrecv with self as both peers returns own payload") {
  for (auto mode : {simnet::SendMode::Buffered, simnet::SendMode::Synchronous}) {
    Simulator sim(1, SimOptions{mode, false, 1000});
    Buffer got;
    auto res = sim.run([&](Rank& self) -> Task {
      Buffer mine = Buffer::of_int64({5, 6});
      Buffer slot = Buffer::zeros(DatatypeKind::Int64, 2);
      co_await self.sendrecv(mine, 0, 9, slot, 0, 9);
      got = slot;
    });
    CHECK(res.status == RunStatus::Completed);
    CHECK(got == Buffer::of_int64({5, 6}));
  }
}

TEST_CASE("isend/irecv complete under waitall regardless of posting order") {
  Simulator sim(2);
  Buffer got = Buffer::zeros(DatatypeKind::Int64, 1);
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) {
      // recv posted before the matching send exists
      simnet::Request r = self.irecv(1, 4, got);
      std::vector<simnet::Request> reqs{r};
      co_await self.waitall(reqs);
    } else {
      simnet::Request s = self.isend(0, 4, Buffer::of_int64({77}));
      std::vector<simnet::Request> reqs{s};
      co_await self.waitall(reqs);
    }
  });
  REQUIRE(res.status == RunStatus::Completed);
  CHECK(got == Buffer::of_int64({77}));
}

TEST_CASE("waitall on an empty request set returns immediately") {
  Simulator sim(1);
  auto res = sim.run([&](Rank& self) -> Task {
    std::vector<simnet::Request> reqs;
    co_await self.waitall(reqs);
  });
  CHECK(res.status == RunStatus::Completed);
}

TEST_CASE("waitall on a foreign rank's request is a usage error") {
  Simulator sim(2);
  simnet::Request shared{};
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) {
      shared = self.isend(1, 2, Buffer::of_int64({1}));
      Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
      co_await self.recv_into(1, 3, slot);
    } else {
      std::vector<simnet::Request> reqs{shared};
      co_await self.waitall(reqs);  // not rank 1's request
    }
  });
  CHECK(res.status == RunStatus::Error);
  CHECK(res.error_rank == 1);
  CHECK(res.error.find("another rank") != std::string::npos);
}

TEST_CASE("replaying a recorded schedule reproduces the trace bit for bit") {
  auto program = [](Rank& self) -> Task {
    const int peer = self.rank() ^ 1;
    Buffer mine = Buffer::of_int64({self.rank()});
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.sendrecv(mine, peer, 14, slot, peer, 14);
    self.reduce_local(mine, slot, valuemodel::ReduceOp{});
  };
  Simulator sim(4, traced());
  RunResult first = sim.run(program, simnet::random_policy(99));
  REQUIRE(first.status == RunStatus::Completed);
  RunResult replay = sim.run(program, simnet::replay_policy(first.schedule));
  CHECK(replay.status == RunStatus::Completed);
  CHECK(replay.trace == first.trace);
  CHECK(replay.schedule.decisions == first.schedule.decisions);
}

TEST_CASE("unreceived messages are reported at termination") {
  Simulator sim(2);
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) co_await self.send(1, 8, Buffer::of_int64({1, 2, 3}));
  });
  REQUIRE(res.status == RunStatus::Completed);
  REQUIRE(res.unreceived.size() == 1);
  CHECK(res.unreceived[0].src == 0);
  CHECK(res.unreceived[0].dst == 1);
  CHECK(res.unreceived[0].tag == 8);
  CHECK(res.unreceived[0].payload.count() == 3);
  // conservation: sent == received + leftover
  CHECK(res.messages_sent == res.messages_received + res.unreceived.size());
}

TEST_CASE("matching is separated per communicator id") {
  Simulator sim(2, SimOptions{simnet::SendMode::Buffered, false, 50});
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) {
      co_await self.send(1, 5, Buffer::of_int64({1}));  // world comm
    } else {
      Rank dup = self.with_comm(simnet::kCommDup);
      Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
      co_await dup.recv_into(0, 5, slot);  // never matches the world-comm send
    }
  });
  REQUIRE(res.status == RunStatus::Deadlock);
  REQUIRE(res.deadlock.size() == 1);
  CHECK(res.deadlock[0].rank == 1);
  CHECK(res.deadlock[0].waiting_for[0].comm == simnet::kCommDup);
}

TEST_CASE("same tag on two communicators matches independently") {
  Simulator sim(2);
  Buffer got_world, got_dup;
  auto res = sim.run([&](Rank& self) -> Task {
    Rank dup = self.with_comm(simnet::kCommDup);
    if (self.rank() == 0) {
      co_await dup.send(1, 5, Buffer::of_int64({200}));
      co_await self.send(1, 5, Buffer::of_int64({100}));
    } else {
      got_world = co_await self.recv(0, 5);
      got_dup = co_await dup.recv(0, 5);
    }
  });
  REQUIRE(res.status == RunStatus::Completed);
  CHECK(got_world == Buffer::of_int64({100}));
  CHECK(got_dup == Buffer::of_int64({200}));
}

TEST_CASE("per-rank self-communicators stay isolated") {
  // any comm id works; give each rank its own and loop a message through it
  Simulator sim(3);
  std::vector<Buffer> got(3);
  auto res = sim.run([&](Rank& self) -> Task {
    Rank mine = self.with_comm(100 + self.rank());
    co_await mine.send(self.rank(), 2, Buffer::of_int64({self.rank() * 11}));
    got[static_cast<std::size_t>(self.rank())] = co_await mine.recv(self.rank(), 2);
  });
  REQUIRE(res.status == RunStatus::Completed);
  for (int r = 0; r < 3; ++r)
    CHECK(got[static_cast<std::size_t>(r)] == Buffer::of_int64({r * 11}));
}

TEST_CASE("step limit stops a run that cannot finish in budget") {
  Simulator sim(2, SimOptions{simnet::SendMode::Buffered, false, 10});
  auto res = sim.run([&](Rank& self) -> Task {
    const int peer = 1 - self.rank();
    for (int i = 0; i < 1000; ++i) {
      Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
      co_await self.sendrecv(Buffer::of_int64({i}), peer, 1, slot, peer, 1);
    }
  });
  CHECK(res.status == RunStatus::StepLimit);
}

TEST_CASE("shaped recv rejects a payload of the wrong size") {
  Simulator sim(2);
  auto res = sim.run([&](Rank& self) -> Task {
    if (self.rank() == 0) {
      co_await self.send(1, 2, Buffer::of_int64({1, 2, 3}));
    } else {
      Buffer slot = Buffer::zeros(DatatypeKind::Int64, 2);
      co_await self.recv_into(0, 2, slot);
    }
  });
  CHECK(res.status == RunStatus::Error);
  CHECK(res.error.find("count") != std::string::npos);
}

TEST_CASE("events of one rank appear in program order") {
  Simulator sim(2, traced());
  auto res = sim.run([&](Rank& self) -> Task {
    const int peer = 1 - self.rank();
    Buffer acc = Buffer::of_int64({self.rank()});
    Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
    co_await self.sendrecv(acc, peer, 14, slot, peer, 14);
    self.reduce_local(slot, acc, valuemodel::ReduceOp{});
    Buffer out = Buffer::zeros(DatatypeKind::Int64, 1);
    self.local_copy(acc, out);
  });
  REQUIRE(res.status == RunStatus::Completed);
  for (int r = 0; r < 2; ++r) {
    std::vector<simnet::EventKind> kinds;
    for (const auto& ev : res.trace)
      if (ev.rank == r) kinds.push_back(ev.kind);
    const std::vector<simnet::EventKind> expect{
        simnet::EventKind::SendrecvPost, simnet::EventKind::Send, simnet::EventKind::Recv,
        simnet::EventKind::ReduceLocal, simnet::EventKind::Copy, simnet::EventKind::Complete};
    CHECK(kinds == expect);
  }
  // logical timestamps strictly increase
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].step > res.trace[i - 1].step);
}

TEST_CASE("trace dump line format") {
  simnet::TraceEvent ev{12, simnet::EventKind::SendrecvPost, 3, 1, 14, 10};
  CHECK(simnet::format_trace_line(ev) == "12 3 sendrecv-post 1 14 10");
}

TEST_CASE("conservation: random message soup neither loses nor duplicates") {
  // A deterministic plan of sends per (src, dst); receivers drain their
  // column in src order, then everything must balance exactly.
  std::mt19937_64 rng(21);
  const int p = 5;
  int plan[5][5] = {};
  std::uniform_int_distribution<int> k(0, 3);
  for (auto& row : plan)
    for (int& cell : row) cell = k(rng);

  Simulator sim(p, traced());
  std::vector<std::vector<std::int64_t>> seen(5);
  auto res = sim.run([&](Rank& self) -> Task {
    const int me = self.rank();
    for (int dst = 0; dst < p; ++dst)
      for (int i = 0; i < plan[me][dst]; ++i)
        co_await self.send(dst, 6, Buffer::of_int64({me * 100 + i}));
    for (int src = 0; src < p; ++src)
      for (int i = 0; i < plan[src][me]; ++i) {
        Buffer b = co_await self.recv(src, 6);
        seen[static_cast<std::size_t>(me)].push_back(std::get<std::int64_t>(b.at(0)));
      }
  });
  REQUIRE(res.status == RunStatus::Completed);
  int planned = 0;
  for (auto& row : plan)
    for (int cell : row) planned += cell;
  CHECK(res.messages_sent == static_cast<std::uint64_t>(planned));
  CHECK(res.messages_received == static_cast<std::uint64_t>(planned));
  CHECK(res.unreceived.empty());
  // FIFO per channel: sequence numbers from one sender arrive ascending
  for (int me = 0; me < p; ++me) {
    std::size_t at = 0;
    for (int src = 0; src < p; ++src)
      for (int i = 0; i < plan[src][me]; ++i)
        CHECK(seen[static_cast<std::size_t>(me)][at++] == src * 100 + i);
  }
}

TEST_CASE("a schedule policy may not pick a blocked rank") {
  Simulator sim(2);
  simnet::Schedule bogus;
  bogus.decisions = {1, 1, 1, 1};  // rank 1 blocks immediately, cannot step again
  auto res = sim.run(
      [&](Rank& self) -> Task {
        if (self.rank() == 0) {
          co_await self.send(1, 1, Buffer::of_int64({1}));
        } else {
          Buffer slot = Buffer::zeros(DatatypeKind::Int64, 1);
          co_await self.recv_into(0, 1, slot);
        }
      },
      simnet::replay_policy(bogus));
  CHECK(res.status == RunStatus::Error);
  CHECK(res.error.find("not runnable") != std::string::npos);
}
