#include "collsim/simnet.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace collsim::simnet {

const char* to_string(SendMode mode) {
  return mode == SendMode::Buffered ? "buffered" : "sync";
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Send:
      return "send";
    case EventKind::Recv:
      return "recv";
    case EventKind::SendrecvPost:
      return "sendrecv-post";
    case EventKind::ReduceLocal:
      return "reduce-local";
    case EventKind::Copy:
      return "copy";
    case EventKind::Complete:
      return "complete";
  }
  return "?";
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed:
      return "completed";
    case RunStatus::Deadlock:
      return "deadlock";
    case RunStatus::Error:
      return "error";
    case RunStatus::StepLimit:
      return "step-limit";
  }
  return "?";
}

std::string format_trace_line(const TraceEvent& ev) {
  std::ostringstream os;
  os << ev.step << ' ' << ev.rank << ' ' << to_string(ev.kind) << ' ' << ev.peer << ' '
     << ev.tag << ' ' << ev.count;
  return os.str();
}

std::string describe(const PendingOp& op) {
  std::ostringstream os;
  os << (op.kind == OpKind::Send ? "send to " : "recv from ") << op.peer << " tag " << op.tag
     << " comm " << op.comm;
  return os.str();
}

SchedulePolicy lowest_rank_policy() {
  return [](std::size_t, const std::vector<int>& runnable) { return runnable.front(); };
}

SchedulePolicy random_policy(std::uint64_t seed) {
  return [rng = std::mt19937_64(seed)](std::size_t, const std::vector<int>& runnable) mutable {
    std::uniform_int_distribution<std::size_t> pick(0, runnable.size() - 1);
    return runnable[pick(rng)];
  };
}

SchedulePolicy replay_policy(Schedule schedule) {
  return [s = std::move(schedule)](std::size_t index, const std::vector<int>& runnable) {
    if (index < s.decisions.size()) return s.decisions[index];
    return runnable.front();
  };
}

namespace {

struct RequestState {
  int owner = -1;
  OpKind kind = OpKind::Recv;
  int peer = -1;
  int tag = -1;
  int comm = kCommWorld;
  std::int64_t count = 0;  // send: payload count; recv: expected count (-1 if open)
  bool completed = false;
  bool cancelled = false;
  Buffer* slot = nullptr;          // recv destination
  bool shaped = false;             // validate payload against the slot's shape
  std::optional<Buffer> payload;   // sync-mode send waiting to be paired
};

struct ChannelKey {
  int src, dst, tag, comm;
  auto operator<=>(const ChannelKey&) const = default;
};

struct Channel {
  std::deque<Envelope> mail;                  // buffered mode, undelivered
  std::deque<std::uint64_t> pending_recvs;    // posted, unmatched
  std::deque<std::uint64_t> pending_sends;    // sync mode, unpaired
};

enum class RankState { Ready, Blocked, Done };

}  // namespace

class World {
 public:
  World(int nranks, SimOptions options) : nranks_(nranks), options_(options) {
    if (nranks < 1) throw SimUsageError("simulator needs at least one rank");
  }

  int size() const { return nranks_; }

  // ---- posting -------------------------------------------------------

  std::uint64_t post_send(int rank, int comm, int dst, int tag, const Buffer& buf) {
    check_peer(dst, "send: destination");
    check_tag(tag);
    std::uint64_t id = new_request(rank, OpKind::Send, dst, tag, comm, buf.count());
    trace(EventKind::Send, rank, dst, tag, buf.count());
    ++messages_sent_;

    Channel& ch = channels_[ChannelKey{rank, dst, tag, comm}];
    if (options_.send_mode == SendMode::Buffered) {
      requests_[index(id)].completed = true;
      Envelope env{rank, dst, tag, comm, buf};
      if (auto rid = pop_live_recv(ch)) {
        deliver(*rid, std::move(env));
      } else {
        ch.mail.push_back(std::move(env));
      }
    } else {
      if (auto rid = pop_live_recv(ch)) {
        deliver(*rid, Envelope{rank, dst, tag, comm, buf});
        complete_request(id);
      } else {
        requests_[index(id)].payload = buf;  // copied now; sender may mutate later
        ch.pending_sends.push_back(id);
      }
    }
    return id;
  }

  std::uint64_t post_recv(int rank, int comm, int src, int tag, Buffer* slot, bool shaped) {
    check_peer(src, "recv: source");
    check_tag(tag);
    std::uint64_t id =
        new_request(rank, OpKind::Recv, src, tag, comm, shaped ? slot->count() : -1);
    RequestState& req = requests_[index(id)];
    req.slot = slot;
    req.shaped = shaped;

    Channel& ch = channels_[ChannelKey{src, rank, tag, comm}];
    if (!ch.mail.empty()) {
      Envelope env = std::move(ch.mail.front());
      ch.mail.pop_front();
      deliver(id, std::move(env));
    } else if (!ch.pending_sends.empty()) {
      std::uint64_t sid = ch.pending_sends.front();
      ch.pending_sends.pop_front();
      RequestState& s = requests_[index(sid)];
      deliver(id, Envelope{s.owner, rank, tag, comm, std::move(*s.payload)});
      s.payload.reset();
      complete_request(sid);
    } else {
      ch.pending_recvs.push_back(id);
    }
    return id;
  }

  void cancel_recv(std::uint64_t id) {
    RequestState& req = requests_[index(id)];
    if (!req.completed) req.cancelled = true;
  }

  void check_owned(int rank, std::uint64_t id, const char* who) const {
    if (id == 0 || id > requests_.size())
      throw SimUsageError(std::string(who) + ": unknown request");
    if (requests_[index(id)].owner != rank)
      throw SimUsageError(std::string(who) + ": request belongs to another rank");
  }

  // ---- wait/block ----------------------------------------------------

  bool request_completed(std::uint64_t id) const { return requests_[index(id)].completed; }

  bool all_completed(const std::vector<std::uint64_t>& ids) const {
    return std::all_of(ids.begin(), ids.end(),
                       [&](std::uint64_t id) { return request_completed(id); });
  }

  void block(int rank, const std::vector<std::uint64_t>& ids, std::coroutine_handle<> h) {
    RankRt& rt = rts_[static_cast<std::size_t>(rank)];
    rt.wait_set.clear();
    for (std::uint64_t id : ids)
      if (!request_completed(id)) rt.wait_set.push_back(id);
    assert(!rt.wait_set.empty());
    rt.state = RankState::Blocked;
    rt.resume_point = h;
  }

  // ---- trace ---------------------------------------------------------

  void trace(EventKind kind, int rank, int peer, int tag, std::int64_t count) {
    if (!options_.record_trace) return;
    trace_.push_back(TraceEvent{event_seq_++, kind, rank, peer, tag, count});
  }

  // ---- run loop ------------------------------------------------------

  RunResult run(const Program& program, const SchedulePolicy& policy) {
    rank_handles_.reserve(static_cast<std::size_t>(nranks_));
    for (int r = 0; r < nranks_; ++r) rank_handles_.push_back(Rank(this, r, kCommWorld));
    rts_.resize(static_cast<std::size_t>(nranks_));
    for (int r = 0; r < nranks_; ++r) {
      RankRt& rt = rts_[static_cast<std::size_t>(r)];
      rt.task = program(rank_handles_[static_cast<std::size_t>(r)]);
      rt.resume_point = rt.task.handle;
    }

    RunResult out;
    while (true) {
      std::vector<int> runnable;
      for (int r = 0; r < nranks_; ++r)
        if (rts_[static_cast<std::size_t>(r)].state == RankState::Ready) runnable.push_back(r);

      if (runnable.empty()) {
        bool all_done = std::all_of(rts_.begin(), rts_.end(), [](const RankRt& rt) {
          return rt.state == RankState::Done;
        });
        if (all_done) {
          out.status = RunStatus::Completed;
          collect_unreceived(out);
        } else {
          out.status = RunStatus::Deadlock;
          collect_blocked(out);
        }
        break;
      }
      if (out.steps >= options_.step_limit) {
        out.status = RunStatus::StepLimit;
        break;
      }

      int pick = policy(out.schedule.decisions.size(), runnable);
      if (std::find(runnable.begin(), runnable.end(), pick) == runnable.end()) {
        out.status = RunStatus::Error;
        out.error = "schedule policy picked a rank that is not runnable";
        break;
      }
      out.runnable_sets.push_back(std::move(runnable));
      out.schedule.decisions.push_back(pick);
      ++out.steps;

      RankRt& rt = rts_[static_cast<std::size_t>(pick)];
      rt.resume_point.resume();

      if (rt.task.handle.done()) {
        if (rt.task.handle.promise().exception) {
          out.status = RunStatus::Error;
          out.error_rank = pick;
          try {
            std::rethrow_exception(rt.task.handle.promise().exception);
          } catch (const std::exception& e) {
            out.error = e.what();
          } catch (...) {
            out.error = "unknown error";
          }
          break;
        }
        rt.state = RankState::Done;
        trace(EventKind::Complete, pick, -1, -1, 0);
      }
      // otherwise the rank suspended and block() already marked it Blocked
    }

    out.messages_sent = messages_sent_;
    out.messages_received = messages_received_;
    out.trace = std::move(trace_);
    return out;
  }

 private:
  friend class Rank;

  struct RankRt {
    RankState state = RankState::Ready;
    Task task;
    std::coroutine_handle<> resume_point;
    std::vector<std::uint64_t> wait_set;
  };

  static std::size_t index(std::uint64_t id) { return static_cast<std::size_t>(id - 1); }

  std::uint64_t new_request(int owner, OpKind kind, int peer, int tag, int comm,
                            std::int64_t count) {
    RequestState req;
    req.owner = owner;
    req.kind = kind;
    req.peer = peer;
    req.tag = tag;
    req.comm = comm;
    req.count = count;
    requests_.push_back(std::move(req));
    return requests_.size();
  }

  void check_peer(int peer, const char* what) const {
    if (peer < 0 || peer >= nranks_) {
      std::ostringstream os;
      os << what << " rank " << peer << " out of range [0," << nranks_ << ")";
      throw SimUsageError(os.str());
    }
  }

  static void check_tag(int tag) {
    if (tag < 0) throw SimUsageError("tag must be non-negative");
  }

  std::optional<std::uint64_t> pop_live_recv(Channel& ch) {
    while (!ch.pending_recvs.empty()) {
      std::uint64_t id = ch.pending_recvs.front();
      ch.pending_recvs.pop_front();
      if (!requests_[index(id)].cancelled) return id;
    }
    return std::nullopt;
  }

  void deliver(std::uint64_t rid, Envelope env) {
    RequestState& req = requests_[index(rid)];
    assert(req.kind == OpKind::Recv && !req.completed);
    if (req.shaped) {
      if (env.payload.datatype() != req.slot->datatype())
        throw SimUsageError("recv: datatype of incoming message does not match slot");
      if (env.payload.count() != req.slot->count())
        throw SimUsageError("recv: count of incoming message does not match slot");
    }
    trace(EventKind::Recv, req.owner, env.src, env.tag, env.payload.count());
    *req.slot = std::move(env.payload);
    ++messages_received_;
    complete_request(rid);
  }

  void complete_request(std::uint64_t id) {
    RequestState& req = requests_[index(id)];
    req.completed = true;
    RankRt& rt = rts_[static_cast<std::size_t>(req.owner)];
    if (rt.state != RankState::Blocked) return;
    std::erase(rt.wait_set, id);
    if (rt.wait_set.empty()) rt.state = RankState::Ready;
  }

  void collect_blocked(RunResult& out) const {
    for (int r = 0; r < nranks_; ++r) {
      const RankRt& rt = rts_[static_cast<std::size_t>(r)];
      if (rt.state != RankState::Blocked) continue;
      BlockedRank b;
      b.rank = r;
      for (std::uint64_t id : rt.wait_set) {
        const RequestState& req = requests_[index(id)];
        b.waiting_for.push_back(PendingOp{req.kind, req.peer, req.tag, req.comm, req.count});
      }
      out.deadlock.push_back(std::move(b));
    }
  }

  void collect_unreceived(RunResult& out) const {
    for (const auto& [key, ch] : channels_) {
      for (const Envelope& env : ch.mail) out.unreceived.push_back(env);
      for (std::uint64_t sid : ch.pending_sends) {
        const RequestState& req = requests_[index(sid)];
        if (req.payload)
          out.unreceived.push_back(Envelope{req.owner, key.dst, key.tag, key.comm, *req.payload});
      }
    }
  }

  int nranks_;
  SimOptions options_;
  std::uint64_t event_seq_ = 0;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t messages_received_ = 0;
  std::vector<TraceEvent> trace_;
  std::vector<RequestState> requests_;
  std::map<ChannelKey, Channel> channels_;
  std::vector<Rank> rank_handles_;
  // Declared last: destroying coroutine frames may cancel requests, so the
  // request table and channels must still be alive.
  std::vector<RankRt> rts_;
};

// ---- awaiters ---------------------------------------------------------

namespace detail {

bool WaitAwaiter::await_ready() const { return world->all_completed(ids); }

void WaitAwaiter::await_suspend(std::coroutine_handle<> h) { world->block(rank, ids, h); }

void WaitAwaiter::await_resume() const { assert(world->all_completed(ids)); }

RecvValueAwaiter::RecvValueAwaiter(World* w, int owner, int src, int tag, int comm)
    : world(w), rank(owner) {
  id = w->post_recv(owner, comm, src, tag, &slot, /*shaped=*/false);
}

RecvValueAwaiter::~RecvValueAwaiter() {
  if (!consumed) world->cancel_recv(id);
}

bool RecvValueAwaiter::await_ready() const { return world->request_completed(id); }

void RecvValueAwaiter::await_suspend(std::coroutine_handle<> h) { world->block(rank, {id}, h); }

Buffer RecvValueAwaiter::await_resume() {
  consumed = true;
  return std::move(slot);
}

}  // namespace detail

// ---- Rank -------------------------------------------------------------

int Rank::size() const { return world_->size(); }

detail::WaitAwaiter Rank::send(int dst, int tag, const Buffer& buf) {
  std::uint64_t id = world_->post_send(rank_, comm_, dst, tag, buf);
  return detail::WaitAwaiter(world_, rank_, {id});
}

detail::WaitAwaiter Rank::recv_into(int src, int tag, Buffer& slot) {
  std::uint64_t id = world_->post_recv(rank_, comm_, src, tag, &slot, /*shaped=*/true);
  return detail::WaitAwaiter(world_, rank_, {id});
}

detail::RecvValueAwaiter Rank::recv(int src, int tag) {
  return detail::RecvValueAwaiter(world_, rank_, src, tag, comm_);
}

detail::WaitAwaiter Rank::sendrecv(const Buffer& sendbuf, int dst, int stag, Buffer& recvslot,
                                   int src, int rtag) {
  world_->trace(EventKind::SendrecvPost, rank_, dst, stag, sendbuf.count());
  // Both halves posted before any suspension; mutual exchanges cannot hang.
  std::uint64_t sid = world_->post_send(rank_, comm_, dst, stag, sendbuf);
  std::uint64_t rid = world_->post_recv(rank_, comm_, src, rtag, &recvslot, /*shaped=*/true);
  return detail::WaitAwaiter(world_, rank_, {sid, rid});
}

Request Rank::isend(int dst, int tag, const Buffer& buf) {
  return Request{world_->post_send(rank_, comm_, dst, tag, buf)};
}

Request Rank::irecv(int src, int tag, Buffer& slot) {
  return Request{world_->post_recv(rank_, comm_, src, tag, &slot, /*shaped=*/true)};
}

detail::WaitAwaiter Rank::waitall(std::span<const Request> requests) {
  std::vector<std::uint64_t> ids;
  ids.reserve(requests.size());
  for (const Request& r : requests) {
    world_->check_owned(rank_, r.id, "waitall");
    ids.push_back(r.id);
  }
  return detail::WaitAwaiter(world_, rank_, std::move(ids));
}

void Rank::reduce_local(const Buffer& in, Buffer& inout, valuemodel::ReduceOp op) {
  valuemodel::reduce_local(in, inout, op);
  world_->trace(EventKind::ReduceLocal, rank_, -1, -1, inout.count());
}

void Rank::reduce_local(const Buffer& in, Buffer& inout, const valuemodel::LocalReduceOp& op) {
  op.apply(in, inout);
  world_->trace(EventKind::ReduceLocal, rank_, -1, -1, inout.count());
}

void Rank::local_copy(const Buffer& src, Buffer& dst) {
  valuemodel::local_copy(src, dst);
  world_->trace(EventKind::Copy, rank_, -1, -1, src.count());
}

// ---- Simulator --------------------------------------------------------

Simulator::Simulator(int nranks, SimOptions options) : nranks_(nranks), options_(options) {
  if (nranks < 1) throw SimUsageError("simulator needs at least one rank");
}

RunResult Simulator::run(const Program& program, const SchedulePolicy& policy) {
  World world(nranks_, options_);
  return world.run(program, policy);
}

}  // namespace collsim::simnet
