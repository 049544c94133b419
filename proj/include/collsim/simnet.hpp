#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "collsim/valuemodel.hpp"

namespace collsim::simnet {

using valuemodel::Buffer;

inline constexpr int kCommWorld = 0;
inline constexpr int kCommDup = 1;

/// Eager (unbounded buffered) vs rendezvous (zero-buffer) send semantics.
/// Collective algorithms are expected to run correctly under both.
enum class SendMode { Buffered, Synchronous };

const char* to_string(SendMode mode);

struct SimOptions {
  SendMode send_mode = SendMode::Buffered;
  bool record_trace = false;
  std::uint64_t step_limit = 1'000'000;  // scheduler decisions per run
};

/// A message in flight. The payload is copied at send time and immutable
/// afterwards; later mutation of the sender's buffer cannot alter it.
struct Envelope {
  int src = -1;
  int dst = -1;
  int tag = -1;
  int comm = kCommWorld;
  Buffer payload;
};

enum class EventKind { Send, Recv, SendrecvPost, ReduceLocal, Copy, Complete };
const char* to_string(EventKind kind);

struct TraceEvent {
  std::uint64_t step = 0;  // global logical timestamp
  EventKind kind = EventKind::Send;
  int rank = -1;
  int peer = -1;  // -1 for local ops and completion
  int tag = -1;   // -1 for local ops and completion
  std::int64_t count = 0;
  bool operator==(const TraceEvent&) const = default;
};

/// Dump line format: `step rank kind peer tag count`.
std::string format_trace_line(const TraceEvent& ev);

/// The sequence of scheduler picks (which runnable rank steps next).
/// Replaying a recorded Schedule reproduces the identical event trace.
struct Schedule {
  std::vector<int> decisions;
  std::uint64_t seed = 0;
};

/// Given the decision index and the (ascending) runnable set, returns the
/// rank to step next. Must return a member of the runnable set.
using SchedulePolicy = std::function<int(std::size_t index, const std::vector<int>& runnable)>;

SchedulePolicy lowest_rank_policy();
SchedulePolicy random_policy(std::uint64_t seed);
/// Forces the recorded decisions, then falls back to lowest-runnable-rank.
SchedulePolicy replay_policy(Schedule schedule);

/// Opaque handle to a nonblocking operation. Owned by the issuing rank;
/// waiting on another rank's request is a usage error.
struct Request {
  std::uint64_t id = 0;
};

enum class OpKind { Send, Recv };

struct PendingOp {
  OpKind kind = OpKind::Recv;
  int peer = -1;
  int tag = -1;
  int comm = kCommWorld;
  std::int64_t count = 0;
};
std::string describe(const PendingOp& op);

struct BlockedRank {
  int rank = -1;
  std::vector<PendingOp> waiting_for;
};

enum class RunStatus { Completed, Deadlock, Error, StepLimit };
const char* to_string(RunStatus status);

struct RunResult {
  RunStatus status = RunStatus::Completed;
  std::vector<BlockedRank> deadlock;  // filled iff status == Deadlock
  int error_rank = -1;
  std::string error;  // filled iff status == Error
  Schedule schedule;  // every decision actually taken
  std::vector<std::vector<int>> runnable_sets;  // runnable set at each decision
  std::vector<TraceEvent> trace;                // iff record_trace
  std::vector<Envelope> unreceived;  // messages left undelivered at termination
  std::uint64_t steps = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
};

struct SimUsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class World;

/// Cooperative coroutine run by the simulator. Rank programs and the
/// collective algorithms they call are Tasks; `co_await`ing a Task runs it
/// inline on the caller's rank.
struct Task {
  struct promise_type {
    std::coroutine_handle<> continuation;
    std::exception_ptr exception;

    Task get_return_object() {
      return Task{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
        auto c = h.promise().continuation;
        return c ? c : std::noop_coroutine();
      }
      void await_resume() noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { exception = std::current_exception(); }
  };

  explicit Task(std::coroutine_handle<promise_type> h) : handle(h) {}
  Task() = default;
  Task(Task&& o) noexcept : handle(std::exchange(o.handle, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      if (handle) handle.destroy();
      handle = std::exchange(o.handle, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() {
    if (handle) handle.destroy();
  }

  bool await_ready() const noexcept { return !handle || handle.done(); }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
    handle.promise().continuation = caller;
    return handle;
  }
  void await_resume() {
    if (handle && handle.promise().exception)
      std::rethrow_exception(handle.promise().exception);
  }

  std::coroutine_handle<promise_type> handle;
};

namespace detail {

// Awaiters post their operations in the constructor, which guaranteed copy
// elision runs at the awaiter's final address inside the co_await expression.
// They are pinned (no copy, no move) so slot pointers handed to the world
// stay valid while a request is outstanding.

/// Suspends the issuing rank until every listed request has completed.
struct WaitAwaiter {
  World* world;
  int rank;
  std::vector<std::uint64_t> ids;

  WaitAwaiter(World* w, int r, std::vector<std::uint64_t> i)
      : world(w), rank(r), ids(std::move(i)) {}
  WaitAwaiter(const WaitAwaiter&) = delete;
  WaitAwaiter& operator=(const WaitAwaiter&) = delete;

  bool await_ready() const;
  void await_suspend(std::coroutine_handle<> h);
  void await_resume() const;
};

/// recv that owns its destination slot and yields the received payload.
struct RecvValueAwaiter {
  World* world;
  int rank;
  std::uint64_t id = 0;
  Buffer slot;
  bool consumed = false;

  RecvValueAwaiter(World* w, int owner, int src, int tag, int comm);
  RecvValueAwaiter(const RecvValueAwaiter&) = delete;
  RecvValueAwaiter& operator=(const RecvValueAwaiter&) = delete;
  ~RecvValueAwaiter();

  bool await_ready() const;
  void await_suspend(std::coroutine_handle<> h);
  Buffer await_resume();
};

}  // namespace detail

/// A rank's handle into the simulated communicator: identity, size, and the
/// send/recv capabilities of the runtime, bound to one communicator id.
class Rank {
 public:
  int rank() const { return rank_; }
  int size() const;
  int comm() const { return comm_; }

  /// Same rank identity bound to a different communicator id (matching is
  /// fully separate per communicator).
  Rank with_comm(int comm_id) const { return Rank(world_, rank_, comm_id); }

  // Blocking point-to-point; co_await the returned awaiter.
  [[nodiscard]] detail::WaitAwaiter send(int dst, int tag, const Buffer& buf);
  [[nodiscard]] detail::WaitAwaiter recv_into(int src, int tag, Buffer& slot);
  [[nodiscard]] detail::RecvValueAwaiter recv(int src, int tag);

  /// Both halves are posted atomically before any suspension, so two ranks
  /// executing mutual sendrecv toward each other always complete.
  [[nodiscard]] detail::WaitAwaiter sendrecv(const Buffer& sendbuf, int dst, int stag,
                                             Buffer& recvslot, int src, int rtag);

  // Nonblocking ops: return immediately, complete under waitall.
  Request isend(int dst, int tag, const Buffer& buf);
  Request irecv(int src, int tag, Buffer& slot);
  [[nodiscard]] detail::WaitAwaiter waitall(std::span<const Request> requests);

  // Local data operations, recorded in the trace.
  void reduce_local(const Buffer& in, Buffer& inout, valuemodel::ReduceOp op);
  void reduce_local(const Buffer& in, Buffer& inout, const valuemodel::LocalReduceOp& op);
  void local_copy(const Buffer& src, Buffer& dst);

 private:
  friend class World;
  friend class Simulator;
  Rank(World* world, int rank, int comm) : world_(world), rank_(rank), comm_(comm) {}

  World* world_;
  int rank_;
  int comm_;
};

using Program = std::function<Task(Rank&)>;

/// Deterministic simulated message-passing runtime: runs P rank programs to
/// completion under a controllable scheduler with FIFO tag-matched delivery
/// and deadlock detection. Single-threaded; distinct instances share nothing,
/// so independent simulations may run on separate threads.
class Simulator {
 public:
  explicit Simulator(int nranks, SimOptions options = {});

  int size() const { return nranks_; }
  const SimOptions& options() const { return options_; }

  /// Steps rank programs one at a time (each step runs a rank until it
  /// blocks or finishes) until all complete or no progress is possible.
  RunResult run(const Program& program, const SchedulePolicy& policy = lowest_rank_policy());

 private:
  int nranks_;
  SimOptions options_;
};

}  // namespace collsim::simnet
