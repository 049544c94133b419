#include "collsim/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace collsim::verify {

using collectives::AllreduceParams;
using valuemodel::Rational;
using valuemodel::ReduceOp;
using valuemodel::Scalar;

const char* to_string(Algorithm alg) {
  return alg == Algorithm::RecursiveDoubling ? "rd" : "rsag";
}

std::optional<Algorithm> parse_algorithm(const std::string& s) {
  if (s == "rd") return Algorithm::RecursiveDoubling;
  if (s == "rsag") return Algorithm::ReduceScatterAllgather;
  return std::nullopt;
}

const char* to_string(Placement placement) {
  return placement == Placement::InPlace ? "inplace" : "outofplace";
}

std::string mode_string(simnet::SendMode mode, Placement placement) {
  return std::string(simnet::to_string(mode)) + "/" + to_string(placement);
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Pass:
      return "pass";
    case Outcome::Mismatch:
      return "mismatch";
    case Outcome::Deadlock:
      return "deadlock";
    case Outcome::Error:
      return "error";
  }
  return "?";
}

const char* to_string(InputSource source) {
  switch (source) {
    case InputSource::AppendixC:
      return "appendixc";
    case InputSource::SmallDomain:
      return "smalldomain";
    case InputSource::Random:
      return "random";
  }
  return "?";
}

std::optional<InputSource> parse_input_source(const std::string& s) {
  if (s == "appendixc") return InputSource::AppendixC;
  if (s == "smalldomain") return InputSource::SmallDomain;
  if (s == "random") return InputSource::Random;
  return std::nullopt;
}

int ceil_log2(int p) {
  if (p <= 1) return 0;
  return collectives::log2floor(p - 1) + 1;
}

std::uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  if (!std::isfinite(a) || !std::isfinite(b))
    return std::numeric_limits<std::uint64_t>::max();
  // map to a monotone integer line; adjacent doubles are 1 apart
  auto ordered = [](double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return (u >> 63) ? ~u : (u | 0x8000000000000000ull);
  };
  const std::uint64_t ka = ordered(a), kb = ordered(b);
  return ka > kb ? ka - kb : kb - ka;
}

ComparePolicy compare_policy(DatatypeKind dt, ReduceKind op, int p,
                             std::optional<std::uint64_t> ulp_override) {
  if (dt == DatatypeKind::Float64 &&
      (op == ReduceKind::Sum || op == ReduceKind::Prod)) {
    const std::uint64_t threshold =
        ulp_override ? *ulp_override : 4ull * static_cast<std::uint64_t>(ceil_log2(p));
    return ComparePolicy{false, threshold};
  }
  return ComparePolicy{true, 0};
}

CompareResult compare_buffers(const Buffer& expected, const Buffer& actual,
                              const ComparePolicy& policy) {
  if (expected.datatype() != actual.datatype() || expected.count() != actual.count())
    throw std::invalid_argument("compare_buffers: shape mismatch");
  CompareResult out;
  if (policy.exact) {
    for (std::int64_t i = 0; i < expected.count(); ++i) {
      const Scalar e = expected.at(i), a = actual.at(i);
      if (!(e == a)) {
        out.first = Mismatch{-1, i, valuemodel::to_string(e), valuemodel::to_string(a), 0};
        break;
      }
    }
    return out;
  }
  // Float64 reassociation-tolerant comparison; distribution reported even
  // when everything is within threshold.
  out.ulp.relevant = true;
  double sum = 0;
  for (std::int64_t i = 0; i < expected.count(); ++i) {
    const double e = std::get<double>(expected.at(i));
    const double a = std::get<double>(actual.at(i));
    const std::uint64_t d = ulp_distance(e, a);
    out.ulp.max = std::max(out.ulp.max, d);
    sum += static_cast<double>(d);
    ++out.ulp.samples;
    if (d > policy.ulp_threshold && !out.first)
      out.first = Mismatch{-1, i, valuemodel::to_string(Scalar{e}),
                           valuemodel::to_string(Scalar{a}), d};
  }
  if (out.ulp.samples) out.ulp.mean = sum / static_cast<double>(out.ulp.samples);
  return out;
}

// ---- input generation ---------------------------------------------------

namespace {

Scalar scalar_from_int(DatatypeKind dt, std::int64_t v) {
  switch (dt) {
    case DatatypeKind::Int32:
      return static_cast<std::int32_t>(v);
    case DatatypeKind::Int64:
      return v;
    case DatatypeKind::Float64:
      return static_cast<double>(v);
    case DatatypeKind::ExactRational:
      return Rational(v);
  }
  throw std::invalid_argument("scalar_from_int: bad datatype");
}

Buffer buffer_from_ints(DatatypeKind dt, const std::vector<std::int64_t>& vals) {
  Buffer b = Buffer::zeros(dt, static_cast<std::int64_t>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    b.set(static_cast<std::int64_t>(i), scalar_from_int(dt, vals[i]));
  return b;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t case_seed(std::uint64_t base, const CaseParams& params, int trial) {
  std::ostringstream key;
  key << to_string(params.alg) << '|' << params.p << '|' << params.n << '|'
      << valuemodel::to_string(params.op) << '|' << valuemodel::to_string(params.datatype)
      << '|' << mode_string(params.send_mode, params.placement) << '|' << trial;
  return fnv1a(key.str()) ^ base;
}

}  // namespace

CaseInputs affine_inputs(int p, std::int64_t n, DatatypeKind dt) {
  CaseInputs inputs;
  inputs.label = "appendixc";
  for (int r = 0; r < p; ++r) {
    std::vector<std::int64_t> vals(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = r + i;
    inputs.per_rank.push_back(buffer_from_ints(dt, vals));
  }
  return inputs;
}

CaseInputs random_inputs(int p, std::int64_t n, DatatypeKind dt, std::uint64_t seed,
                         int trial) {
  CaseInputs inputs;
  inputs.label = "random#" + std::to_string(trial);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> small_int(-99, 99);
  std::uniform_int_distribution<std::int64_t> num(-9, 9);
  std::uniform_int_distribution<std::int64_t> den(1, 9);
  // positive, same-magnitude floats: reassociation error stays well inside
  // the ULP policy (mixed signs could cancel catastrophically)
  std::uniform_real_distribution<double> fp(0.5, 2.0);
  for (int r = 0; r < p; ++r) {
    Buffer b = Buffer::zeros(dt, n);
    for (std::int64_t i = 0; i < n; ++i) {
      switch (dt) {
        case DatatypeKind::Int32:
          b.set(i, static_cast<std::int32_t>(small_int(rng)));
          break;
        case DatatypeKind::Int64:
          b.set(i, small_int(rng));
          break;
        case DatatypeKind::Float64:
          b.set(i, fp(rng));
          break;
        case DatatypeKind::ExactRational:
          b.set(i, Rational(num(rng), den(rng)));
          break;
      }
    }
    inputs.per_rank.push_back(std::move(b));
  }
  return inputs;
}

std::vector<CaseInputs> small_domain_inputs(int p, std::int64_t n, DatatypeKind dt,
                                            int trials, std::uint64_t seed) {
  static constexpr std::int64_t kDomain[] = {-1, 0, 1};
  std::vector<CaseInputs> all;
  if (p <= 3 && n == 1) {
    // exhaustive: one value per rank, every assignment
    std::int64_t total = 1;
    for (int r = 0; r < p; ++r) total *= 3;
    for (std::int64_t k = 0; k < total; ++k) {
      CaseInputs inputs;
      inputs.label = "domain#" + std::to_string(k);
      std::int64_t key = k;
      for (int r = 0; r < p; ++r) {
        inputs.per_rank.push_back(buffer_from_ints(dt, {kDomain[key % 3]}));
        key /= 3;
      }
      all.push_back(std::move(inputs));
    }
    return all;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int t = 0; t < trials; ++t) {
    CaseInputs inputs;
    inputs.label = "domain-sample#" + std::to_string(t);
    for (int r = 0; r < p; ++r) {
      std::vector<std::int64_t> vals(static_cast<std::size_t>(n));
      for (auto& v : vals) v = kDomain[pick(rng)];
      inputs.per_rank.push_back(buffer_from_ints(dt, vals));
    }
    all.push_back(std::move(inputs));
  }
  return all;
}

// ---- run_case -------------------------------------------------------------

namespace {

void bump(Buffer& b, std::int64_t index) {
  const Scalar v = b.at(index);
  switch (b.datatype()) {
    case DatatypeKind::Int32:
      b.set(index, static_cast<std::int32_t>(std::get<std::int32_t>(v) + 1));
      break;
    case DatatypeKind::Int64:
      b.set(index, std::get<std::int64_t>(v) + 1);
      break;
    case DatatypeKind::Float64: {
      // push far past any ULP tolerance
      const double d = std::get<double>(v);
      b.set(index, d + std::max(1.0, std::abs(d)));
      break;
    }
    case DatatypeKind::ExactRational:
      b.set(index, std::get<Rational>(v) + 1);
      break;
  }
}

std::uint64_t count_collective_sends(const std::vector<simnet::TraceEvent>& trace) {
  std::uint64_t sends = 0;
  for (const auto& ev : trace)
    if (ev.kind == simnet::EventKind::Send && ev.tag == collectives::kAllreduceTag) ++sends;
  return sends;
}

std::string describe_deadlock(const simnet::RunResult& res) {
  std::ostringstream os;
  os << "deadlock:";
  for (const auto& b : res.deadlock) {
    os << " rank " << b.rank << " [";
    for (std::size_t i = 0; i < b.waiting_for.size(); ++i) {
      if (i) os << "; ";
      os << simnet::describe(b.waiting_for[i]);
    }
    os << "]";
  }
  return os.str();
}

void attach_failure_data(VerificationReport& rep, const CaseInputs& inputs) {
  rep.input_values.clear();
  for (const Buffer& b : inputs.per_rank) rep.input_values.push_back(b.to_string());
}

}  // namespace

VerificationReport run_case(const CaseParams& params, const CaseInputs& inputs,
                            const RunCaseOptions& options) {
  VerificationReport rep;
  rep.params = params;
  rep.input_label = inputs.label;

  try {
    if (params.p < 1) throw std::invalid_argument("run_case: p must be >= 1");
    if (params.n < 0) throw std::invalid_argument("run_case: n must be >= 0");
    if (static_cast<int>(inputs.per_rank.size()) != params.p)
      throw std::invalid_argument("run_case: need one input buffer per rank");
    for (const Buffer& b : inputs.per_rank)
      if (b.count() != params.n || b.datatype() != params.datatype)
        throw std::invalid_argument("run_case: input buffer does not match case shape");

    simnet::SimOptions sopt;
    sopt.send_mode = params.send_mode;
    sopt.record_trace = true;
    sopt.step_limit = options.step_limit;
    simnet::Simulator sim(params.p, sopt);

    std::vector<Buffer> variant_out(static_cast<std::size_t>(params.p));
    std::vector<Buffer> oracle_out(static_cast<std::size_t>(params.p));
    const AllreduceParams ap{params.n, params.datatype, ReduceOp{params.op, true},
                             collectives::kAllreduceTag};

    // Each rank runs the variant first, then the oracle on a pristine input,
    // both on a duplicate of the world communicator.
    auto program = [&](simnet::Rank& world_rank) -> simnet::Task {
      simnet::Rank self = world_rank.with_comm(simnet::kCommDup);
      const std::size_t r = static_cast<std::size_t>(self.rank());
      const Buffer* sendbuf;
      if (params.placement == Placement::InPlace) {
        variant_out[r] = inputs.per_rank[r];
        sendbuf = valuemodel::in_place();
      } else {
        variant_out[r] = Buffer::zeros(params.datatype, params.n);
        sendbuf = &inputs.per_rank[r];
      }
      if (params.alg == Algorithm::RecursiveDoubling)
        co_await collectives::allreduce_recursive_doubling(self, sendbuf, variant_out[r], ap);
      else
        co_await collectives::allreduce_reduce_scatter_allgather(self, sendbuf,
                                                                 variant_out[r], ap);
      co_await collectives::allreduce_oracle(self, inputs.per_rank[r], oracle_out[r], ap);
    };

    simnet::SchedulePolicy policy =
        options.replay      ? simnet::replay_policy(*options.replay)
        : options.policy_seed ? simnet::random_policy(*options.policy_seed)
                              : simnet::lowest_rank_policy();

    simnet::RunResult res = sim.run(program, policy);
    rep.schedule = res.schedule;
    if (options.policy_seed) rep.schedule.seed = *options.policy_seed;
    rep.message_count = count_collective_sends(res.trace);
    if (options.keep_trace) rep.trace = std::move(res.trace);

    if (res.status == simnet::RunStatus::Deadlock) {
      rep.outcome = Outcome::Deadlock;
      rep.detail = describe_deadlock(res);
      attach_failure_data(rep, inputs);
      return rep;
    }
    if (res.status != simnet::RunStatus::Completed) {
      rep.outcome = Outcome::Error;
      rep.detail = res.status == simnet::RunStatus::StepLimit
                       ? "step limit exceeded"
                       : "rank " + std::to_string(res.error_rank) + ": " + res.error;
      attach_failure_data(rep, inputs);
      return rep;
    }

    if (options.corrupt) {
      if (options.corrupt->rank < 0 || options.corrupt->rank >= params.p ||
          options.corrupt->index < 0 || options.corrupt->index >= params.n)
        throw std::invalid_argument("run_case: corruption hook out of range");
      bump(variant_out[static_cast<std::size_t>(options.corrupt->rank)],
           options.corrupt->index);
    }

    const ComparePolicy policy_cmp =
        compare_policy(params.datatype, params.op, params.p, options.ulp_threshold);
    double ulp_sum = 0;
    for (int r = 0; r < params.p; ++r) {
      CompareResult cr = compare_buffers(oracle_out[static_cast<std::size_t>(r)],
                                         variant_out[static_cast<std::size_t>(r)], policy_cmp);
      if (cr.ulp.relevant) {
        rep.ulp.relevant = true;
        rep.ulp.max = std::max(rep.ulp.max, cr.ulp.max);
        ulp_sum += cr.ulp.mean * static_cast<double>(cr.ulp.samples);
        rep.ulp.samples += cr.ulp.samples;
      }
      if (cr.first && !rep.first_mismatch) {
        cr.first->rank = r;
        rep.first_mismatch = cr.first;
      }
    }
    if (rep.ulp.samples)
      rep.ulp.mean = ulp_sum / static_cast<double>(rep.ulp.samples);

    // optional reference check (closed forms); always exact
    if (options.expected && !rep.first_mismatch) {
      const ComparePolicy exact{true, 0};
      for (int r = 0; r < params.p && !rep.first_mismatch; ++r) {
        for (const Buffer* side : {&oracle_out[static_cast<std::size_t>(r)],
                                   &variant_out[static_cast<std::size_t>(r)]}) {
          CompareResult cr = compare_buffers(*options.expected, *side, exact);
          if (cr.first) {
            cr.first->rank = r;
            rep.first_mismatch = cr.first;
            rep.detail = "result deviates from reference value";
            break;
          }
        }
      }
    }

    rep.outcome = rep.first_mismatch ? Outcome::Mismatch : Outcome::Pass;
    if (rep.outcome != Outcome::Pass) attach_failure_data(rep, inputs);
  } catch (const std::exception& e) {
    rep.outcome = Outcome::Error;
    rep.detail = e.what();
    attach_failure_data(rep, inputs);
  }
  return rep;
}

// ---- sweep ----------------------------------------------------------------

SweepGrid default_grid() { return SweepGrid{}; }

namespace {

struct PlannedCase {
  CaseParams params;
  CaseInputs inputs;
};

std::vector<PlannedCase> plan_sweep(const SweepGrid& grid) {
  if (grid.p_min < 1 || grid.p_max < grid.p_min)
    throw std::invalid_argument("sweep: bad process-count range");
  if (grid.n_min < 0 || grid.n_max < grid.n_min)
    throw std::invalid_argument("sweep: bad length range");
  std::vector<PlannedCase> plan;
  for (Algorithm alg : grid.algorithms)
    for (int p = grid.p_min; p <= grid.p_max; ++p)
      for (std::int64_t n = grid.n_min; n <= grid.n_max; ++n)
        for (ReduceKind op : grid.ops) {
          const bool is_minmax = op == ReduceKind::Min || op == ReduceKind::Max;
          if (is_minmax && grid.minmax_p_cap && p > *grid.minmax_p_cap) continue;
          if (is_minmax && grid.minmax_n_cap && n > *grid.minmax_n_cap) continue;
          for (DatatypeKind dt : grid.datatypes)
            for (simnet::SendMode mode : grid.send_modes)
              for (Placement placement : grid.placements) {
                CaseParams params{alg, p, n, op, dt, mode, placement};
                for (InputSource source : grid.sources) {
                  switch (source) {
                    case InputSource::AppendixC:
                      plan.push_back({params, affine_inputs(p, n, dt)});
                      break;
                    case InputSource::Random:
                      for (int t = 0; t < grid.trials; ++t)
                        plan.push_back({params, random_inputs(p, n, dt,
                                                              case_seed(grid.seed, params, t),
                                                              t)});
                      break;
                    case InputSource::SmallDomain:
                      for (auto& in : small_domain_inputs(
                               p, n, dt, grid.trials, case_seed(grid.seed, params, -1)))
                        plan.push_back({params, std::move(in)});
                      break;
                  }
                }
              }
        }
  return plan;
}

}  // namespace

SweepResult sweep(const SweepGrid& grid, int workers) {
  std::vector<PlannedCase> plan = plan_sweep(grid);
  SweepResult out;
  out.reports.resize(plan.size());

  RunCaseOptions opts;
  opts.ulp_threshold = grid.ulp_threshold;

  int nworkers = workers;
  if (nworkers <= 0)
    nworkers = static_cast<int>(std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
  nworkers = std::min<int>(nworkers, static_cast<int>(plan.size() > 0 ? plan.size() : 1));

  if (nworkers <= 1) {
    for (std::size_t i = 0; i < plan.size(); ++i)
      out.reports[i] = run_case(plan[i].params, plan[i].inputs, opts);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= plan.size()) break;
        out.reports[i] = run_case(plan[i].params, plan[i].inputs, opts);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  out.summary.total = out.reports.size();
  for (const auto& r : out.reports)
    if (r.outcome == Outcome::Pass) ++out.summary.passed;
  return out;
}

VerificationReport replicate_concrete_driver(Algorithm alg, int p, std::int64_t n,
                                             DatatypeKind dt) {
  CaseParams params{alg,
                    p,
                    n,
                    ReduceKind::Sum,
                    dt,
                    simnet::SendMode::Buffered,
                    Placement::OutOfPlace};
  CaseInputs inputs = affine_inputs(p, n, dt);
  // closed form of sum over r of (r + i): P*(P-1)/2 + P*i
  Buffer expected = Buffer::zeros(dt, n);
  const std::int64_t base = static_cast<std::int64_t>(p) * (p - 1) / 2;
  for (std::int64_t i = 0; i < n; ++i)
    expected.set(i, scalar_from_int(dt, base + static_cast<std::int64_t>(p) * i));
  RunCaseOptions opts;
  opts.expected = std::move(expected);
  return run_case(params, inputs, opts);
}

// ---- schedule exploration ---------------------------------------------

VerificationReport explore_schedules(Algorithm alg, int p, std::int64_t n, ReduceKind op,
                                     DatatypeKind dt, const ExploreOptions& options) {
  VerificationReport rep;
  rep.params = CaseParams{alg, p, n, op, dt, options.send_mode, Placement::OutOfPlace};
  rep.input_label = "appendixc";
  rep.schedules_explored = 0;

  try {
    const CaseInputs inputs = affine_inputs(p, n, dt);
    const AllreduceParams ap{n, dt, ReduceOp{op, true}, collectives::kAllreduceTag};

    std::vector<Buffer> outputs(static_cast<std::size_t>(p));
    auto run_one = [&](const simnet::SchedulePolicy& policy) {
      simnet::SimOptions sopt;
      sopt.send_mode = options.send_mode;
      sopt.step_limit = options.step_limit;
      simnet::Simulator sim(p, sopt);
      auto program = [&](simnet::Rank& world_rank) -> simnet::Task {
        simnet::Rank self = world_rank.with_comm(simnet::kCommDup);
        const std::size_t r = static_cast<std::size_t>(self.rank());
        outputs[r] = Buffer::zeros(dt, n);
        if (alg == Algorithm::RecursiveDoubling)
          co_await collectives::allreduce_recursive_doubling(self, &inputs.per_rank[r],
                                                             outputs[r], ap);
        else
          co_await collectives::allreduce_reduce_scatter_allgather(self, &inputs.per_rank[r],
                                                                   outputs[r], ap);
      };
      return sim.run(program, policy);
    };

    std::vector<Buffer> reference;
    bool have_reference = false;
    // returns false when the run failed and the report is already filled
    auto check = [&](const simnet::RunResult& res) {
      ++rep.schedules_explored;
      if (res.status == simnet::RunStatus::Deadlock) {
        rep.outcome = Outcome::Deadlock;
        rep.detail = describe_deadlock(res);
        rep.schedule = res.schedule;
        return false;
      }
      if (res.status != simnet::RunStatus::Completed) {
        rep.outcome = Outcome::Error;
        rep.detail = res.status == simnet::RunStatus::StepLimit
                         ? "step limit exceeded"
                         : "rank " + std::to_string(res.error_rank) + ": " + res.error;
        rep.schedule = res.schedule;
        return false;
      }
      if (!have_reference) {
        reference = outputs;
        have_reference = true;
        return true;
      }
      for (int r = 0; r < p; ++r) {
        const std::size_t ri = static_cast<std::size_t>(r);
        if (outputs[ri] == reference[ri]) continue;
        for (std::int64_t i = 0; i < n; ++i) {
          if (reference[ri].at(i) == outputs[ri].at(i)) continue;
          rep.outcome = Outcome::Mismatch;
          rep.first_mismatch =
              Mismatch{r, i, valuemodel::to_string(reference[ri].at(i)),
                       valuemodel::to_string(outputs[ri].at(i)), 0};
          rep.detail = "schedule-dependent result";
          rep.schedule = res.schedule;
          return false;
        }
      }
      return true;
    };

    bool failed = false;
    if (options.exhaustive) {
      // depth-first over scheduler choice points: each popped prefix replays
      // the forced picks, then continues lowest-rank; siblings of every
      // decision beyond the prefix are queued
      std::vector<std::vector<int>> stack;
      stack.push_back({});
      while (!stack.empty() && !failed) {
        std::vector<int> prefix = std::move(stack.back());
        stack.pop_back();
        const std::size_t forced = prefix.size();
        simnet::RunResult res = run_one(simnet::replay_policy({std::move(prefix), 0}));
        if (!check(res)) {
          failed = true;
          break;
        }
        for (std::size_t i = forced; i < res.schedule.decisions.size(); ++i) {
          if (res.runnable_sets[i].size() < 2) continue;
          for (int r : res.runnable_sets[i]) {
            if (r == res.schedule.decisions[i]) continue;
            std::vector<int> child(res.schedule.decisions.begin(),
                                   res.schedule.decisions.begin() +
                                       static_cast<std::ptrdiff_t>(i));
            child.push_back(r);
            stack.push_back(std::move(child));
          }
        }
        if (rep.schedules_explored >= options.schedule_limit) {
          rep.outcome = Outcome::Error;
          rep.detail = "schedule enumeration exceeded the configured bound";
          failed = true;
        }
      }
    } else {
      if (!failed && !check(run_one(simnet::lowest_rank_policy()))) failed = true;
      for (int s = 0; !failed && s < options.seeds; ++s) {
        const std::uint64_t seed = options.seed0 + static_cast<std::uint64_t>(s);
        if (!check(run_one(simnet::random_policy(seed)))) {
          rep.schedule.seed = seed;
          failed = true;
        }
      }
    }

    if (!failed) rep.outcome = Outcome::Pass;
    else attach_failure_data(rep, inputs);
  } catch (const std::exception& e) {
    rep.outcome = Outcome::Error;
    rep.detail = e.what();
  }
  return rep;
}

// ---- serialization ------------------------------------------------------

std::string report_to_json(const VerificationReport& report) {
  nlohmann::json j;
  j["algorithm"] = to_string(report.params.alg);
  j["p"] = report.params.p;
  j["n"] = report.params.n;
  j["op"] = valuemodel::to_string(report.params.op);
  j["datatype"] = valuemodel::to_string(report.params.datatype);
  j["mode"] = mode_string(report.params.send_mode, report.params.placement);
  j["inputs"] = report.input_label;
  j["outcome"] = to_string(report.outcome);
  if (report.first_mismatch) {
    const Mismatch& m = *report.first_mismatch;
    j["first_mismatch"] = {{"rank", m.rank},
                           {"index", m.index},
                           {"expected", m.expected},
                           {"actual", m.actual},
                           {"ulp", m.ulp}};
  } else {
    j["first_mismatch"] = nullptr;
  }
  if (report.ulp.relevant) {
    j["ulp_max"] = report.ulp.max;
    j["ulp_mean"] = report.ulp.mean;
  } else {
    j["ulp_max"] = nullptr;
  }
  j["messages"] = report.message_count;
  j["schedules"] = report.schedules_explored;
  if (report.outcome != Outcome::Pass) {
    j["detail"] = report.detail;
    j["schedule"] = report.schedule.decisions;
    j["input_values"] = report.input_values;
  }
  return j.dump();
}

std::string report_csv_header() {
  return "algorithm,p,n,op,datatype,mode,outcome,first_mismatch,ulp_max,messages,schedules";
}

std::string report_to_csv(const VerificationReport& report) {
  std::ostringstream os;
  os << to_string(report.params.alg) << ',' << report.params.p << ',' << report.params.n
     << ',' << valuemodel::to_string(report.params.op) << ','
     << valuemodel::to_string(report.params.datatype) << ','
     << mode_string(report.params.send_mode, report.params.placement) << ','
     << to_string(report.outcome) << ',';
  if (report.first_mismatch) {
    const Mismatch& m = *report.first_mismatch;
    os << "rank=" << m.rank << ";index=" << m.index << ";expected=" << m.expected
       << ";actual=" << m.actual << ";ulp=" << m.ulp;
  }
  os << ',';
  if (report.ulp.relevant) os << report.ulp.max;
  os << ',' << report.message_count << ',' << report.schedules_explored;
  return os.str();
}

std::string report_to_text(const VerificationReport& report) {
  std::ostringstream os;
  os << (report.outcome == Outcome::Pass ? "pass" : "FAIL") << ' '
     << to_string(report.params.alg) << " p=" << report.params.p << " n=" << report.params.n
     << " op=" << valuemodel::to_string(report.params.op)
     << " dtype=" << valuemodel::to_string(report.params.datatype)
     << " mode=" << mode_string(report.params.send_mode, report.params.placement)
     << " inputs=" << report.input_label;
  if (report.ulp.relevant) os << " ulp_max=" << report.ulp.max;
  if (report.outcome != Outcome::Pass) {
    os << " outcome=" << to_string(report.outcome);
    if (report.first_mismatch)
      os << " first_mismatch=rank" << report.first_mismatch->rank << ":i"
         << report.first_mismatch->index << " expected=" << report.first_mismatch->expected
         << " actual=" << report.first_mismatch->actual;
    if (!report.detail.empty()) os << " detail=\"" << report.detail << '"';
  }
  return os.str();
}

}  // namespace collsim::verify
