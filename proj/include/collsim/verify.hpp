#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collsim/collectives.hpp"
#include "collsim/simnet.hpp"
#include "collsim/valuemodel.hpp"

namespace collsim::verify {

using valuemodel::Buffer;
using valuemodel::DatatypeKind;
using valuemodel::ReduceKind;

enum class Algorithm { RecursiveDoubling, ReduceScatterAllgather };
const char* to_string(Algorithm alg);
std::optional<Algorithm> parse_algorithm(const std::string& s);

enum class Placement { OutOfPlace, InPlace };
const char* to_string(Placement placement);

/// Send-mode/placement pair rendered as e.g. "buffered/outofplace".
std::string mode_string(simnet::SendMode mode, Placement placement);

struct CaseParams {
  Algorithm alg = Algorithm::RecursiveDoubling;
  int p = 1;
  std::int64_t n = 1;
  ReduceKind op = ReduceKind::Sum;
  DatatypeKind datatype = DatatypeKind::Int64;
  simnet::SendMode send_mode = simnet::SendMode::Buffered;
  Placement placement = Placement::OutOfPlace;
};

struct CaseInputs {
  std::vector<Buffer> per_rank;
  std::string label;  // e.g. "appendixc", "random#3", "domain#17"
};

enum class Outcome { Pass, Mismatch, Deadlock, Error };
const char* to_string(Outcome outcome);

struct Mismatch {
  int rank = -1;
  std::int64_t index = -1;
  std::string expected;
  std::string actual;
  std::uint64_t ulp = 0;  // Float64 only
};

struct UlpStats {
  bool relevant = false;  // Float64 Sum/Prod comparisons only
  std::uint64_t max = 0;
  double mean = 0.0;
  std::uint64_t samples = 0;
};

/// One sweep case's parameters, outcome, mismatch detail, and trace stats.
/// Failure reports carry the schedule and input values needed to replay the
/// case in isolation.
struct VerificationReport {
  CaseParams params;
  std::string input_label;
  Outcome outcome = Outcome::Pass;
  std::optional<Mismatch> first_mismatch;
  UlpStats ulp;
  std::uint64_t message_count = 0;  // collective-tagged sends
  std::uint64_t schedules_explored = 1;
  std::string detail;  // deadlock/error description
  simnet::Schedule schedule;
  std::vector<std::string> input_values;        // filled on failure
  std::vector<simnet::TraceEvent> trace;        // filled when requested
};

struct ComparePolicy {
  bool exact = true;
  std::uint64_t ulp_threshold = 0;
};

/// Exact equality everywhere except Float64 Sum/Prod, which reassociate and
/// are compared within an ULP threshold (default 4 * ceil(log2 P)).
ComparePolicy compare_policy(DatatypeKind dt, ReduceKind op, int p,
                             std::optional<std::uint64_t> ulp_override = {});

/// Representable doubles strictly between a and b (0 when equal).
std::uint64_t ulp_distance(double a, double b);

struct CompareResult {
  std::optional<Mismatch> first;  // rank field left to the caller
  UlpStats ulp;
};
CompareResult compare_buffers(const Buffer& expected, const Buffer& actual,
                              const ComparePolicy& policy);

int ceil_log2(int p);

struct CorruptionHook {
  int rank = 0;
  std::int64_t index = 0;
};

struct RunCaseOptions {
  std::optional<CorruptionHook> corrupt;             // test hook
  std::optional<std::uint64_t> ulp_threshold;        // overrides the default
  std::optional<simnet::Schedule> replay;            // rerun a recorded schedule
  std::optional<std::uint64_t> policy_seed;          // random scheduling
  std::optional<Buffer> expected;                    // extra reference check
  bool keep_trace = false;
  std::uint64_t step_limit = 1'000'000;
};

/// Runs the variant and then the oracle on identical inputs in one simulated
/// world (each rank calls both, on a duplicate of the world communicator),
/// compares per the datatype's equality policy, and fills the report.
VerificationReport run_case(const CaseParams& params, const CaseInputs& inputs,
                            const RunCaseOptions& options = {});

// ---- input generation --------------------------------------------------

enum class InputSource { AppendixC, SmallDomain, Random };
const char* to_string(InputSource source);
std::optional<InputSource> parse_input_source(const std::string& s);

/// x_r[i] = r + i, the concrete-driver pattern.
CaseInputs affine_inputs(int p, std::int64_t n, DatatypeKind dt);

CaseInputs random_inputs(int p, std::int64_t n, DatatypeKind dt, std::uint64_t seed,
                         int trial);

/// All assignments over the value domain {-1, 0, 1} when p <= 3 and n == 1
/// (at most 27); otherwise `trials` sampled assignments.
std::vector<CaseInputs> small_domain_inputs(int p, std::int64_t n, DatatypeKind dt,
                                            int trials, std::uint64_t seed);

// ---- sweeping ------------------------------------------------------------

struct SweepGrid {
  int p_min = 1, p_max = 10;
  std::int64_t n_min = 1, n_max = 10;
  std::vector<ReduceKind> ops = {ReduceKind::Sum, ReduceKind::Prod, ReduceKind::Min,
                                 ReduceKind::Max};
  std::vector<DatatypeKind> datatypes = {DatatypeKind::Int64, DatatypeKind::ExactRational};
  std::vector<Algorithm> algorithms = {Algorithm::RecursiveDoubling,
                                       Algorithm::ReduceScatterAllgather};
  std::vector<InputSource> sources = {InputSource::AppendixC, InputSource::Random};
  std::vector<simnet::SendMode> send_modes = {simnet::SendMode::Buffered,
                                              simnet::SendMode::Synchronous};
  std::vector<Placement> placements = {Placement::OutOfPlace, Placement::InPlace};
  int trials = 50;
  std::uint64_t seed = 20250041;
  std::optional<std::uint64_t> ulp_threshold;
  // Min/Max cells are capped at these bounds (the verified envelope is
  // smaller for them); disengaged when the caller picks ops explicitly.
  std::optional<int> minmax_p_cap = 5;
  std::optional<std::int64_t> minmax_n_cap = 5;
};

/// The no-flags grid: both algorithms, exact datatypes, Sum/Prod to 10,
/// Min/Max to 5, affine inputs plus 50 random trials per cell, all four
/// send-mode/placement combinations.
SweepGrid default_grid();

struct SweepSummary {
  std::size_t total = 0;
  std::size_t passed = 0;
  bool all_passed() const { return passed == total; }
};

struct SweepResult {
  std::vector<VerificationReport> reports;
  SweepSummary summary;
};

/// One report per (algorithm, p, n, op, datatype, mode, input assignment).
/// Cases are independent; with workers > 1 they run on a small thread pool,
/// each worker using private simulators, and reports keep grid order.
SweepResult sweep(const SweepGrid& grid, int workers = 0);

/// x_r[i] = r + i with Sum over N elements; checks the variant and oracle
/// against the closed form P*(P-1)/2 + P*i at every index (exact in every
/// datatype: the Float64 values involved are integers well below 2^53).
VerificationReport replicate_concrete_driver(Algorithm alg, int p, std::int64_t n = 10,
                                             DatatypeKind dt = DatatypeKind::Float64);

// ---- schedule exploration -------------------------------------------------

struct ExploreOptions {
  bool exhaustive = true;
  int seeds = 100;             // sampled mode
  std::uint64_t seed0 = 1;
  simnet::SendMode send_mode = simnet::SendMode::Buffered;
  std::uint64_t step_limit = 1'000'000;        // per schedule
  std::uint64_t schedule_limit = 100'000'000;  // enumeration safety bound
};

/// Enumerates every scheduler decision sequence (or samples seeds) for the
/// variant on affine inputs and asserts each schedule terminates without
/// deadlock with identical result buffers. Failures carry the replayable
/// schedule.
VerificationReport explore_schedules(Algorithm alg, int p, std::int64_t n, ReduceKind op,
                                     DatatypeKind dt, const ExploreOptions& options = {});

// ---- report serialization ---------------------------------------------

std::string report_to_json(const VerificationReport& report);
std::string report_csv_header();
std::string report_to_csv(const VerificationReport& report);
std::string report_to_text(const VerificationReport& report);

}  // namespace collsim::verify
