// Command-line front end: parameter sweeps against the reduce-then-broadcast
// oracle, single-case runs, schedule exploration, and trace dumps.
//
// Exit status: 0 when every checked case passes, 1 on verification failure,
// 2 on usage errors.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "collsim/collectives.hpp"
#include "collsim/simnet.hpp"
#include "collsim/valuemodel.hpp"
#include "collsim/verify.hpp"

namespace {

using namespace collsim;
using valuemodel::DatatypeKind;
using valuemodel::ReduceKind;
using verify::Algorithm;
using verify::Placement;

int usage_error(const std::string& message) {
  std::cerr << "error: " << message << "\nsee --help for usage\n";
  return 2;
}

std::optional<ReduceKind> parse_op(const std::string& s) {
  if (s == "sum") return ReduceKind::Sum;
  if (s == "prod") return ReduceKind::Prod;
  if (s == "min") return ReduceKind::Min;
  if (s == "max") return ReduceKind::Max;
  return std::nullopt;
}

std::optional<DatatypeKind> parse_dtype(const std::string& s) {
  if (s == "i32") return DatatypeKind::Int32;
  if (s == "i64") return DatatypeKind::Int64;
  if (s == "f64") return DatatypeKind::Float64;
  if (s == "rational") return DatatypeKind::ExactRational;
  return std::nullopt;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct OutputSink {
  std::ofstream file;
  bool to_file = false;

  int open(const std::string& path) {
    if (path.empty()) return 0;
    file.open(path);
    if (!file) {
      std::cerr << "error: cannot open output file: " << path << "\n";
      return 1;
    }
    to_file = true;
    return 0;
  }
  std::ostream& stream() { return to_file ? static_cast<std::ostream&>(file) : std::cout; }
};

void write_reports(std::ostream& os, const std::vector<verify::VerificationReport>& reports,
                   const std::string& format) {
  if (format == "json") {
    os << "[";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (i) os << ",";
      os << "\n  " << verify::report_to_json(reports[i]);
    }
    os << "\n]\n";
  } else if (format == "csv") {
    os << verify::report_csv_header() << "\n";
    for (const auto& r : reports) os << verify::report_to_csv(r) << "\n";
  } else {
    for (const auto& r : reports) os << verify::report_to_text(r) << "\n";
  }
}

struct CommonCaseFlags {
  std::string alg = "rd";
  int p = 2;
  std::int64_t n = 1;
  std::string op = "sum";
  std::string dtype = "i64";
  std::string mode = "buffered";
  std::string inplace = "off";
  std::string inputs = "appendixc";
  std::uint64_t seed = 1;
};

void add_case_flags(CLI::App* cmd, CommonCaseFlags& f) {
  cmd->add_option("--alg", f.alg, "algorithm: rd|rsag")
      ->check(CLI::IsMember({"rd", "rsag"}));
  cmd->add_option("--p", f.p, "process count")->check(CLI::Range(1, 1 << 20));
  cmd->add_option("--n", f.n, "array length")->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 32));
  cmd->add_option("--op", f.op, "reduction operator: sum|prod|min|max")
      ->check(CLI::IsMember({"sum", "prod", "min", "max"}));
  cmd->add_option("--dtype", f.dtype, "datatype: i32|i64|f64|rational")
      ->check(CLI::IsMember({"i32", "i64", "f64", "rational"}));
  cmd->add_option("--mode", f.mode, "send mode: buffered|sync")
      ->check(CLI::IsMember({"buffered", "sync"}));
  cmd->add_option("--inplace", f.inplace, "in-place contribution: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--inputs", f.inputs, "input source: appendixc|random")
      ->check(CLI::IsMember({"appendixc", "random"}));
  cmd->add_option("--seed", f.seed, "seed for random inputs");
}

verify::CaseParams case_params_from(const CommonCaseFlags& f) {
  verify::CaseParams params;
  params.alg = *verify::parse_algorithm(f.alg);
  params.p = f.p;
  params.n = f.n;
  params.op = *parse_op(f.op);
  params.datatype = *parse_dtype(f.dtype);
  params.send_mode = f.mode == "sync" ? simnet::SendMode::Synchronous
                                      : simnet::SendMode::Buffered;
  params.placement = f.inplace == "on" ? Placement::InPlace : Placement::OutOfPlace;
  return params;
}

verify::CaseInputs case_inputs_from(const CommonCaseFlags& f, const verify::CaseParams& p) {
  if (f.inputs == "random")
    return verify::random_inputs(p.p, p.n, p.datatype, f.seed, 0);
  return verify::affine_inputs(p.p, p.n, p.datatype);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collsim: simulated-message-passing allreduce verification harness"};
  app.require_subcommand(1);

  std::string format = "text";
  std::string out_path;
  int verbosity = 0;
  app.add_option("--format", format, "report format: json|csv|text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_option("--out", out_path, "write reports to this file instead of stdout");
  app.add_flag("-v,--verbose", verbosity, "echo failing cases to stderr");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "differential sweep of the variants against the oracle");
  sweep_cmd->fallthrough();
  verify::SweepGrid grid = verify::default_grid();
  std::string sweep_alg = "all";
  std::string sweep_ops, sweep_dtypes, sweep_mode, sweep_inplace = "both", sweep_inputs;
  sweep_cmd->add_option("--alg", sweep_alg, "rd|rsag|all")
      ->check(CLI::IsMember({"rd", "rsag", "all"}));
  sweep_cmd->add_option("--p-min", grid.p_min)->check(CLI::Range(1, 64));
  sweep_cmd->add_option("--p-max", grid.p_max)->check(CLI::Range(1, 64));
  sweep_cmd->add_option("--n-min", grid.n_min)->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 20));
  sweep_cmd->add_option("--n-max", grid.n_max)->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 20));
  sweep_cmd->add_option("--ops", sweep_ops, "comma list of sum|prod|min|max");
  sweep_cmd->add_option("--dtypes", sweep_dtypes, "comma list of i32|i64|f64|rational");
  sweep_cmd->add_option("--mode", sweep_mode, "restrict to one send mode: buffered|sync")
      ->check(CLI::IsMember({"buffered", "sync"}));
  sweep_cmd->add_option("--inplace", sweep_inplace, "on|off|both")
      ->check(CLI::IsMember({"on", "off", "both"}));
  sweep_cmd->add_option("--inputs", sweep_inputs,
                        "comma list of appendixc|smalldomain|random");
  sweep_cmd->add_option("--seed", grid.seed, "base seed for random inputs");
  sweep_cmd->add_option("--trials", grid.trials, "random trials per cell")
      ->check(CLI::Range(0, 1 << 20));

  // ---- case ----
  auto* case_cmd = app.add_subcommand("case", "run one case and report it");
  case_cmd->fallthrough();
  CommonCaseFlags case_flags;
  add_case_flags(case_cmd, case_flags);

  // ---- explore ----
  auto* explore_cmd =
      app.add_subcommand("explore", "enumerate or sample schedules for one case");
  explore_cmd->fallthrough();
  CommonCaseFlags explore_flags;
  add_case_flags(explore_cmd, explore_flags);
  int explore_trials = 0;  // 0 = exhaustive
  std::uint64_t schedule_bound = 1'000'000;
  explore_cmd->add_option("--trials", explore_trials,
                          "sample this many random schedules instead of exhaustive");
  explore_cmd->add_option("--schedule-bound", schedule_bound,
                          "per-schedule step bound for the search");

  // ---- trace ----
  auto* trace_cmd = app.add_subcommand("trace", "run one case and dump its event trace");
  trace_cmd->fallthrough();
  CommonCaseFlags trace_flags;
  add_case_flags(trace_cmd, trace_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  OutputSink sink;
  if (sink.open(out_path) != 0) return 2;

  if (sweep_cmd->parsed()) {
    if (sweep_alg == "rd") grid.algorithms = {Algorithm::RecursiveDoubling};
    else if (sweep_alg == "rsag") grid.algorithms = {Algorithm::ReduceScatterAllgather};
    if (!sweep_ops.empty()) {
      grid.ops.clear();
      for (const auto& s : split_list(sweep_ops)) {
        auto op = parse_op(s);
        if (!op) return usage_error("unknown op: " + s);
        grid.ops.push_back(*op);
      }
      // explicit operator selection overrides the reduced Min/Max envelope
      grid.minmax_p_cap.reset();
      grid.minmax_n_cap.reset();
    }
    if (!sweep_dtypes.empty()) {
      grid.datatypes.clear();
      for (const auto& s : split_list(sweep_dtypes)) {
        auto dt = parse_dtype(s);
        if (!dt) return usage_error("unknown datatype: " + s);
        grid.datatypes.push_back(*dt);
      }
    }
    if (!sweep_mode.empty())
      grid.send_modes = {sweep_mode == "sync" ? simnet::SendMode::Synchronous
                                              : simnet::SendMode::Buffered};
    if (sweep_inplace == "on") grid.placements = {Placement::InPlace};
    else if (sweep_inplace == "off") grid.placements = {Placement::OutOfPlace};
    if (!sweep_inputs.empty()) {
      grid.sources.clear();
      for (const auto& s : split_list(sweep_inputs)) {
        auto src = verify::parse_input_source(s);
        if (!src) return usage_error("unknown input source: " + s);
        grid.sources.push_back(*src);
      }
    }
    if (grid.p_max < grid.p_min || grid.n_max < grid.n_min)
      return usage_error("empty parameter range");

    verify::SweepResult result = verify::sweep(grid);
    write_reports(sink.stream(), result.reports, format);
    if (verbosity > 0)
      for (const auto& r : result.reports)
        if (r.outcome != verify::Outcome::Pass)
          std::cerr << verify::report_to_text(r) << "\n";
    std::cout << result.summary.passed << "/" << result.summary.total << "\n";
    return result.summary.all_passed() ? 0 : 1;
  }

  if (case_cmd->parsed()) {
    const verify::CaseParams params = case_params_from(case_flags);
    const verify::CaseInputs inputs = case_inputs_from(case_flags, params);
    const verify::VerificationReport report = verify::run_case(params, inputs);
    write_reports(sink.stream(), {report}, format);
    const bool ok = report.outcome == verify::Outcome::Pass;
    std::cout << (ok ? 1 : 0) << "/1\n";
    return ok ? 0 : 1;
  }

  if (explore_cmd->parsed()) {
    const verify::CaseParams params = case_params_from(explore_flags);
    verify::ExploreOptions options;
    options.exhaustive = explore_trials == 0;
    options.seeds = explore_trials;
    options.seed0 = explore_flags.seed;
    options.send_mode = params.send_mode;
    options.step_limit = schedule_bound;
    const verify::VerificationReport report = verify::explore_schedules(
        params.alg, params.p, params.n, params.op, params.datatype, options);
    write_reports(sink.stream(), {report}, format);
    const bool ok = report.outcome == verify::Outcome::Pass;
    std::cout << (ok ? 1 : 0) << "/1 (" << report.schedules_explored << " schedules)\n";
    return ok ? 0 : 1;
  }

  if (trace_cmd->parsed()) {
    const verify::CaseParams params = case_params_from(trace_flags);
    const verify::CaseInputs inputs = case_inputs_from(trace_flags, params);
    verify::RunCaseOptions options;
    options.keep_trace = true;
    const verify::VerificationReport report = verify::run_case(params, inputs, options);
    for (const auto& ev : report.trace)
      sink.stream() << simnet::format_trace_line(ev) << "\n";
    const bool ok = report.outcome == verify::Outcome::Pass;
    std::cout << (ok ? 1 : 0) << "/1\n";
    return ok ? 0 : 1;
  }

  return usage_error("no subcommand given");
}
