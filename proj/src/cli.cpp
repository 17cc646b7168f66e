#include "decomp/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "decomp/error.hpp"
#include "decomp/io.hpp"
#include "decomp/mc.hpp"
#include "decomp/seed.hpp"

namespace decomp::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kInitialDrawStream = 0x31;
constexpr std::int64_t kCompareDrawStream = 0x32;
constexpr std::int64_t kComparePermStream = 0x33;
constexpr std::int64_t kCompareRowCap = 1000;  // rows per side for d > 1
constexpr int kDecaySteps = 10;

std::string samples_file_name(std::int64_t k) { return "samples_k" + std::to_string(k) + ".csv"; }

Json evidence_json(const Evidence& e) {
  Json j = {{"name", e.name}, {"verdict", e.verdict}, {"detail", e.detail}};
  j["value"] = e.value ? number_json(*e.value) : Json(nullptr);
  return j;
}

Json numbers_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number_json(x));
  return out;
}

Json marginal_json(std::int64_t k, const MeasureRepr& m, const std::string& file) {
  Json j = {{"k", k}};
  if (const auto* g = std::get_if<GaussianRepr>(&m)) {
    j["mean"] = vector_to_json(g->mean);
    j["cov"] = matrix_to_json(g->cov);
  } else if (const auto* x = std::get_if<DiracRepr>(&m)) {
    j["point"] = vector_to_json(x->point);
  } else {
    const auto& e = std::get<EmpiricalRepr>(m);
    const Eigen::VectorXd mu = e.samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = e.samples.rowwise() - mu.transpose();
    const double denom = std::max<double>(1.0, static_cast<double>(e.samples.rows() - 1));
    j["file"] = file;
    j["n"] = e.samples.rows();
    j["seed"] = e.seed;
    j["truncation"] = e.truncation;
    j["certified"] = e.certified;
    j["sample_mean"] = vector_to_json(mu);
    j["sample_cov"] = matrix_to_json(centered.transpose() * centered / denom);
  }
  return j;
}

Json entry_json(const VerificationEntry& e) {
  return {{"k", e.k},
          {"cov_residual", number_json(e.cov_residual)},
          {"mean_residual", number_json(e.mean_residual)},
          {"statistic", number_json(e.statistic)},
          {"p_value", number_json(e.p_value)},
          {"passed", e.passed},
          {"note", e.note}};
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

MeasureRepr repr_from_model(const NoiseModel& m, std::int64_t n, std::uint64_t seed) {
  if (m.is_dirac()) return DiracRepr{mean(m)};
  if (m.is_gaussian()) return GaussianRepr{mean(m), covariance(m)};
  EmpiricalRepr e;
  e.samples = sample(m, n, seed);
  e.seed = seed;
  return e;
}

Eigen::MatrixXd cap_rows(const Eigen::MatrixXd& m, std::int64_t cap) {
  if (m.cols() > 1 && m.rows() > cap) return m.topRows(cap);
  return m;
}

int exit_for_status(ExistenceStatus s) {
  switch (s) {
    case ExistenceStatus::exists: return kExitOk;
    case ExistenceStatus::not_exists: return kExitNotExists;
    case ExistenceStatus::undetermined: return kExitUndetermined;
  }
  return kExitInternal;
}

const char* error_type(const std::exception& e) {
  if (dynamic_cast<const SpectralGapError*>(&e)) return "spectral_gap";
  if (dynamic_cast<const HypothesisError*>(&e)) return "hypothesis";
  if (dynamic_cast<const PreconditionError*>(&e)) return "precondition";
  if (dynamic_cast<const ConsistencyError*>(&e)) return "consistency";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
  if (dynamic_cast<const InputError*>(&e)) return "input";
  return "internal";
}

}  // namespace

Json number_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const SpectralGapError*>(&e) || dynamic_cast<const ConvergenceError*>(&e)) {
    return kExitUndetermined;
  }
  if (dynamic_cast<const ConsistencyError*>(&e)) return kExitInternal;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const HypothesisError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e)) {
    return kExitInput;
  }
  return kExitInternal;
}

SolverOptions solver_options(const RunOptions& o) {
  SolverOptions s;
  s.k_min = o.k_min;
  s.k_max = o.k_max;
  s.horizon = o.horizon;
  s.tol = o.tol;
  s.p = o.p;
  s.samples = o.samples;
  s.seed = o.seed;
  s.force = o.force;
  s.truncation = o.truncation;
  s.permutations = o.permutations;
  return s;
}

// --- report sections ---------------------------------------------------------

Json to_json(const ExistenceReport& r) {
  Json ev = Json::array();
  for (const auto& e : r.evidence) ev.push_back(evidence_json(e));
  return {{"status", to_string(r.status)},
          {"route", r.route ? Json(to_string(*r.route)) : Json(nullptr)},
          {"evidence", ev},
          {"routes_attempted", r.routes_attempted},
          {"horizon", r.horizon},
          {"tol", r.tol},
          {"p", r.p},
          {"k_min", r.k_min},
          {"k_max", r.k_max}};
}

Json to_json(const VerificationReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) entries.push_back(entry_json(e));
  return {{"kind", to_string(r.kind)},
          {"passed", r.passed},
          {"max_residual", number_json(r.max_residual)},
          {"min_p_value", number_json(r.min_p_value)},
          {"residual_tol", r.residual_tol},
          {"alpha", r.alpha},
          {"flagged", r.flagged},
          {"entries", entries}};
}

Json to_json(const DecayReport& r) {
  return {{"k", r.k},
          {"n_max", r.n_max},
          {"cov_norms", numbers_json(r.cov_norms)},
          {"mean_norms", numbers_json(r.mean_norms)},
          {"quantile_norms", numbers_json(r.quantile_norms)},
          {"rate", number_json(r.rate)},
          {"decays", r.decays},
          {"reason", r.reason}};
}

Json to_json(const TwoSampleResult& r) {
  return {{"statistic", number_json(r.statistic)},
          {"p_value", number_json(r.p_value)},
          {"n_a", r.n_a},
          {"n_b", r.n_b},
          {"permutations", r.permutations},
          {"seed", r.seed}};
}

Json to_json(const SolutionFamily& f, const std::vector<std::string>& files) {
  Json marginals = Json::array();
  for (std::int64_t k = f.k_min; k <= f.k_max; ++k) {
    const auto i = static_cast<std::size_t>(k - f.k_min);
    marginals.push_back(marginal_json(k, f.marginals[i], i < files.size() ? files[i] : std::string()));
  }
  Json residuals = Json::array();
  for (const auto& e : f.residuals) residuals.push_back(entry_json(e));
  return {{"kind", to_string(f.kind)},
          {"dim", f.dim},
          {"k_min", f.k_min},
          {"k_max", f.k_max},
          {"shift", vector_to_json(f.shift)},
          {"truncation", f.truncation},
          {"certified", f.certified},
          {"horizon", f.horizon},
          {"tol", f.tol},
          {"seed", f.seed},
          {"marginals", marginals},
          {"residuals", residuals}};
}

SolutionFamily family_from_json(const Json& in, const std::string& base_dir) {
  const Json& j = in.contains("solution") ? in.at("solution") : in;
  if (!j.is_object()) throw InputError("solution: expected an object");
  SolutionFamily f;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian_closed_form") {
      f.kind = SolutionKind::gaussian_closed_form;
    } else if (kind == "dirac_exact") {
      f.kind = SolutionKind::dirac_exact;
    } else if (kind == "empirical") {
      f.kind = SolutionKind::empirical;
    } else {
      throw InputError("solution.kind: unknown kind '" + kind + "'");
    }
    f.dim = j.at("dim").get<int>();
    f.k_min = j.at("k_min").get<std::int64_t>();
    f.k_max = j.at("k_max").get<std::int64_t>();
    if (f.dim < 1 || f.k_min > f.k_max) throw InputError("solution: bad dim or window");
    f.shift = vector_from_json(j.at("shift"), "solution.shift", f.dim);
    f.truncation = j.value("truncation", std::int64_t{0});
    f.certified = j.value("certified", true);
    f.horizon = j.value("horizon", 0);
    f.tol = j.value("tol", 0.0);
    f.seed = j.value("seed", std::uint64_t{0});
    const Json& ms = j.at("marginals");
    if (!ms.is_array() || ms.size() != static_cast<std::size_t>(f.k_max - f.k_min + 1)) {
      throw InputError("solution.marginals: expected one entry per k in the window");
    }
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string path = "solution.marginals[" + std::to_string(i) + "]";
      const Json& m = ms[i];
      if (m.at("k").get<std::int64_t>() != f.k_min + static_cast<std::int64_t>(i)) {
        throw InputError(path + ".k: marginals must be listed in window order");
      }
      if (f.kind == SolutionKind::gaussian_closed_form) {
        f.marginals.push_back(GaussianRepr{vector_from_json(m.at("mean"), path + ".mean", f.dim),
                                           matrix_from_json(m.at("cov"), path + ".cov", f.dim, f.dim)});
      } else if (f.kind == SolutionKind::dirac_exact) {
        f.marginals.push_back(DiracRepr{vector_from_json(m.at("point"), path + ".point", f.dim)});
      } else {
        EmpiricalRepr e;
        e.samples = parse_samples_csv(read_file(join_path(base_dir, m.at("file").get<std::string>())));
        if (e.samples.cols() != f.dim) throw InputError(path + ".file: sample dimension mismatch");
        e.seed = m.value("seed", std::uint64_t{0});
        e.truncation = m.value("truncation", f.truncation);
        e.certified = m.value("certified", f.certified);
        f.marginals.push_back(std::move(e));
      }
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("solution: malformed field: ") + e.what());
  }
  return f;
}

// --- commands ------------------------------------------------------------------

CommandResult cmd_analyze(const RunConfig& config) {
  const SolverOptions opts = solver_options(config.options);
  const ExistenceReport rep = analyze_existence(config.process, config.map, opts);
  CommandResult r;
  r.report["existence"] = to_json(rep);
  r.exit_code = exit_for_status(rep.status);
  return r;
}

CommandResult cmd_solve(const RunConfig& config) {
  const RunOptions& o = config.options;
  const SolverOptions opts = solver_options(o);
  const ExistenceReport existence = analyze_existence(config.process, config.map, opts);
  CommandResult r;
  r.report["existence"] = to_json(existence);
  if (existence.status != ExistenceStatus::exists && !o.force) {
    r.exit_code = exit_for_status(existence.status);
    r.report["solution"] = nullptr;
    return r;
  }
  SolutionFamily fam = solve_fundamental(config.process, config.map, o.k_min, o.k_max, opts, &existence);
  if (!o.shift_v.empty()) {
    if (static_cast<int>(o.shift_v.size()) != config.dim) {
      throw InputError("shift_v: expected " + std::to_string(config.dim) + " entries");
    }
    fam = extremal_family(fam, Eigen::Map<const Eigen::VectorXd>(o.shift_v.data(), config.dim), config.map);
  }
  std::vector<std::string> names;
  if (fam.kind == SolutionKind::empirical) {
    if (o.out.empty()) throw InputError("solve: empirical solutions need an output directory (--out)");
    for (std::int64_t k = fam.k_min; k <= fam.k_max; ++k) {
      const auto& e = std::get<EmpiricalRepr>(fam.at(k));
      names.push_back(samples_file_name(k));
      const std::string path = join_path(o.out, names.back());
      write_file_atomic(path, samples_csv(e.samples));
      r.files.push_back(path);
    }
  }
  r.report["solution"] = to_json(fam, names);
  return r;
}

CommandResult cmd_verify(const RunConfig& config) {
  const RunOptions& o = config.options;
  const SolverOptions opts = solver_options(o);
  CommandResult r;
  SolutionFamily fam;
  std::string source;
  if (!o.solution.empty()) {
    source = o.solution;
  } else if (!o.out.empty() && fs::exists(join_path(o.out, "solve.json"))) {
    source = join_path(o.out, "solve.json");
  }
  if (!source.empty()) {
    Json j;
    try {
      j = Json::parse(read_file(source));
    } catch (const Json::parse_error& e) {
      throw InputError("solution file " + source + ": " + e.what());
    }
    const std::string dir = fs::path(source).has_parent_path() ? fs::path(source).parent_path().string() : ".";
    fam = family_from_json(j, dir);
    if (fam.dim != config.dim) {
      throw InputError("solution dimension " + std::to_string(fam.dim) + " does not match config dim " +
                       std::to_string(config.dim));
    }
    if (fam.k_min != o.k_min || fam.k_max != o.k_max) {
      throw InputError("solution window [" + std::to_string(fam.k_min) + ", " + std::to_string(fam.k_max) +
                       "] does not match config window [" + std::to_string(o.k_min) + ", " +
                       std::to_string(o.k_max) + "]");
    }
    r.report["solution_source"] = source;
  } else {
    const ExistenceReport existence = analyze_existence(config.process, config.map, opts);
    r.report["existence"] = to_json(existence);
    if (existence.status != ExistenceStatus::exists && !o.force) {
      r.exit_code = exit_for_status(existence.status);
      return r;
    }
    fam = solve_fundamental(config.process, config.map, o.k_min, o.k_max, opts, &existence);
    r.report["solution_source"] = "computed";
  }
  const VerificationReport v = verify_solution(fam, config.process, config.map, opts);
  r.report["verification"] = to_json(v);
  const int n_max = static_cast<int>(std::min<std::int64_t>(kDecaySteps, fam.k_max - fam.k_min));
  if (n_max >= 1) {
    r.report["decay"] = to_json(strong_decomposability_check(fam, config.map, n_max));
  } else {
    r.report["decay"] = nullptr;
  }
  r.exit_code = v.passed ? kExitOk : kExitVerifyFailed;
  return r;
}

CommandResult cmd_simulate(const RunConfig& config) {
  const RunOptions& o = config.options;
  const std::int64_t k_start = o.k_start.value_or(o.k_min);
  const std::int64_t k_end = o.k_end.value_or(o.k_max);
  if (k_start >= k_end) {
    throw InputError("simulate: requires k_start < k_end, got " + std::to_string(k_start) + " and " +
                     std::to_string(k_end));
  }
  const SolverOptions opts = solver_options(o);
  CommandResult r;

  // Existence is only needed for the fundamental comparison and the
  // fundamental initial law; a failed analysis just skips those.
  std::optional<ExistenceReport> existence;
  std::string skip_reason;
  try {
    existence = analyze_existence(config.process, config.map, opts);
    r.report["existence"] = to_json(*existence);
    if (existence->status != ExistenceStatus::exists) {
      skip_reason = std::string("existence status is ") + to_string(existence->status);
    }
  } catch (const Error& e) {
    skip_reason = std::string("existence analysis failed: ") + e.what();
    r.report["existence"] = nullptr;
  }
  const bool have_fundamental = skip_reason.empty();
  const auto fundamental_at = [&](std::int64_t k) {
    return solve_fundamental(config.process, config.map, k, k, opts, &*existence).at(k);
  };

  MeasureRepr initial = DiracRepr{Eigen::VectorXd::Zero(config.dim)};
  std::string initial_label = "dirac_zero";
  if (o.initial_fundamental) {
    if (!have_fundamental) throw PreconditionError("simulate: fundamental initial law unavailable: " + skip_reason);
    initial = fundamental_at(k_start);
    initial_label = "fundamental";
  } else if (o.initial) {
    initial = repr_from_model(*o.initial, o.samples, derive_seed(o.seed, kInitialDrawStream));
    initial_label = "model";
  }

  const PathEnsemble paths = simulate_paths(config.process, config.map, initial, k_start, k_end,
                                            o.samples, o.seed);
  Json sim = {{"k_start", k_start},
              {"k_end", k_end},
              {"n_paths", paths.n_paths},
              {"seed", paths.seed},
              {"initial", initial_label},
              {"max_recursion_residual", number_json(paths.max_residual(config.map))}};

  Json comparisons = Json::array();
  if (!have_fundamental) {
    sim["comparison_skipped"] = skip_reason;
  } else if (o.samples < 50) {
    sim["comparison_skipped"] = "fewer than 50 paths";
  } else {
    const std::int64_t mid = k_start + (k_end - k_start) / 2;
    std::vector<std::int64_t> ks{k_end};
    if (mid > k_start) ks.insert(ks.begin(), mid);
    for (std::int64_t k : ks) {
      const MeasureRepr fund = fundamental_at(k);
      const Eigen::MatrixXd a = cap_rows(paths.marginal(k), kCompareRowCap);
      const Eigen::MatrixXd b = cap_rows(sample(fund, o.samples, derive_seed(o.seed, kCompareDrawStream, k)),
                                         kCompareRowCap);
      const TwoSampleResult t =
          energy_distance_test(a, b, o.permutations, derive_seed(o.seed, kComparePermStream, k));
      Json c = to_json(t);
      c["k"] = k;
      comparisons.push_back(std::move(c));
    }
  }
  sim["fundamental_comparison"] = comparisons;

  if (!o.out.empty()) {
    const std::string path = join_path(o.out, "paths.csv");
    write_file_atomic(path, paths_csv(paths));
    r.files.push_back(path);
    sim["paths_file"] = "paths.csv";
  } else {
    sim["paths_file"] = nullptr;
  }
  r.report["simulation"] = std::move(sim);
  return r;
}

// --- dispatch ----------------------------------------------------------------

namespace {

Json error_json(const std::exception& e) { return {{"type", error_type(e)}, {"message", e.what()}}; }

void finish(CommandResult& r, const std::string& command, const RunConfig* config, double seconds) {
  Json header = {{"schema", kReportSchema}, {"command", command}, {"exit_code", r.exit_code},
                 {"wall_clock_seconds", seconds}};
  if (config) {
    const std::string text = serialize_config(*config);
    header["config"] = to_json(*config);
    header["config_hash"] = fnv1a_hex(text);
    header["seed"] = config->options.seed;
  } else {
    header["config"] = nullptr;
    header["config_hash"] = nullptr;
    header["seed"] = nullptr;
  }
  Json files = Json::array();
  for (const auto& f : r.files) files.push_back(fs::path(f).filename().string());
  header["files"] = files;
  for (auto& [key, value] : header.items()) r.report[key] = value;
}

}  // namespace

CommandResult run_command(const std::string& command, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  CommandResult r;
  try {
    if (command == "analyze") {
      r = cmd_analyze(config);
    } else if (command == "solve") {
      r = cmd_solve(config);
    } else if (command == "verify") {
      r = cmd_verify(config);
    } else if (command == "simulate") {
      r = cmd_simulate(config);
    } else {
      throw InputError("unknown command '" + command + "'");
    }
  } catch (const std::exception& e) {
    r = CommandResult{};
    r.exit_code = exit_code_for(e);
    r.report["error"] = error_json(e);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  finish(r, command, &config, seconds);
  if (!config.options.out.empty()) {
    try {
      write_file_atomic(join_path(config.options.out, command + ".json"), r.report.dump(2) + "\n");
    } catch (const std::exception& e) {
      r.exit_code = kExitInput;
      r.report["exit_code"] = r.exit_code;
      r.report["error"] = error_json(e);
    }
  }
  return r;
}

CommandResult run_command_text(const std::string& command, const std::string& config_text) {
  RunConfig config;
  try {
    config = parse_config(config_text);
  } catch (const std::exception& e) {
    CommandResult r;
    r.exit_code = exit_code_for(e);
    r.report["error"] = error_json(e);
    finish(r, command, nullptr, 0.0);
    return r;
  }
  return run_command(command, config);
}

}  // namespace decomp::cli
