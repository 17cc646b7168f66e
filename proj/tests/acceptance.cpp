// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "decomp/cli.hpp"
#include "decomp/error.hpp"
#include "decomp/spectral.hpp"
#include "test_support.hpp"

using namespace decomp;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kExactTol = 1e-9;
constexpr double kSolverAgreeTol = 1e-8;
constexpr double kResidualTol = 1e-9;
constexpr double kShiftTol = 1e-10;
constexpr double kProjectorTol = 1e-8;
constexpr double kNormTol = 1e-8;
constexpr double kSeriesTermTol = 1e-9;
constexpr double kSigmas = 3.0;
constexpr double kAlpha = 0.01;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::VectorXd one(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd m1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

NoiseProcess stationary(const NoiseModel& m) { return NoiseProcess(m.dim(), {}, StationaryTail{m}); }

SolverOptions window(std::int64_t lo, std::int64_t hi) {
  SolverOptions o;
  o.k_min = lo;
  o.k_max = hi;
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 1. Stationary Gaussian fixed point by two solvers.
Outcome stationary_fixed_point() {
  Outcome o;
  const LinearMap half = LinearMap::scalar(1, 0.5);
  const SeriesResult s = covariance_series(half, [](std::int64_t) { return m1(1.0); },
                                           [](std::int64_t) { return one(0.0); }, 0);
  const double ly = lyapunov_fixed_point(half, m1(1.0))(0, 0);
  const double e1 = std::abs(s.covariance(0, 0) - 4.0 / 3.0), e2 = std::abs(ly - 4.0 / 3.0);
  o.pass = s.status == SeriesStatus::converged && e1 <= kExactTol && e2 <= kExactTol;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mod(0.05, 0.95);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double a = mod(rng), b = mod(rng);
    // Even instances get a rotation block, odd ones two real eigenvalues.
    const Eigen::MatrixXd phi = testing::planted_matrix(rng, i % 2 == 0 ? std::vector<double>{a, a} : std::vector<double>{a, b});
    const Eigen::MatrixXd cov = testing::random_psd(rng, 2);
    const LinearMap map(phi);
    const SeriesResult r = covariance_series(map, [&](std::int64_t) { return cov; },
                                             [](std::int64_t) { return Eigen::VectorXd::Zero(2); }, 0);
    if (r.status != SeriesStatus::converged) o.pass = false;
    worst = std::max(worst, (r.covariance - lyapunov_fixed_point(map, cov)).norm());
  }
  o.pass = o.pass && worst <= kSolverAgreeTol;
  o.detail = "|B-4/3| series " + fmt("%.2e", e1) + ", lyapunov " + fmt("%.2e", e2) +
             "; 2-d max Frobenius gap " + fmt("%.2e", worst);
  return o;
}

// 2. Pushed uniform noise: no solution, constant series term 1/12.
Outcome pushed_uniform_nonexistence() {
  RunConfig c;
  c.dim = 1;
  c.map = LinearMap::scalar(1, 0.9);
  c.process = NoiseProcess(1, {}, PushforwardPowerTail{NoiseModel::uniform_box(one(0.0), one(1.0)), LinearMap::scalar(1, 0.9)});
  c.options.horizon = 1000;
  const cli::CommandResult r = cli::cmd_analyze(c);
  Outcome o;
  double term = NAN;
  for (const auto& e : r.report.at("existence").at("evidence"))
    if (e.at("name") == "late_series_term" && e.at("value").is_number()) term = e.at("value").get<double>();
  o.pass = r.exit_code == cli::kExitNotExists && std::abs(term - 1.0 / 12.0) <= kSeriesTermTol;
  o.detail = "exit " + std::to_string(r.exit_code) + ", series term " + fmt("%.12g", term);
  return o;
}

// 3. Existence with a purely expanding map.
Outcome expanding_existence() {
  const SeriesResult s = covariance_series(
      LinearMap::scalar(1, 2.0), [](std::int64_t k) { return m1(std::pow(8.0, static_cast<double>(k))); },
      [](std::int64_t) { return one(0.0); }, 0);
  Outcome o;
  const double err = std::abs(s.covariance(0, 0) - 2.0);
  o.pass = s.status == SeriesStatus::converged && err <= kExactTol;
  o.detail = std::string("status ") + to_string(s.status) + ", |B0-2| " + fmt("%.2e", err);
  return o;
}

// 4. Split map, noise covariance on the contracting axis.
Outcome split_round_trip() {
  const Eigen::Vector2d m(1.0, -1.0);
  const Eigen::Matrix2d a{{1.0, 0.0}, {0.0, 0.0}};
  const NoiseProcess proc = stationary(NoiseModel::gaussian(m, a));
  const LinearMap map = LinearMap::diagonal(Eigen::Vector2d(0.5, 2.0));
  const SolverOptions opts = window(-10, 10);
  const ExistenceReport rep = analyze_existence(proc, map, opts);
  Outcome o;
  if (rep.status != ExistenceStatus::exists) return {false, "status " + std::string(to_string(rep.status))};
  const SolutionFamily f = solve_fundamental(proc, map, -10, 10, opts, &rep);
  double worst = 0.0;
  const Eigen::MatrixXd& phi = map.matrix();
  for (std::int64_t k = -9; k <= 10; ++k) {
    const auto& cur = std::get<GaussianRepr>(f.at(k));
    const auto& prev = std::get<GaussianRepr>(f.at(k - 1));
    worst = std::max(worst, (cur.cov - a - phi * prev.cov * phi.transpose()).norm() / (1.0 + cur.cov.norm()));
    worst = std::max(worst, (cur.mean - m - phi * prev.mean).norm() / (1.0 + cur.mean.norm()));
  }
  o.pass = worst <= kResidualTol;
  o.detail = std::string("route ") + to_string(*rep.route) + ", max relative residual " + fmt("%.2e", worst);
  return o;
}

// 5. Shift equation with expanding weight.
Outcome shift_counterexample() {
  const ShiftSolvability bad = lp_shift_solvable(2.0, one(1.0), LinearMap::scalar(1, 4.0), 2.0, 60);
  bool exact = !bad.partial_sums.empty();
  for (std::size_t n = 0; n < bad.partial_sums.size(); ++n)
    exact = exact && bad.partial_sums[n](0) == std::ldexp(1.0, static_cast<int>(n + 1)) - 1.0;
  const ShiftSolvability good = lp_shift_solvable(2.0, one(1.0), LinearMap::scalar(1, 0.25), 2.0, 60);
  Outcome o;
  o.pass = bad.verdict == ShiftVerdict::divergent && exact && good.verdict == ShiftVerdict::solvable;
  o.detail = std::string("phi=4: ") + to_string(bad.verdict) + " (" + std::to_string(bad.partial_sums.size()) +
             " partial sums, exact=" + (exact ? "yes" : "no") + "); phi=0.25: " + to_string(good.verdict);
  return o;
}

// 6. Three-series check for the decaying mixture.
Outcome three_series() {
  const ThreeSeriesReport r = lp_path_check(NoiseProcess(1, {}, DecayMixtureTail{0.5}), 2.0, 1000);
  const double total = r.s1 + r.s1_tail;
  Outcome o;
  o.pass = r.verdict == LpVerdict::lp_paths_yes && r.tails_certified && std::abs(total - 2.0) <= kExactTol;
  o.detail = std::string(to_string(r.verdict)) + ", s1 total " + fmt("%.12g", total);
  return o;
}

// 7. Sampled fundamental solution for uniform noise.
Outcome monte_carlo_uniform() {
  const NoiseProcess proc = stationary(NoiseModel::uniform_box(one(0.0), one(1.0)));
  const LinearMap map = LinearMap::scalar(1, 0.5);
  SolverOptions opts = window(-1, 1);
  opts.samples = 100000;
  opts.tol = 1e-6;
  opts.seed = 2024;
  const SolutionFamily f = solve_fundamental(proc, map, -1, 1, opts);
  const auto mom = testing::column_moments(std::get<EmpiricalRepr>(f.at(0)).samples);
  const VerificationReport v = verify_solution(f, proc, map, opts);
  Outcome o;
  const double zm = std::abs(mom.mean - 1.0) / mom.mean_se;
  const double zv = std::abs(mom.var - 1.0 / 9.0) / mom.var_se;
  o.pass = zm <= kSigmas && zv <= kSigmas && v.min_p_value > kAlpha;
  o.detail = "mean z " + fmt("%.2f", zm) + ", variance z " + fmt("%.2f", zv) + ", min p " + fmt("%.3f", v.min_p_value) +
             ", N " + std::to_string(f.truncation);
  return o;
}

// 8. Extremal family and uniqueness up to shift.
Outcome extremal_uniqueness() {
  Outcome o;
  double worst = 0.0;
  bool verified = true;
  const auto check = [&](const NoiseProcess& proc, const LinearMap& map) {
    const SolverOptions opts = window(-10, 10);
    const SolutionFamily base = solve_fundamental(proc, map, -10, 10, opts);
    const int d = map.dim();
    const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d, 0);
    const SolutionFamily shifted = extremal_family(base, e1, map);
    for (std::int64_t k = -10; k <= 10; ++k) {
      const auto& a = std::get<GaussianRepr>(base.at(k));
      const auto& b = std::get<GaussianRepr>(shifted.at(k));
      const Eigen::VectorXd gap = map.power(k) * e1;
      worst = std::max(worst, (b.cov - a.cov).norm());
      worst = std::max(worst, (b.mean - a.mean - gap).norm() / (1.0 + gap.norm()));
    }
    for (double s : {0.0, 1.0, -2.5}) {
      const SolutionFamily g = extremal_family(base, s * Eigen::VectorXd::Ones(d), map);
      verified = verified && verify_solution(g, proc, map, opts).passed;
    }
    verified = verified && verify_solution(shifted, proc, map, opts).passed;
  };
  check(stationary(NoiseModel::gaussian(one(0.0), m1(1.0))), LinearMap::scalar(1, 0.5));
  check(stationary(NoiseModel::gaussian(Eigen::Vector2d(1.0, -1.0), Eigen::Matrix2d{{1.0, 0.0}, {0.0, 0.0}})),
        LinearMap::diagonal(Eigen::Vector2d(0.5, 2.0)));
  o.pass = worst <= kShiftTol && verified;
  o.detail = "max gap error " + fmt("%.2e", worst) + ", shifted families verified: " + (verified ? "yes" : "no");
  return o;
}

// 9. Contraction split on planted spectra.
Outcome split_properties() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim_dist(2, 6);
  std::uniform_real_distribution<double> stable(0.05, 0.9), unstable(1.1, 3.0);
  std::bernoulli_distribution coin(0.5);
  int failures = 0;
  double worst_proj = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim_dist(rng);
    std::vector<double> moduli;
    int planted_stable = 0;
    while (static_cast<int>(moduli.size()) < d) {
      const bool st = coin(rng);
      const double m = st ? stable(rng) : unstable(rng);
      const int copies = (static_cast<int>(moduli.size()) + 2 <= d && coin(rng)) ? 2 : 1;
      for (int c = 0; c < copies; ++c) moduli.push_back(m);
      if (st) planted_stable += copies;
    }
    const Eigen::MatrixXd phi = testing::planted_matrix(rng, moduli);
    const ContractionSplit s = contraction_split(LinearMap(phi));
    const Eigen::MatrixXd& p = s.projector;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    bool ok = s.contraction_dim() == planted_stable;
    const double idem = (p * p - p).cwiseAbs().maxCoeff();
    const double inv = std::max((p * phi - p * phi * p).cwiseAbs().maxCoeff(),
                                ((id - p) * phi * (id - p) - (id - p) * phi).cwiseAbs().maxCoeff()) /
                       (1.0 + phi.norm());
    worst_proj = std::max({worst_proj, idem, inv});
    ok = ok && idem <= kProjectorTol && inv <= kProjectorTol;
    for (int c = 0; ok && c < s.contraction_dim(); ++c) {
      Eigen::VectorXd v = s.contraction_basis.col(c);
      for (int n = 1; ok && n <= 200; ++n) {
        v = p * (phi * v);
        ok = v.stableNorm() <= s.decay_constant * std::pow(s.contraction_rate + s.tol, n) * (1 + 1e-9);
      }
    }
    for (int c = 0; ok && c < s.complement_basis.cols(); ++c) {
      Eigen::VectorXd u = s.complement_basis.col(c);
      for (int n = 1; ok && n <= 200 && u.norm() < 1e100; ++n) {
        u = phi * u;
        ok = u.norm() >= s.tol;
      }
    }
    if (!ok) ++failures;
  }
  return {failures == 0, std::to_string(failures) + "/100 failing, worst projector error " + fmt("%.2e", worst_proj)};
}

// 10. Weighted shift on a finite window.
Outcome weighted_shift_norm() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 4;
    Eigen::MatrixXd phi(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) phi(r, c) = g(rng);
    const double expect = Eigen::JacobiSVD<Eigen::MatrixXd>(phi).singularValues()(0);
    for (int len : {2, 5, 10}) {
      const Eigen::MatrixXd t = weighted_shift_matrix(LinearMap(phi), len);
      worst = std::max(worst, std::abs(Eigen::JacobiSVD<Eigen::MatrixXd>(t).singularValues()(0) - expect));
    }
  }
  return {worst <= kNormTol, "max |norm gap| " + fmt("%.2e", worst)};
}

// 11. Byte-identical data files from repeated runs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("decomp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  RunConfig c;
  c.dim = 1;
  c.map = LinearMap::scalar(1, 0.5);
  c.process = stationary(NoiseModel::uniform_box(one(0.0), one(1.0)));
  c.options.k_min = -2;
  c.options.k_max = 2;
  c.options.samples = 5000;
  c.options.tol = 1e-6;
  c.options.seed = 123456789;
  std::vector<std::vector<std::string>> contents;
  int exits = 0;
  for (int run = 0; run < 2; ++run) {
    c.options.out = (root / ("run" + std::to_string(run))).string();
    std::vector<std::string> data;
    for (const char* cmd : {"solve", "simulate"}) {
      const cli::CommandResult r = cli::run_command(cmd, c);
      exits += r.exit_code;
      for (const auto& f : r.files) data.push_back(fs::path(f).filename().string() + "\n" + read_file(f));
    }
    contents.push_back(std::move(data));
  }
  fs::remove_all(root);
  const bool same = contents[0] == contents[1] && !contents[0].empty();
  return {same && exits == 0, std::to_string(contents[0].size()) + " data files per run, identical: " + (same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "stationary Gaussian fixed point", 1.0, stationary_fixed_point},
      {2, "pushed uniform noise has no solution", 1.0, pushed_uniform_nonexistence},
      {3, "expanding map with growing covariances", 1.0, expanding_existence},
      {4, "split map round trip", 0.0, split_round_trip},
      {5, "shift equation counterexample", 1.0, shift_counterexample},
      {6, "three-series check", 1.0, three_series},
      {7, "Monte Carlo fundamental solution", 30.0, monte_carlo_uniform},
      {8, "extremal family and uniqueness", 1.0, extremal_uniqueness},
      {9, "contraction split properties", 5.0, split_properties},
      {10, "finite-window weighted shift norm", 1.0, weighted_shift_norm},
      {11, "determinism of data files", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.3fs", secs);
    if (c.time_limit_s > 0.0) {
      timing += fmt(" (limit %.0fs)", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.pass = false;
        o.detail += "; time limit exceeded";
      }
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %-40s %s [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
