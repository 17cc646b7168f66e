#include "decomp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "decomp/error.hpp"
#include "decomp/mc.hpp"
#include "decomp/seed.hpp"

namespace decomp {

const char* to_string(ExistenceStatus s) noexcept {
  switch (s) {
    case ExistenceStatus::exists: return "exists";
    case ExistenceStatus::not_exists: return "not_exists";
    case ExistenceStatus::undetermined: return "undetermined";
  }
  return "undetermined";
}

const char* to_string(Route r) noexcept {
  switch (r) {
    case Route::stationary_thm: return "stationary_thm";
    case Route::gaussian_series: return "gaussian_series";
    case Route::lp_paths_thm: return "lp_paths_thm";
    case Route::dirac_exact: return "dirac_exact";
    case Route::mc_empirical: return "mc_empirical";
  }
  return "mc_empirical";
}

const char* to_string(SolutionKind k) noexcept {
  switch (k) {
    case SolutionKind::gaussian_closed_form: return "gaussian_closed_form";
    case SolutionKind::dirac_exact: return "dirac_exact";
    case SolutionKind::empirical: return "empirical";
  }
  return "empirical";
}

const MeasureRepr& SolutionFamily::at(std::int64_t k) const {
  if (k < k_min || k > k_max) {
    throw InputError("SolutionFamily: k=" + std::to_string(k) + " outside window");
  }
  return marginals[static_cast<std::size_t>(k - k_min)];
}

namespace {

constexpr std::int64_t kDefaultTruncation = 200;
constexpr std::int64_t kMultiDimTestCap = 1000;

// Seed streams.
constexpr std::int64_t kLogMomentStream = 0x21;
constexpr std::int64_t kMpStream = 0x22;
constexpr std::int64_t kDiagnosticStream = 0x23;
constexpr std::int64_t kMarginalStream = 0x24;
constexpr std::int64_t kVerifyNoiseStream = 0x25;
constexpr std::int64_t kVerifyPermStream = 0x26;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

void validate(const NoiseProcess& process, const LinearMap& map, const SolverOptions& opts) {
  if (map.dim() != process.dim()) {
    throw InputError("map dimension " + std::to_string(map.dim()) +
                     " does not match process dimension " + std::to_string(process.dim()));
  }
  if (!map.invertible()) {
    throw HypothesisError("the existence and construction results assume an invertible linear map "
                          "(condition number " + fmt(map.condition_number()) + ")");
  }
  if (opts.k_min > opts.k_max) throw InputError("k_min must be <= k_max");
  if (opts.horizon < 1) throw InputError("horizon must be >= 1");
  if (!(opts.tol > 0.0)) throw InputError("tol must be > 0");
  if (!(opts.p >= 1.0) || !std::isfinite(opts.p)) throw InputError("p must lie in [1, inf)");
  if (opts.samples < 1) throw InputError("samples must be >= 1");
}

bool is_point_mass(const NoiseModel& m) {
  const auto r = centered_support_radius(m);
  return r && *r == 0.0;
}

struct RouteOutcome {
  ExistenceStatus status = ExistenceStatus::undetermined;
  Route route = Route::gaussian_series;
  bool applicable = true;
};

// --- stationary route ------------------------------------------------------

RouteOutcome stationary_route(const NoiseProcess& process, const ContractionSplit& split,
                              const SolverOptions& opts, std::vector<Evidence>& ev) {
  const NoiseModel& mu = std::get<StationaryTail>(process.tail()).model;
  RouteOutcome out;
  out.route = Route::stationary_thm;
  if (is_point_mass(mu)) {
    ev.push_back({"point_mass_noise", "exists",
                  "noise is a point mass; the solution is the deterministic shift recursion", {}});
    out.status = ExistenceStatus::exists;
    out.route = Route::dirac_exact;
    return out;
  }
  if (split.contraction_dim() == 0) {
    ev.push_back({"contraction_subspace", "not_exists",
                  "C(phi) = {0} and the stationary noise is not a point mass", 0.0});
    out.status = ExistenceStatus::not_exists;
    return out;
  }
  const CosetResult coset = support_coset(mu, split, opts.split_tol);
  if (!coset.in_coset) {
    const bool undecidable = coset.certificate == "unsupported structure";
    ev.push_back({"coset_support", undecidable ? "undetermined" : "fails", coset.certificate, {}});
    out.status = undecidable ? ExistenceStatus::undetermined : ExistenceStatus::not_exists;
    return out;
  }
  std::ostringstream u;
  u << "supported on u + C(phi), u = [" << coset.offset.transpose() << "]; " << coset.certificate;
  ev.push_back({"coset_support", "holds", u.str(), coset.offset.norm()});

  const LogMomentReport lm = log_moment(mu, opts.moment_samples, derive_seed(opts.seed, kLogMomentStream));
  std::string detail = std::string("method ") + to_string(lm.method) + ", std error " + fmt(lm.std_error);
  if (!lm.note.empty()) detail += "; " + lm.note;
  ev.push_back({"log_moment", lm.infinite ? "infinite" : "finite", detail, lm.value});
  out.status = lm.infinite ? ExistenceStatus::undetermined : ExistenceStatus::exists;
  return out;
}

// --- series route ------------------------------------------------------------

RouteOutcome series_route(const NoiseProcess& process, const LinearMap& map,
                          const SolverOptions& opts, std::vector<Evidence>& ev) {
  RouteOutcome out;
  out.route = Route::gaussian_series;
  const bool gaussian = is_all_gaussian(process);
  const SeriesOptions so{opts.horizon, opts.tol, opts.cap};
  const auto cov_seq = [&](std::int64_t j) { return covariance(process.model_at(j)); };
  const auto mean_seq = [&](std::int64_t j) { return mean(process.model_at(j)); };

  int converged = 0, diverged = 0;
  std::int64_t first_diverged = 0;
  SeriesResult worst;
  for (std::int64_t k = opts.k_min; k <= opts.k_max; ++k) {
    SeriesResult s = covariance_series(map, cov_seq, mean_seq, k, so);
    if (s.status == SeriesStatus::converged) {
      ++converged;
    } else if (s.status == SeriesStatus::diverged) {
      // Report the diverging index nearest k = 0.
      if (diverged++ == 0 || std::abs(k) < std::abs(first_diverged)) {
        first_diverged = k;
        worst = std::move(s);
      }
    } else if (diverged == 0 && worst.term_norm_trace.empty()) {
      worst = std::move(s);
    }
  }
  const std::int64_t n_k = opts.k_max - opts.k_min + 1;
  if (converged == n_k) {
    ev.push_back({"covariance_series", "converged",
                  "covariance series converged at every k in the window" +
                      std::string(gaussian ? "" : " (finite-variance noise: centered sums converge)"),
                  static_cast<double>(n_k)});
    out.status = ExistenceStatus::exists;
    return out;
  }
  if (diverged == 0) {
    ev.push_back({"covariance_series", "undetermined", worst.reason, worst.tail_bound});
    return out;
  }
  ev.push_back({"covariance_series", "diverged",
                "k=" + std::to_string(first_diverged) + ": " + worst.reason, worst.late_term_mean});
  const auto& trace = worst.term_norm_trace;
  if (!trace.empty()) {
    const double last = trace.back();
    const bool constant =
        std::all_of(trace.end() - static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, trace.size() / 4)),
                    trace.end(), [&](double t) { return std::abs(t - last) <= 1e-9 * (1.0 + last); });
    ev.push_back({"late_series_term", constant ? "constant" : "non-decaying",
                  constant ? "constant series term " + fmt(last) : "series term norm non-decaying",
                  last});
  }
  if (gaussian) {
    out.status = ExistenceStatus::not_exists;
    return out;
  }
  // Non-Gaussian noise: divergence of the variance series rules out a
  // solution when the pushed summands φ^i(ξ_{k−i}) stay uniformly bounded.
  std::vector<double> radii;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(map.dim(), map.dim());
  for (int i = 0; i < opts.horizon; ++i) {
    if (!power.allFinite()) break;
    const auto r = centered_support_radius(
        NoiseModel::pushforward(process.model_at(first_diverged - i), LinearMap(power)));
    if (!r) {
      ev.push_back({"bounded_summands", "undetermined", "unbounded noise support", {}});
      return out;
    }
    radii.push_back(*r);
    power = map.matrix() * power;
  }
  const std::size_t half = radii.size() / 2;
  const double early = half ? *std::max_element(radii.begin(), radii.begin() + static_cast<std::ptrdiff_t>(half)) : 0.0;
  const double late = *std::max_element(radii.begin() + static_cast<std::ptrdiff_t>(half), radii.end());
  if (radii.size() >= 4 && late <= 1.5 * early + 1e-12) {
    ev.push_back({"bounded_summands", "holds",
                  "pushed centered summands uniformly bounded by " + fmt(std::max(early, late)),
                  std::max(early, late)});
    out.status = ExistenceStatus::not_exists;
  } else {
    ev.push_back({"bounded_summands", "undetermined",
                  "pushed summand radii grow (early " + fmt(early) + ", late " + fmt(late) + ")", late});
  }
  return out;
}

// --- l_p route -----------------------------------------------------------------

RouteOutcome lp_route(const NoiseProcess& process, const ContractionSplit& split,
                      const SolverOptions& opts, std::vector<Evidence>& ev) {
  RouteOutcome out;
  out.route = Route::lp_paths_thm;
  const ThreeSeriesReport lp = lp_path_check(process, opts.p, opts.horizon);
  ev.push_back({"lp_path_check", to_string(lp.verdict),
                lp.reason + "; s1 = " + fmt(lp.s1 + lp.s1_tail) + ", s2 = " + fmt(lp.s2 + lp.s2_tail) +
                    ", s3 = " + fmt(lp.s3 + lp.s3_tail),
                lp.s1 + lp.s1_tail});
  if (lp.verdict != LpVerdict::lp_paths_yes) {
    out.applicable = false;
    return out;
  }
  const bool full = split.contraction_dim() == split.dim();
  if (!full) {
    if (std::holds_alternative<DecayMixtureTail>(process.tail())) {
      ev.push_back({"lp_coset_support", "fails", "tail laws are not supported on cosets of C(phi)", {}});
      return out;
    }
    std::int64_t lo = -20, hi = 20;
    if (!process.window().empty()) {
      lo = std::min(lo, process.window().begin()->first);
      hi = std::max(hi, process.window().rbegin()->first);
    }
    for (std::int64_t k = lo; k <= hi; ++k) {
      const CosetResult c = support_coset(process.model_at(k), split, opts.split_tol);
      if (!c.in_coset) {
        ev.push_back({"lp_coset_support", "fails", "k=" + std::to_string(k) + ": " + c.certificate, {}});
        return out;
      }
    }
  }
  ev.push_back({"lp_coset_support", "holds",
                full ? "C(phi) is the whole space" : "every law lies on a coset with l_p offsets", {}});
  const MpReport mp = mp_log_moment(process, opts.p, opts.mp_levels, opts.moment_samples,
                                    derive_seed(opts.seed, kMpStream));
  ev.push_back({"mp_log_moment", mp.estimate.infinite ? "infinite" : "finite",
                std::string(mp.stabilized ? "stabilized" : "not stabilized") + ", std error " +
                    fmt(mp.estimate.std_error) + ", subadditive bound " + fmt(mp.subadditive_bound),
                mp.estimate.value});
  out.status = mp.estimate.infinite ? ExistenceStatus::undetermined : ExistenceStatus::exists;
  return out;
}

// --- empirical route -----------------------------------------------------------

struct TruncationPlan {
  std::int64_t n = kDefaultTruncation;
  bool certified = false;
  double radius = 0.0;
  std::string reason;
};

// Certified N: every law sits on a coset of C(φ) with centered radius ≤ R, so
// the remainder of Σ φ^i(ξ − m) is at most K r^{N+1} R / (1 − r).
TruncationPlan plan_truncation(const NoiseProcess& process, const ContractionSplit& split,
                               const SolverOptions& opts) {
  TruncationPlan plan;
  if (opts.truncation > 0) plan.n = opts.truncation;
  const auto& tail = process.tail();
  std::vector<NoiseModel> models;
  for (const auto& [k, m] : process.window()) models.push_back(m);
  if (const auto* s = std::get_if<StationaryTail>(&tail)) {
    models.push_back(s->model);
  } else if (!std::holds_alternative<ZeroTail>(tail)) {
    plan.reason = "tail rule admits no uniform bound on the centered noise";
    return plan;
  }
  double radius = 0.0;
  for (const auto& m : models) {
    const auto r = centered_support_radius(m);
    if (!r) {
      plan.reason = "noise support is unbounded";
      return plan;
    }
    if (*r > 0.0 && !support_coset(m, split, opts.split_tol).in_coset) {
      plan.reason = "noise is not supported on a coset of C(phi)";
      return plan;
    }
    radius = std::max(radius, *r);
  }
  plan.radius = radius;
  plan.certified = true;
  if (radius == 0.0) {
    plan.n = 0;
    plan.reason = "centered noise vanishes";
    return plan;
  }
  const double r = split.contraction_rate + split.tol;
  const double k_const = split.decay_constant;
  std::int64_t n = 0;
  while (k_const * std::pow(r, static_cast<double>(n + 1)) * radius / (1.0 - r) > opts.tol) {
    if (++n > 100000) {
      plan.certified = false;
      plan.n = opts.truncation > 0 ? opts.truncation : kDefaultTruncation;
      plan.reason = "certified truncation exceeds 100000 terms";
      return plan;
    }
  }
  plan.n = n;
  std::ostringstream why;
  why << "K r^(N+1) R / (1 - r) <= " << opts.tol << " with K = " << k_const << ", r = " << r
      << ", R = " << radius;
  plan.reason = why.str();
  return plan;
}

RouteOutcome empirical_route(const NoiseProcess& process, const LinearMap& map,
                             const ContractionSplit& split, const SolverOptions& opts,
                             std::vector<Evidence>& ev) {
  RouteOutcome out;
  out.route = Route::mc_empirical;
  const TruncationPlan plan = plan_truncation(process, split, opts);
  ev.push_back({"truncation_bound", plan.certified ? "certified" : "uncertified", plan.reason,
                static_cast<double>(plan.n)});

  // Cauchy diagnostic between truncation levels N and 2N.
  const std::int64_t n_base = std::max<std::int64_t>(plan.n, 10);
  const std::int64_t draws = process.dim() == 1 ? 2000 : 500;
  const auto centering = [&](std::int64_t j) { return mean(process.model_at(j)); };
  const std::uint64_t s = derive_seed(opts.seed, kDiagnosticStream);
  const auto a = backward_partial_sample(process, map, opts.k_max, n_base, draws, derive_seed(s, 1), centering);
  const auto b = backward_partial_sample(process, map, opts.k_max, 2 * n_base, draws, derive_seed(s, 2), centering);
  if (a.samples.allFinite() && b.samples.allFinite()) {
    const TwoSampleResult t = energy_distance_test(a.samples, b.samples, 200, derive_seed(s, 3));
    ev.push_back({"truncation_cauchy_test", t.p_value > opts.alpha ? "no rejection" : "rejects",
                  "energy test between N = " + std::to_string(n_base) + " and 2N, statistic " +
                      fmt(t.statistic),
                  t.p_value});
  } else {
    ev.push_back({"truncation_cauchy_test", "rejects", "partial sums overflow", {}});
  }
  if (plan.certified) out.status = ExistenceStatus::exists;
  return out;
}

}  // namespace

ExistenceReport analyze_existence(const NoiseProcess& process, const LinearMap& map,
                                  const SolverOptions& opts) {
  validate(process, map, opts);
  ExistenceReport rep;
  rep.horizon = opts.horizon;
  rep.tol = opts.tol;
  rep.p = opts.p;
  rep.k_min = opts.k_min;
  rep.k_max = opts.k_max;

  const ContractionSplit split = contraction_split(map, opts.split_tol);
  rep.evidence.push_back({"contraction_split", "computed",
                          "dim C(phi) = " + std::to_string(split.contraction_dim()) + " of " +
                              std::to_string(split.dim()) + ", contraction rate " +
                              fmt(split.contraction_rate),
                          static_cast<double>(split.contraction_dim())});

  const auto finish = [&](const RouteOutcome& o) {
    rep.status = o.status;
    if (o.status == ExistenceStatus::exists) rep.route = o.route;
    return rep;
  };
  const auto cross_check = [&](const RouteOutcome& first) {
    rep.routes_attempted.push_back("gaussian_series");
    std::vector<Evidence> side;
    const RouteOutcome s = series_route(process, map, opts, side);
    for (auto& e : side) {
      e.name = "cross_check." + e.name;
      rep.evidence.push_back(std::move(e));
    }
    const bool contradiction =
        (first.status == ExistenceStatus::exists && s.status == ExistenceStatus::not_exists) ||
        (first.status == ExistenceStatus::not_exists && s.status == ExistenceStatus::exists);
    if (contradiction) {
      throw ConsistencyError(std::string("route ") + to_string(first.route) + " says " +
                             to_string(first.status) + " but gaussian_series says " +
                             to_string(s.status));
    }
  };

  if (is_stationary(process)) {
    rep.routes_attempted.push_back("stationary_thm");
    const RouteOutcome o = stationary_route(process, split, opts, rep.evidence);
    if (o.status != ExistenceStatus::undetermined) {
      cross_check(o);
      return finish(o);
    }
  }

  rep.routes_attempted.push_back("gaussian_series");
  const RouteOutcome g = series_route(process, map, opts, rep.evidence);
  if (g.status != ExistenceStatus::undetermined) {
    RouteOutcome o = g;
    if (o.status == ExistenceStatus::exists && is_all_dirac(process)) o.route = Route::dirac_exact;
    return finish(o);
  }

  rep.routes_attempted.push_back("lp_paths_thm");
  const RouteOutcome l = lp_route(process, split, opts, rep.evidence);
  if (l.status == ExistenceStatus::exists) return finish(l);

  rep.routes_attempted.push_back("mc_empirical");
  const RouteOutcome e = empirical_route(process, map, split, opts, rep.evidence);
  return finish(e);
}

// --- construction ------------------------------------------------------------

SolutionFamily solve_fundamental(const NoiseProcess& process, const LinearMap& map,
                                 std::int64_t k_min, std::int64_t k_max,
                                 const SolverOptions& opts_in, const ExistenceReport* report) {
  SolverOptions opts = opts_in;
  opts.k_min = k_min;
  opts.k_max = k_max;
  validate(process, map, opts);

  ExistenceReport local;
  if (!report) {
    local = analyze_existence(process, map, opts);
    report = &local;
  }
  if (report->status != ExistenceStatus::exists && !opts.force) {
    throw PreconditionError(std::string("solve_fundamental: existence status is ") +
                            to_string(report->status) + "; pass force to construct anyway");
  }

  const int d = process.dim();
  const ContractionSplit split = contraction_split(map, opts.split_tol);
  const Eigen::MatrixXd proj = split.projector;
  const Eigen::MatrixXd comp = Eigen::MatrixXd::Identity(d, d) - proj;

  SolutionFamily fam;
  fam.dim = d;
  fam.k_min = k_min;
  fam.k_max = k_max;
  fam.shift = Eigen::VectorXd::Zero(d);
  fam.horizon = opts.horizon;
  fam.tol = opts.tol;
  fam.seed = opts.seed;
  if (is_all_dirac(process)) {
    fam.kind = SolutionKind::dirac_exact;
  } else if (is_all_gaussian(process)) {
    fam.kind = SolutionKind::gaussian_closed_form;
  } else {
    fam.kind = SolutionKind::empirical;
  }

  // Mean sequence: C(φ)-part by series when it converges, U-part (and a
  // non-converging C-part) by the shift recursion anchored at y_0 = 0.
  const SeriesOptions so{opts.horizon, opts.tol, opts.cap};
  const bool want_cov = fam.kind == SolutionKind::gaussian_closed_form;
  const auto cov_seq = [&](std::int64_t j) -> Eigen::MatrixXd {
    if (!want_cov) return Eigen::MatrixXd::Zero(d, d);
    return covariance(process.model_at(j));
  };
  const auto c_mean = [&](std::int64_t j) -> Eigen::VectorXd { return proj * mean(process.model_at(j)); };
  const auto u_mean = [&](std::int64_t j) -> Eigen::VectorXd { return comp * mean(process.model_at(j)); };

  std::vector<SeriesResult> series;
  bool c_series_ok = true;
  for (std::int64_t k = k_min; k <= k_max; ++k) {
    series.push_back(covariance_series(map, cov_seq, c_mean, k, so));
    c_series_ok = c_series_ok && series.back().mean_status == SeriesStatus::converged;
    if (want_cov && series.back().status != SeriesStatus::converged && !opts.force) {
      throw ConvergenceError("covariance series at k=" + std::to_string(k) +
                             " did not converge: " + series.back().reason);
    }
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const ShiftSequence u_part = solve_shift_recursion(u_mean, map, zero, k_min, k_max, 0);
  std::optional<ShiftSequence> c_part;
  if (!c_series_ok) c_part = solve_shift_recursion(c_mean, map, zero, k_min, k_max, 0);
  const auto mean_at = [&](std::int64_t k) -> Eigen::VectorXd {
    const Eigen::VectorXd c =
        c_part ? c_part->at(k) : series[static_cast<std::size_t>(k - k_min)].mean;
    return c + u_part.at(k);
  };

  if (fam.kind == SolutionKind::dirac_exact) {
    for (std::int64_t k = k_min; k <= k_max; ++k) fam.marginals.push_back(DiracRepr{mean_at(k)});
  } else if (fam.kind == SolutionKind::gaussian_closed_form) {
    for (std::int64_t k = k_min; k <= k_max; ++k) {
      const Eigen::MatrixXd& b = series[static_cast<std::size_t>(k - k_min)].covariance;
      fam.marginals.push_back(GaussianRepr{mean_at(k), 0.5 * (b + b.transpose())});
    }
  } else {
    const TruncationPlan plan = plan_truncation(process, split, opts);
    fam.truncation = plan.n;
    fam.certified = plan.certified;
    const auto centering = [&](std::int64_t j) { return mean(process.model_at(j)); };
    for (std::int64_t k = k_min; k <= k_max; ++k) {
      EmpiricalRepr e = backward_partial_sample(process, map, k, plan.n, opts.samples,
                                                derive_seed(opts.seed, kMarginalStream, k), centering);
      e.samples.rowwise() += mean_at(k).transpose();
      e.certified = plan.certified;
      if (!e.samples.allFinite()) {
        throw ConvergenceError("no empirical convergence at horizon N = " + std::to_string(plan.n) +
                               " (samples overflow)");
      }
      fam.marginals.push_back(std::move(e));
    }
  }

  if (fam.kind != SolutionKind::empirical) {
    fam.residuals = verify_solution(fam, process, map, opts).entries;
  }
  return fam;
}

SolutionFamily extremal_family(const SolutionFamily& base, const Eigen::VectorXd& v,
                               const LinearMap& map) {
  if (v.size() != base.dim || map.dim() != base.dim) {
    throw InputError("extremal_family: dimension mismatch");
  }
  SolutionFamily out = base;
  out.shift = base.shift + v;
  if (v.isZero(0.0)) return out;
  for (std::int64_t k = base.k_min; k <= base.k_max; ++k) {
    auto& m = out.marginals[static_cast<std::size_t>(k - base.k_min)];
    m = translate(m, apply_power(map, k, v));
  }
  return out;
}

// --- verification ------------------------------------------------------------

VerificationReport verify_solution(const SolutionFamily& family, const NoiseProcess& process,
                                   const LinearMap& map, const SolverOptions& opts) {
  if (family.dim != process.dim() || map.dim() != family.dim) {
    throw InputError("verify_solution: dimension mismatch");
  }
  if (family.marginals.size() != static_cast<std::size_t>(family.k_max - family.k_min + 1)) {
    throw InputError("verify_solution: marginal count does not match the window");
  }
  VerificationReport rep;
  rep.kind = family.kind;
  rep.residual_tol = opts.residual_tol;
  rep.alpha = opts.alpha;
  const Eigen::MatrixXd& phi = map.matrix();

  for (std::int64_t k = family.k_min + 1; k <= family.k_max; ++k) {
    VerificationEntry e;
    e.k = k;
    const NoiseModel noise = process.model_at(k);
    const MeasureRepr& cur = family.at(k);
    const MeasureRepr& prev = family.at(k - 1);
    if (cur.index() != prev.index()) throw InputError("verify_solution: mixed marginal kinds");

    if (const auto* g = std::get_if<GaussianRepr>(&cur)) {
      const auto& gp = std::get<GaussianRepr>(prev);
      const Eigen::MatrixXd rc = g->cov - covariance(noise) - phi * gp.cov * phi.transpose();
      const Eigen::VectorXd rm = g->mean - mean(noise) - phi * gp.mean;
      e.cov_residual = rc.norm() / (1.0 + g->cov.norm());
      e.mean_residual = rm.norm() / (1.0 + g->mean.norm());
      e.passed = e.cov_residual <= opts.residual_tol && e.mean_residual <= opts.residual_tol;
      if (!noise.is_gaussian_family()) {
        e.passed = false;
        e.note = "noise is not Gaussian";
      }
      rep.max_residual = std::max({rep.max_residual, e.cov_residual, e.mean_residual});
    } else if (const auto* x = std::get_if<DiracRepr>(&cur)) {
      const auto& xp = std::get<DiracRepr>(prev);
      const Eigen::VectorXd rm = x->point - mean(noise) - phi * xp.point;
      e.mean_residual = rm.norm() / (1.0 + x->point.norm());
      e.passed = e.mean_residual <= opts.residual_tol;
      if (!is_point_mass(noise)) {
        e.passed = false;
        e.note = "noise is not a point mass";
      }
      rep.max_residual = std::max(rep.max_residual, e.mean_residual);
    } else {
      const auto& ec = std::get<EmpiricalRepr>(cur);
      const auto& ep = std::get<EmpiricalRepr>(prev);
      std::int64_t cap = opts.max_test_samples;
      if (cap <= 0 && family.dim > 1) cap = kMultiDimTestCap;
      const auto head = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
        if (cap > 0 && m.rows() > cap) return m.topRows(cap);
        return m;
      };
      const Eigen::MatrixXd lhs = head(ec.samples);
      const Eigen::MatrixXd prev_s = head(ep.samples);
      const Eigen::MatrixXd rhs =
          sample(noise, prev_s.rows(), derive_seed(opts.seed, kVerifyNoiseStream, k)) +
          prev_s * phi.transpose();
      const TwoSampleResult t = energy_distance_test(lhs, rhs, opts.permutations,
                                                     derive_seed(opts.seed, kVerifyPermStream, k));
      e.statistic = t.statistic;
      e.p_value = t.p_value;
      e.passed = t.p_value > opts.alpha;
      rep.min_p_value = std::min(rep.min_p_value, t.p_value);
    }
    if (!e.passed) rep.flagged.push_back(k);
    rep.passed = rep.passed && e.passed;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

DecayReport strong_decomposability_check(const SolutionFamily& family, const LinearMap& map,
                                         int n_max) {
  if (n_max < 1) throw InputError("strong_decomposability_check: n_max must be >= 1");
  if (n_max > family.k_max - family.k_min) {
    throw InputError("strong_decomposability_check: window of length " +
                     std::to_string(family.k_max - family.k_min + 1) + " too short for n_max = " +
                     std::to_string(n_max));
  }
  if (map.dim() != family.dim) throw InputError("strong_decomposability_check: dimension mismatch");
  DecayReport rep;
  rep.k = family.k_max;
  rep.n_max = n_max;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(family.dim, family.dim);
  for (int n = 0; n <= n_max; ++n) {
    const MeasureRepr& m = family.at(rep.k - n);
    if (const auto* g = std::get_if<GaussianRepr>(&m)) {
      rep.cov_norms.push_back((power * g->cov * power.transpose()).norm());
      rep.mean_norms.push_back((power * g->mean).norm());
    } else if (const auto* x = std::get_if<DiracRepr>(&m)) {
      rep.cov_norms.push_back(0.0);
      rep.mean_norms.push_back((power * x->point).norm());
    } else {
      const auto& e = std::get<EmpiricalRepr>(m);
      const Eigen::RowVectorXd mu = e.samples.colwise().mean();
      const Eigen::MatrixXd centered = (e.samples.rowwise() - mu) * power.transpose();
      std::vector<double> norms(static_cast<std::size_t>(centered.rows()));
      for (Eigen::Index i = 0; i < centered.rows(); ++i) norms[static_cast<std::size_t>(i)] = centered.row(i).norm();
      std::nth_element(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(norms.size() / 2), norms.end());
      rep.quantile_norms.push_back(norms[norms.size() / 2]);
      rep.mean_norms.push_back((power * mu.transpose()).norm());
    }
    power = map.matrix() * power;
  }
  const std::vector<double>& primary = family.kind == SolutionKind::gaussian_closed_form ? rep.cov_norms
                                       : family.kind == SolutionKind::dirac_exact     ? rep.mean_norms
                                                                                       : rep.quantile_norms;
  rep.rate = fit_geometric_ratio(std::vector<double>(primary.begin() + 1, primary.end()));
  const bool vanished = primary.back() <= 1e-12 * (1.0 + primary.front());
  rep.decays = vanished || rep.rate < 1.0 - 1e-6;
  std::ostringstream why;
  why << (rep.decays ? "decays" : "does not decay") << ": fitted rate " << rep.rate << " over n <= "
      << n_max;
  rep.reason = why.str();
  return rep;
}

}  // namespace decomp
