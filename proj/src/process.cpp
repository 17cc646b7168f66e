#include "decomp/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "decomp/error.hpp"
#include "decomp/seed.hpp"
#include "decomp/spectral.hpp"

namespace decomp {

// --- process ---------------------------------------------------------------

NoiseProcess::NoiseProcess(int dim, std::map<std::int64_t, NoiseModel> window, TailRule tail)
    : dim_(dim), window_(std::move(window)), tail_(std::move(tail)) {
  if (dim_ < 1) throw InputError("NoiseProcess: dimension must be >= 1");
  for (const auto& [k, m] : window_) {
    if (m.dim() != dim_) {
      throw InputError("NoiseProcess: window entry at k=" + std::to_string(k) +
                       " has dimension " + std::to_string(m.dim()));
    }
  }
  if (const auto* s = std::get_if<StationaryTail>(&tail_)) {
    if (s->model.dim() != dim_) throw InputError("stationary tail: dimension mismatch");
  } else if (const auto* pp = std::get_if<PushforwardPowerTail>(&tail_)) {
    if (pp->base.dim() != dim_ || pp->map.dim() != dim_) {
      throw InputError("pushforward_power tail: dimension mismatch");
    }
    if (!pp->map.invertible()) {
      throw InputError("pushforward_power tail: map must be invertible");
    }
  } else if (const auto* dm = std::get_if<DecayMixtureTail>(&tail_)) {
    if (dim_ != 1) throw InputError("decay_mixture tail: only defined for d = 1");
    if (!(dm->a > 0.0 && dm->a < 1.0)) {
      throw InputError("decay_mixture tail: a must lie in (0, 1)");
    }
  }
}

NoiseModel tail_model_at(const TailRule& tail, int dim, std::int64_t k) {
  if (const auto* s = std::get_if<StationaryTail>(&tail)) return s->model;
  if (const auto* pp = std::get_if<PushforwardPowerTail>(&tail)) {
    if (k == 0) return pp->base;
    return NoiseModel::pushforward(pp->base, LinearMap(pp->map.power(k)));
  }
  if (const auto* dm = std::get_if<DecayMixtureTail>(&tail)) {
    if (k == 0) return NoiseModel::dirac(Eigen::VectorXd::Zero(1));
    const double n = static_cast<double>(k < 0 ? -k : k);
    const double w = std::pow(dm->a, n);
    const double s = k < 0 ? -1.0 : 1.0;
    const auto box = [&](double x, double y) {
      return NoiseModel::uniform_box(Eigen::VectorXd::Constant(1, std::min(s * x, s * y)),
                                     Eigen::VectorXd::Constant(1, std::max(s * x, s * y)));
    };
    return NoiseModel::mixture({1.0 - w, w}, {box(0.0, w), box(n, n + 1.0)});
  }
  return NoiseModel::dirac(Eigen::VectorXd::Zero(dim));
}

NoiseModel NoiseProcess::model_at(std::int64_t k) const {
  if (auto it = window_.find(k); it != window_.end()) return it->second;
  return tail_model_at(tail_, dim_, k);
}

namespace {

bool is_point_mass(const NoiseModel& m) {
  if (m.is_dirac()) return true;
  if (m.is_gaussian()) return std::get<Gaussian>(m.node().value).cov.isZero(0.0);
  return false;
}

bool all_models(const NoiseProcess& process, bool (*pred)(const NoiseModel&)) {
  for (const auto& [k, m] : process.window())
    if (!pred(m)) return false;
  const auto& tail = process.tail();
  if (const auto* s = std::get_if<StationaryTail>(&tail)) return pred(s->model);
  if (const auto* pp = std::get_if<PushforwardPowerTail>(&tail)) return pred(pp->base);
  if (std::holds_alternative<DecayMixtureTail>(tail)) return false;
  return true;
}

}  // namespace

bool is_stationary(const NoiseProcess& process) {
  const auto* s = std::get_if<StationaryTail>(&process.tail());
  if (!s) return false;
  for (const auto& [k, m] : process.window())
    if (!same_structure(m, s->model)) return false;
  return true;
}

bool is_all_gaussian(const NoiseProcess& process) {
  return all_models(process, [](const NoiseModel& m) { return m.is_gaussian_family(); });
}

bool is_all_dirac(const NoiseProcess& process) {
  return all_models(process, [](const NoiseModel& m) { return is_point_mass(m); });
}

const char* to_string(LpVerdict v) noexcept {
  switch (v) {
    case LpVerdict::lp_paths_yes: return "lp_paths_yes";
    case LpVerdict::lp_paths_no: return "lp_paths_no";
    case LpVerdict::undetermined: return "undetermined";
  }
  return "undetermined";
}

// --- three series ----------------------------------------------------------

namespace {

struct TermStats {
  double p_exceed = 0.0;  // P(Z > 1)
  double m1 = 0.0;        // E[Y], Y = Z 1{Z ≤ 1}
  double m2 = 0.0;        // E[Y²]
  bool estimated = false;
  double var() const { return std::max(0.0, m2 - m1 * m1); }
};

constexpr std::int64_t kTermSamples = 20000;

// ∫_a^b |t|^q dt
double abs_power_integral(double a, double b, double q) {
  const auto g = [q](double t) {
    return std::copysign(std::pow(std::abs(t), q + 1.0) / (q + 1.0), t);
  };
  return g(b) - g(a);
}

TermStats point_stats(double r, double p) {
  const double z = std::pow(r, p);
  if (z > 1.0) return {1.0, 0.0, 0.0, false};
  return {0.0, z, z * z, false};
}

TermStats term_stats(const NoiseModel& model, double p, std::uint64_t seed) {
  const auto& v = model.node().value;
  if (const auto* x = std::get_if<Dirac>(&v)) return point_stats(x->point.norm(), p);
  if (const auto* g = std::get_if<Gaussian>(&v)) {
    if (g->cov.isZero(0.0)) return point_stats(g->mean.norm(), p);
    if (model.dim() == 1) {
      const double m = g->mean(0), s = std::sqrt(g->cov(0, 0));
      const double z_hi = (1.0 - m) / s, z_lo = (-1.0 - m) / s;
      TermStats t;
      t.p_exceed = 0.5 * std::erfc(z_hi / std::sqrt(2.0)) + 0.5 * std::erfc(-z_lo / std::sqrt(2.0));
      const auto dens = [&](double u) {
        const double z = (u - m) / s;
        return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
      };
      using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
      const auto moment = [&](double q) {
        const auto f = [&](double u) { return std::pow(std::abs(u), q) * dens(u); };
        return Quad::integrate(f, -1.0, 0.0, 15, 1e-13) + Quad::integrate(f, 0.0, 1.0, 15, 1e-13);
      };
      t.m1 = moment(p);
      t.m2 = moment(2.0 * p);
      return t;
    }
  }
  if (const auto* box = std::get_if<UniformBox>(&v); box && model.dim() == 1) {
    const double lo = box->lo(0), hi = box->hi(0);
    if (lo == hi) return point_stats(std::abs(lo), p);
    const double w = hi - lo;
    const double a = std::max(lo, -1.0), b = std::min(hi, 1.0);
    const double inside = std::max(0.0, b - a);
    TermStats t;
    t.p_exceed = (w - inside) / w;
    if (inside > 0.0) {
      t.m1 = abs_power_integral(a, b, p) / w;
      t.m2 = abs_power_integral(a, b, 2.0 * p) / w;
    }
    return t;
  }
  if (const auto* mix = std::get_if<Mixture>(&v)) {
    TermStats t;
    for (std::size_t i = 0; i < mix->components.size(); ++i) {
      const double w = mix->weights[i];
      if (w == 0.0) continue;
      const TermStats c = term_stats(mix->components[i], p, derive_seed(seed, 1, static_cast<std::int64_t>(i)));
      t.p_exceed += w * c.p_exceed;
      t.m1 += w * c.m1;
      t.m2 += w * c.m2;
      t.estimated = t.estimated || c.estimated;
    }
    return t;
  }
  const Eigen::MatrixXd xs = sample(model, kTermSamples, seed);
  TermStats t;
  t.estimated = true;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const double z = std::pow(xs.row(i).norm(), p);
    if (z > 1.0) {
      t.p_exceed += 1.0;
    } else {
      t.m1 += z;
      t.m2 += z * z;
    }
  }
  const double n = static_cast<double>(xs.rows());
  t.p_exceed /= n;
  t.m1 /= n;
  t.m2 /= n;
  return t;
}

}  // namespace

ThreeSeriesReport lp_path_check(const NoiseProcess& process, double p, int horizon) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InputError("lp_path_check: p must lie in [1, inf)");
  if (horizon < 1) throw InputError("lp_path_check: horizon must be >= 1");

  ThreeSeriesReport r;
  r.p = p;
  r.horizon = horizon;
  r.n_lo = -horizon;
  r.n_hi = horizon;
  if (!process.window().empty()) {
    r.n_lo = std::min(r.n_lo, process.window().begin()->first);
    r.n_hi = std::max(r.n_hi, process.window().rbegin()->first);
  }

  const auto& tail = process.tail();
  const auto* stationary = std::get_if<StationaryTail>(&tail);
  TermStats stationary_stats;
  if (stationary) stationary_stats = term_stats(stationary->model, p, derive_seed(0, 2));

  for (std::int64_t n = r.n_lo; n <= r.n_hi; ++n) {
    TermStats t;
    const auto it = process.window().find(n);
    if (it == process.window().end() && stationary) {
      t = stationary_stats;
    } else {
      const NoiseModel m = process.model_at(n);
      t = term_stats(m, p, derive_seed(0, 3, n));
    }
    r.s1 += t.p_exceed;
    r.s2 += t.m1;
    r.s3 += t.var();
    r.estimated_terms = r.estimated_terms || t.estimated;
  }

  const double inf = std::numeric_limits<double>::infinity();
  bool no = false;
  std::ostringstream why;
  if (std::holds_alternative<ZeroTail>(tail)) {
    r.tails_certified = true;
    why << "finitely many nonzero terms";
  } else if (stationary) {
    if (stationary_stats.p_exceed > 0.0 || stationary_stats.m1 > 0.0) {
      no = true;
      r.s1_tail = r.s2_tail = r.s3_tail = inf;
      why << "identical nonzero terms beyond the window: P(Z>1) = " << stationary_stats.p_exceed
          << ", E[Z;Z<=1] = " << stationary_stats.m1;
    } else {
      r.tails_certified = true;
      why << "stationary tail is the point mass at 0";
    }
  } else if (const auto* pp = std::get_if<PushforwardPowerTail>(&tail)) {
    const auto bound = support_bound(pp->base);
    if (bound && *bound == 0.0) {
      r.tails_certified = true;
      why << "tail base is the point mass at 0";
    } else {
      // For v ≠ 0 the orbit ψ^n v stays away from 0 in at least one direction,
      // so Σ_n E min(Z_n, 1) diverges.
      no = true;
      r.s1_tail = r.s2_tail = r.s3_tail = inf;
      why << "tail terms psi^n(base) do not vanish in both directions";
    }
  } else if (const auto* dm = std::get_if<DecayMixtureTail>(&tail)) {
    const double a = dm->a;
    // Remainders start past the explicit range, which the window may extend.
    const double lo_start = static_cast<double>(-r.n_lo) + 1.0;
    const double hi_start = static_cast<double>(r.n_hi) + 1.0;
    const auto two_sided = [&](double ratio, double scale) {
      return scale * (std::pow(ratio, lo_start) + std::pow(ratio, hi_start)) / (1.0 - ratio);
    };
    // P(Z_n > 1) = a^|n| exactly; E[Y_n] ≤ a^{|n|p}/(p+1); Var ≤ a^{2|n|p}/(2p+1).
    r.s1_tail = two_sided(a, 1.0);
    r.s2_tail = two_sided(std::pow(a, p), 1.0 / (p + 1.0));
    r.s3_tail = two_sided(std::pow(a, 2.0 * p), 1.0 / (2.0 * p + 1.0));
    r.tails_certified = true;
    why << "geometric tail bounds with ratio a = " << a;
  }

  if (no) {
    r.verdict = LpVerdict::lp_paths_no;
  } else if (r.tails_certified && std::isfinite(r.s1) && std::isfinite(r.s2) &&
             std::isfinite(r.s3)) {
    r.verdict = LpVerdict::lp_paths_yes;
  } else {
    r.verdict = LpVerdict::undetermined;
  }
  r.reason = why.str();
  return r;
}

// --- M_p -------------------------------------------------------------------

MpReport mp_log_moment(const NoiseProcess& process, double p, int n_levels,
                       std::int64_t samples, std::uint64_t seed) {
  if (n_levels < 2) throw InputError("mp_log_moment: n_levels must be >= 2");
  if (samples < 2) throw InputError("mp_log_moment: samples must be >= 2");
  if (n_levels > 20) throw InputError("mp_log_moment: n_levels must be <= 20");

  MpReport out;
  out.lp_check = lp_path_check(process, p, 200);
  if (out.lp_check.verdict == LpVerdict::lp_paths_no) {
    throw PreconditionError("mp_log_moment: process fails the l_p path check (" +
                            out.lp_check.reason + ")");
  }
  for (int j = 0; j < n_levels; ++j) out.levels.push_back(5 << j);
  const std::int64_t top = out.levels.back();

  std::vector<NoiseModel> models;
  bool all_points = true;
  for (std::int64_t k = -top; k <= top; ++k) {
    models.push_back(process.model_at(k));
    all_points = all_points && is_point_mass(models.back());
  }
  const auto model_of = [&](std::int64_t k) -> const NoiseModel& {
    return models[static_cast<std::size_t>(k + top)];
  };

  // Subadditive cross-check: log((Σ‖v_k‖^p)^{1/p} + 1) ≤ Σ_k log(‖v_k‖ + 1).
  double sub_var = 0.0;
  for (std::int64_t k = -top; k <= top; ++k) {
    const auto lm = log_moment(model_of(k), samples, derive_seed(seed, 0x5a, k));
    out.subadditive_bound += lm.value;
    sub_var += lm.std_error * lm.std_error;
  }
  out.subadditive_std_error = std::sqrt(sub_var);

  const auto finish = [&](double value, double se, MomentMethod method) {
    out.estimate.value = value;
    out.estimate.std_error = se;
    out.estimate.method = method;
    out.estimate.n_used = method == MomentMethod::monte_carlo ? samples : 0;
    out.estimate.seed = method == MomentMethod::monte_carlo ? seed : 0;
    if (value > kLogMomentBlowup) {
      out.estimate.infinite = true;
      out.estimate.note = "undetermined, evidence of divergence";
    }
    const std::size_t n = out.level_values.size();
    for (std::size_t j = 1; j < n; ++j)
      out.increments.push_back(out.level_values[j] - out.level_values[j - 1]);
    const double se1 = out.level_std_errors[n - 1], se2 = out.level_std_errors[n - 2];
    out.stabilized = std::abs(out.increments.back()) <= 3.0 * std::sqrt(se1 * se1 + se2 * se2);
    if (out.estimate.note.empty()) {
      out.estimate.note = out.stabilized ? "last increment within 3 combined SE"
                                         : "levels not stabilized";
    }
    return out;
  };

  if (all_points) {
    std::vector<double> norms(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto& v = models[i].node().value;
      norms[i] = std::holds_alternative<Dirac>(v) ? std::get<Dirac>(v).point.norm()
                                                  : std::get<Gaussian>(v).mean.norm();
    }
    for (int level : out.levels) {
      double sum = 0.0, single = 0.0;
      int nonzero = 0;
      for (std::int64_t k = -level; k <= level; ++k) {
        const double r = norms[static_cast<std::size_t>(k + top)];
        if (r == 0.0) continue;
        ++nonzero;
        single = r;
        sum += std::pow(r, p);
      }
      const double radius = nonzero == 1 ? single : std::pow(sum, 1.0 / p);
      out.level_values.push_back(std::log1p(radius));
      out.level_std_errors.push_back(0.0);
    }
    return finish(out.level_values.back(), 0.0, MomentMethod::closed_form);
  }

  // Common random numbers across levels: the draws for index k depend only on
  // (seed, k), so a level extends the previous one.
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(samples);
  std::int64_t done = -1;
  for (int level : out.levels) {
    for (std::int64_t k = -level; k <= level; ++k) {
      if (k >= -done && k <= done) continue;
      const NoiseModel& m = model_of(k);
      if (const auto* x = std::get_if<Dirac>(&m.node().value); x && x->point.isZero(0.0)) {
        continue;
      }
      const Eigen::MatrixXd xs = sample(m, samples, derive_seed(seed, 0x4d70, k));
      acc += xs.rowwise().norm().array().pow(p);
    }
    done = level;
    const Eigen::ArrayXd vals = (acc.pow(1.0 / p) + 1.0).log();
    const double mean = vals.mean();
    const double var = (vals - mean).square().sum() / static_cast<double>(samples - 1);
    const double se = std::max(std::sqrt(var / static_cast<double>(samples)),
                               std::numeric_limits<double>::epsilon() * (1.0 + mean));
    out.level_values.push_back(mean);
    out.level_std_errors.push_back(se);
  }
  return finish(out.level_values.back(), out.level_std_errors.back(),
                MomentMethod::monte_carlo);
}

// --- shift recursion -------------------------------------------------------

const Eigen::VectorXd& ShiftSequence::at(std::int64_t k) const {
  if (k < k_min || k > k_max) {
    throw InputError("ShiftSequence: index " + std::to_string(k) + " outside window");
  }
  return values[static_cast<std::size_t>(k - k_min)];
}

double ShiftSequence::max_relative_residual(const VectorSequence& x, const LinearMap& map) const {
  double worst = 0.0;
  for (std::int64_t k = k_min + 1; k <= k_max; ++k) {
    const Eigen::VectorXd& y = at(k);
    const double r = (y - x(k) - map.matrix() * at(k - 1)).norm() / (1.0 + y.norm());
    worst = std::max(worst, r);
  }
  return worst;
}

ShiftSequence solve_shift_recursion(const VectorSequence& x, const LinearMap& map,
                                    const Eigen::VectorXd& anchor, std::int64_t k_min,
                                    std::int64_t k_max, std::int64_t anchor_index) {
  if (!map.invertible()) {
    throw HypothesisError(
        "solve_shift_recursion: the backward recursion y_{k-1} = phi^{-1}(y_k - x_k) "
        "needs an invertible map");
  }
  if (k_min > k_max) throw InputError("solve_shift_recursion: k_min > k_max");
  if (anchor.size() != map.dim()) throw InputError("solve_shift_recursion: anchor dimension");

  const std::int64_t lo = std::min(k_min, anchor_index);
  const std::int64_t hi = std::max(k_max, anchor_index);
  std::vector<Eigen::VectorXd> all(static_cast<std::size_t>(hi - lo + 1));
  const auto slot = [&](std::int64_t k) -> Eigen::VectorXd& {
    return all[static_cast<std::size_t>(k - lo)];
  };
  const auto x_at = [&](std::int64_t k) {
    Eigen::VectorXd v = x(k);
    if (v.size() != map.dim()) throw InputError("solve_shift_recursion: x has wrong size");
    return v;
  };
  const auto lu = map.matrix().partialPivLu();
  slot(anchor_index) = anchor;
  for (std::int64_t k = anchor_index + 1; k <= hi; ++k)
    slot(k) = x_at(k) + map.matrix() * slot(k - 1);
  for (std::int64_t k = anchor_index - 1; k >= lo; --k)
    slot(k) = lu.solve(slot(k + 1) - x_at(k + 1));

  ShiftSequence out;
  out.k_min = k_min;
  out.k_max = k_max;
  out.anchor_index = anchor_index;
  out.anchor = anchor;
  out.values.assign(all.begin() + (k_min - lo), all.begin() + (k_max - lo) + 1);
  return out;
}

// --- l_p solvability of y = x + τ(y) ---------------------------------------

const char* to_string(ShiftVerdict v) noexcept {
  switch (v) {
    case ShiftVerdict::solvable: return "solvable";
    case ShiftVerdict::divergent: return "divergent";
    case ShiftVerdict::undetermined: return "undetermined";
  }
  return "undetermined";
}

namespace {

constexpr double kShiftCap = 1e12;

// Fitted growth of the last (up to) 20 entries.
double trailing_ratio(const std::vector<double>& norms) {
  const std::size_t w = std::min<std::size_t>(20, norms.size());
  return fit_geometric_ratio(std::vector<double>(norms.end() - static_cast<std::ptrdiff_t>(w), norms.end()));
}

double tail_estimate(const std::vector<double>& norms, double ratio) {
  if (norms.empty() || norms.back() == 0.0) return 0.0;
  if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
  return norms.back() * ratio / (1.0 - ratio);
}

// Vanishing, or a fitted ratio safely below 1: the l_p remainder is finite.
bool geometric_tail(const std::vector<double>& norms, double ratio) {
  return norms.empty() || norms.back() == 0.0 || ratio <= 1.0 - 1e-6;
}

// Shared driver: x(k) is the input sequence, y_start the value of the causal
// solution at k = start (known in closed form by the caller).
ShiftSolvability decide(const VectorSequence& x, const LinearMap& map, double p, int horizon,
                        std::int64_t start, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& y_start_from_y0) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InputError("lp_shift_solvable: p must lie in [1, inf)");
  if (horizon < 10) throw InputError("lp_shift_solvable: horizon must be >= 10");
  const int d = map.dim();
  ShiftSolvability out;
  out.y0 = Eigen::VectorXd::Zero(d);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
  bool overflow = false, capped = false;
  for (int i = 0; i <= horizon; ++i) {
    const Eigen::VectorXd term = power * x(-i);
    if (!term.allFinite()) {
      overflow = true;
      break;
    }
    sum += term;
    out.partial_sums.push_back(sum);
    out.increment_norms.push_back(term.norm());
    if (!sum.allFinite() || sum.norm() > kShiftCap) {
      capped = true;
      break;
    }
    power = map.matrix() * power;
  }

  const auto& inc = out.increment_norms;
  const double ratio = trailing_ratio(inc);
  std::ostringstream why;
  if (overflow || capped) {
    if (ratio >= 1.0) {
      out.verdict = ShiftVerdict::divergent;
      why << "partial sums of phi^i x_{-i} exceed " << kShiftCap
          << " with increasing increments (fitted ratio " << ratio << ")";
    } else {
      why << "partial sums exceed the cap but increments decay";
    }
    out.reason = why.str();
    return out;
  }
  const double tail = tail_estimate(inc, ratio);
  if (tail > 1e-10 * (1.0 + sum.norm())) {
    const std::size_t q = std::max<std::size_t>(1, inc.size() / 4);
    const double late = std::accumulate(inc.end() - static_cast<std::ptrdiff_t>(q), inc.end(), 0.0) /
                        static_cast<double>(q);
    if (ratio >= 1.0 && late > 1e-10) {
      out.verdict = ShiftVerdict::divergent;
      why << "increments of the forced y_0 series do not decay (fitted ratio " << ratio << ")";
    } else {
      why << "partial sums not resolved at horizon " << horizon << " (tail bound " << tail << ")";
    }
    out.reason = why.str();
    return out;
  }
  out.y0 = sum;

  // Induced causal solution on [−horizon, horizon].
  std::vector<double> left, right;
  Eigen::VectorXd y = y_start_from_y0(sum);
  double acc = 0.0;
  std::int64_t k = start;
  const auto record = [&](std::int64_t idx, const Eigen::VectorXd& v) {
    if (idx < -horizon || idx > horizon) return;
    const double n = v.norm();
    acc += std::pow(n, p);
    if (idx < 0) left.push_back(n);
    if (idx > 0) right.push_back(n);
  };
  record(k, y);
  bool blew_up = false;
  while (k < horizon) {
    ++k;
    y = x(k) + map.matrix() * y;
    if (!y.allFinite()) {
      blew_up = true;
      break;
    }
    record(k, y);
  }
  std::reverse(left.begin(), left.end());  // outward order
  const double r_right = trailing_ratio(right);
  const double r_left = trailing_ratio(left);
  out.lp_norm = std::pow(acc, 1.0 / p);
  if (blew_up || (r_right > 1.0 + 1e-6 && !right.empty() && right.back() > 1.0)) {
    out.verdict = ShiftVerdict::divergent;
    why << "induced sequence grows for k > 0 (fitted ratio " << r_right << ")";
  } else if (geometric_tail(right, r_right) && geometric_tail(left, r_left)) {
    out.verdict = ShiftVerdict::solvable;
    why << "partial sums converge (ratio " << ratio << "); induced sequence has l_p norm "
        << out.lp_norm << " with geometric tails";
  } else {
    why << "induced sequence tails not certified (ratios " << r_left << ", " << r_right << ")";
  }
  out.reason = why.str();
  return out;
}

}  // namespace

ShiftSolvability lp_shift_solvable(double b, const Eigen::VectorXd& u, const LinearMap& map,
                                   double p, int horizon) {
  if (!(b > 1.0) || !std::isfinite(b)) throw InputError("lp_shift_solvable: b must be > 1");
  if (u.size() != map.dim()) throw InputError("lp_shift_solvable: dimension mismatch");
  const auto x = [&](std::int64_t k) -> Eigen::VectorXd {
    return std::pow(b, -static_cast<double>(k < 0 ? -k : k)) * u;
  };
  // For k ≤ 0 the causal solution is b^k y_0.
  return decide(x, map, p, horizon, -horizon, [&](const Eigen::VectorXd& y0) -> Eigen::VectorXd {
    return std::pow(b, -static_cast<double>(horizon)) * y0;
  });
}

ShiftSolvability lp_shift_solvable(const std::map<std::int64_t, Eigen::VectorXd>& window,
                                   const LinearMap& map, double p, int horizon) {
  for (const auto& [k, v] : window) {
    if (v.size() != map.dim()) throw InputError("lp_shift_solvable: dimension mismatch");
    if (!v.allFinite()) throw InputError("lp_shift_solvable: non-finite entry");
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(map.dim());
  const auto x = [&](std::int64_t k) -> Eigen::VectorXd {
    const auto it = window.find(k);
    return it == window.end() ? zero : it->second;
  };
  // Start below the window, where the causal solution vanishes.
  std::int64_t start = -horizon - 1;
  if (!window.empty()) start = std::min(start, window.begin()->first - 1);
  return decide(x, map, p, horizon, start,
                [&](const Eigen::VectorXd&) -> Eigen::VectorXd { return zero; });
}

Eigen::MatrixXd weighted_shift_matrix(const LinearMap& map, int length) {
  if (length < 1) throw InputError("weighted_shift_matrix: length must be >= 1");
  const int d = map.dim();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(length * d, length * d);
  for (int i = 1; i < length; ++i) t.block(i * d, (i - 1) * d, d, d) = map.matrix();
  return t;
}

}  // namespace decomp
