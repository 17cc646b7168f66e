#include "decomp/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "decomp/error.hpp"

namespace decomp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct SchurForm {
  Eigen::MatrixXd t;
  Eigen::MatrixXd z;
  Eigen::VectorXd modulus;  // per diagonal position
};

// Real Schur form in LAPACK canonical layout (standardized 2×2 blocks).
SchurForm real_schur(const Eigen::MatrixXd& m) {
  const lapack_int n = static_cast<lapack_int>(m.rows());
  SchurForm out;
  out.t = m;
  out.z.resize(n, n);
  Eigen::VectorXd wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, out.t.data(), n, &sdim,
                    wr.data(), wi.data(), out.z.data(), n);
  if (info != 0) {
    throw Error("contraction_split: real Schur decomposition failed (info=" +
                std::to_string(info) + ")");
  }
  out.modulus.resize(n);
  for (lapack_int i = 0; i < n; ++i) out.modulus(i) = std::hypot(wr(i), wi(i));
  return out;
}

// Moves the selected eigenvalues to the leading block; returns the leading
// columns of the updated Schur vectors.
Eigen::MatrixXd leading_invariant_basis(const SchurForm& base,
                                        const std::vector<lapack_logical>& select) {
  const lapack_int n = static_cast<lapack_int>(base.t.rows());
  Eigen::MatrixXd t = base.t;
  Eigen::MatrixXd z = base.z;
  Eigen::VectorXd wr(n), wi(n);
  lapack_int m = 0;
  double s = 0.0, sep = 0.0;
  const lapack_int ld = std::max<lapack_int>(1, n);
  const lapack_int lwork = std::max<lapack_int>(1, n * n);
  const lapack_int liwork = std::max<lapack_int>(1, n * n);
  std::vector<double> work(static_cast<std::size_t>(lwork));
  std::vector<lapack_int> iwork(static_cast<std::size_t>(liwork));
  lapack_int info = 0;
  const char job = 'N', compq = 'V';
  // LAPACKE_dtrsen crashes in some OpenBLAS builds; call the routine directly.
  LAPACK_dtrsen(&job, &compq, select.data(), &n, t.data(), &ld, z.data(), &ld, wr.data(), wi.data(),
          &m, &s, &sep, work.data(), &lwork, iwork.data(), &liwork, &info);
  if (info != 0) {
    throw Error("contraction_split: Schur reordering failed (info=" +
                std::to_string(info) + ")");
  }
  return z.leftCols(m);
}

double decay_constant(const Eigen::MatrixXd& restricted, double rate, int horizon) {
  if (restricted.rows() == 0) return 1.0;
  const double log_base = std::log(rate);
  double log_k = 0.0;  // n = 0 term: ‖I‖ = 1
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(restricted.rows(), restricted.cols());
  for (int n = 1; n <= horizon; ++n) {
    p = restricted * p;
    const double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(p).singularValues()(0);
    if (!(norm > 0.0)) break;  // nilpotent restriction: all later powers vanish
    log_k = std::max(log_k, std::log(norm) - n * log_base);
  }
  return std::exp(log_k);
}

}  // namespace

ContractionSplit contraction_split(const LinearMap& map, double tol) {
  if (!(tol > 0.0 && tol < 0.5)) {
    throw InputError("contraction_split: tol must lie in (0, 0.5)");
  }
  const int d = map.dim();
  const SchurForm schur = real_schur(map.matrix());

  // Moduli within a few ulps of 1 are unimodular to working precision and are
  // classified as non-contracting; anything else in the band is ambiguous.
  const double unit_slack = 1e3 * kEps * std::max(1.0, map.operator_norm());
  std::vector<lapack_logical> stable(d), unstable(d);
  double rate = 0.0;
  for (int i = 0; i < d; ++i) {
    const double mod = schur.modulus(i);
    const double gap = std::abs(mod - 1.0);
    if (gap <= tol && gap > unit_slack) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "spectral gap violation: eigenvalue modulus " << mod
          << " lies within tol=" << tol << " of the unit circle";
      throw SpectralGapError(msg.str(), mod);
    }
    const bool contracting = mod < 1.0 - tol;
    stable[i] = contracting ? 1 : 0;
    unstable[i] = contracting ? 0 : 1;
    if (contracting) rate = std::max(rate, mod);
  }

  ContractionSplit split;
  split.tol = tol;
  split.contraction_rate = rate;
  split.contraction_basis = leading_invariant_basis(schur, stable);
  split.complement_basis = leading_invariant_basis(schur, unstable);
  const int c = split.contraction_dim();
  if (c + split.complement_basis.cols() != d) {
    throw Error("contraction_split: invariant subspace dimensions do not add up");
  }

  if (c == 0) {
    split.projector = Eigen::MatrixXd::Zero(d, d);
  } else if (c == d) {
    split.projector = Eigen::MatrixXd::Identity(d, d);
  } else {
    Eigen::MatrixXd w(d, d);
    w << split.contraction_basis, split.complement_basis;
    const Eigen::MatrixXd w_inv = w.partialPivLu().inverse();
    split.projector = split.contraction_basis * w_inv.topRows(c);
  }

  const Eigen::MatrixXd restricted =
      split.contraction_basis.transpose() * map.matrix() * split.contraction_basis;
  split.decay_constant = decay_constant(restricted, rate + tol, split.decay_horizon);
  return split;
}

const char* to_string(SeriesStatus s) noexcept {
  switch (s) {
    case SeriesStatus::converged: return "converged";
    case SeriesStatus::diverged: return "diverged";
    case SeriesStatus::undetermined: return "undetermined";
  }
  return "undetermined";
}

double fit_geometric_ratio(const std::vector<double>& values) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0 && std::isfinite(values[i])) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(values[i]));
    }
  }
  if (xs.empty()) return 0.0;
  if (xs.size() < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return std::exp(sxy / sxx);
}

namespace {

constexpr std::size_t kFitWindow = 20;

struct Classification {
  SeriesStatus status;
  double tail_bound;
  double ratio;
  double late_mean;
  std::string reason;
};

Classification classify(const std::vector<double>& trace, double tol, bool overflowed) {
  Classification out{SeriesStatus::undetermined,
                     std::numeric_limits<double>::infinity(), 0.0, 0.0, {}};
  if (trace.empty()) {
    out.status = overflowed ? SeriesStatus::diverged : SeriesStatus::undetermined;
    out.reason = overflowed ? "cap exceeded (overflow at first term)" : "no terms";
    return out;
  }
  const std::size_t n = trace.size();
  const std::size_t w = std::min(kFitWindow, n);
  const std::vector<double> last(trace.end() - static_cast<std::ptrdiff_t>(w), trace.end());
  out.ratio = fit_geometric_ratio(last);
  double last_term = trace.back();
  if (last_term == 0.0) {
    // Trailing zeros: scale from the last positive term.
    for (std::size_t i = last.size(); i-- > 0;) {
      if (last[i] > 0.0) {
        last_term = last[i] * std::pow(out.ratio, static_cast<double>(last.size() - 1 - i));
        break;
      }
    }
  }
  if (last_term == 0.0) {
    out.tail_bound = 0.0;
  } else if (out.ratio < 1.0) {
    out.tail_bound = last_term * out.ratio / (1.0 - out.ratio);
  }

  const std::size_t q = std::max<std::size_t>(1, n / 4);
  out.late_mean =
      std::accumulate(trace.end() - static_cast<std::ptrdiff_t>(q), trace.end(), 0.0) /
      static_cast<double>(q);

  std::ostringstream msg;
  msg.precision(6);
  if (out.tail_bound <= tol) {
    out.status = SeriesStatus::converged;
    msg << "converged: fitted ratio " << out.ratio << ", tail bound " << out.tail_bound;
  } else if (overflowed) {
    out.status = SeriesStatus::diverged;
    msg << "cap exceeded (term overflow after " << n << " terms)";
  } else if (out.late_mean > tol) {
    out.status = SeriesStatus::diverged;
    msg << "series term norm non-decaying: mean over last " << q << " terms "
        << out.late_mean;
  } else {
    out.status = SeriesStatus::undetermined;
    msg << "undetermined: fitted ratio " << out.ratio << ", tail bound "
        << out.tail_bound << ", late term mean " << out.late_mean;
  }
  out.reason = msg.str();
  return out;
}

}  // namespace

SeriesResult covariance_series(const LinearMap& map, const CovarianceSequence& cov_seq,
                               const MeanSequence& mean_seq, std::int64_t k,
                               const SeriesOptions& opts) {
  if (opts.horizon < 1) throw InputError("covariance_series: horizon must be >= 1");
  if (!(opts.cap > 0.0)) throw InputError("covariance_series: cap must be > 0");
  if (!(opts.tol > 0.0)) throw InputError("covariance_series: tol must be > 0");
  const int d = map.dim();

  SeriesResult out;
  out.covariance = Eigen::MatrixXd::Zero(d, d);
  out.mean = Eigen::VectorXd::Zero(d);
  out.term_norm_trace.reserve(static_cast<std::size_t>(opts.horizon));

  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
  bool overflow = false, mean_overflow = false;
  bool cap_exceeded = false, mean_cap_exceeded = false;

  for (int i = 0; i < opts.horizon; ++i) {
    const Eigen::MatrixXd a = cov_seq(k - i);
    if (a.rows() != d || a.cols() != d) {
      throw InputError("covariance_series: covariance at k=" + std::to_string(k - i) +
                       " has wrong shape");
    }
    const Eigen::MatrixXd term = power * a * power.transpose();
    if (!term.allFinite()) {
      overflow = true;
      break;
    }
    out.covariance += term;
    out.term_norm_trace.push_back(term.norm());
    out.terms_used = i + 1;

    if (!mean_overflow && !mean_cap_exceeded) {
      const Eigen::VectorXd m = mean_seq(k - i);
      if (m.size() != d) {
        throw InputError("covariance_series: mean at k=" + std::to_string(k - i) +
                         " has wrong size");
      }
      const Eigen::VectorXd mt = power * m;
      if (!mt.allFinite()) {
        mean_overflow = true;
      } else {
        out.mean += mt;
        out.mean_term_norm_trace.push_back(mt.norm());
        if (out.mean.norm() > opts.cap) mean_cap_exceeded = true;
      }
    }

    if (out.covariance.norm() > opts.cap) {
      cap_exceeded = true;
      break;
    }
    power = map.matrix() * power;
  }

  if (cap_exceeded) {
    out.status = SeriesStatus::diverged;
    out.tail_bound = std::numeric_limits<double>::infinity();
    out.reason = "cap exceeded: partial-sum norm above " + std::to_string(opts.cap);
    const auto c = classify(out.term_norm_trace, opts.tol, false);
    out.fitted_ratio = c.ratio;
    out.late_term_mean = c.late_mean;
  } else {
    const auto c = classify(out.term_norm_trace, opts.tol, overflow);
    out.status = c.status;
    out.tail_bound = c.tail_bound;
    out.fitted_ratio = c.ratio;
    out.late_term_mean = c.late_mean;
    out.reason = c.reason;
  }

  if (mean_cap_exceeded) {
    out.mean_status = SeriesStatus::diverged;
    out.mean_tail_bound = std::numeric_limits<double>::infinity();
  } else {
    const auto c = classify(out.mean_term_norm_trace, opts.tol, mean_overflow);
    out.mean_status = c.status;
    out.mean_tail_bound = c.tail_bound;
  }
  return out;
}

Eigen::MatrixXd lyapunov_fixed_point(const LinearMap& map, const Eigen::MatrixXd& a) {
  const int d = map.dim();
  if (a.rows() != d || a.cols() != d) {
    throw InputError("lyapunov_fixed_point: dimension mismatch");
  }
  if (!a.allFinite()) throw InputError("lyapunov_fixed_point: non-finite input");
  const double scale = 1.0 + a.norm();
  if ((a - a.transpose()).norm() > 1e-10 * scale) {
    throw InputError("lyapunov_fixed_point: A must be symmetric");
  }
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff() <
      -1e-10 * scale) {
    throw InputError("lyapunov_fixed_point: A must be positive semidefinite");
  }
  if (a.isZero(0.0)) return Eigen::MatrixXd::Zero(d, d);

  Eigen::MatrixXd phi = map.matrix();
  Eigen::MatrixXd rhs = a;
  Eigen::MatrixXd basis;  // empty: solve in full coordinates
  if (map.spectral_radius() >= 1.0) {
    ContractionSplit split;
    try {
      split = contraction_split(map);
    } catch (const SpectralGapError& e) {
      throw PreconditionError(std::string("no stationary fixed point: ") + e.what());
    }
    const Eigen::MatrixXd comp = Eigen::MatrixXd::Identity(d, d) - split.projector;
    if ((comp * a * comp.transpose()).norm() > 1e-8 * scale) {
      throw PreconditionError(
          "no stationary fixed point: spectral radius >= 1 and A is not supported "
          "on the contraction subspace");
    }
    basis = split.contraction_basis;
    phi = basis.transpose() * map.matrix() * basis;
    rhs = basis.transpose() * a * basis;
  }

  // (I − φ⊗φ) vec(B) = vec(A), column-major vec.
  const int n = static_cast<int>(phi.rows());
  if (n == 0) return Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      system.block(j * n, i * n, n, n) -= phi(j, i) * phi;
    }
  }
  const Eigen::VectorXd vec_a = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n * n);
  const Eigen::VectorXd vec_b = system.fullPivLu().solve(vec_a);
  Eigen::MatrixXd b = Eigen::Map<const Eigen::MatrixXd>(vec_b.data(), n, n);
  b = 0.5 * (b + b.transpose());
  if (basis.size() > 0) b = basis * b * basis.transpose();
  return b;
}

}  // namespace decomp
