#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "decomp/linear_map.hpp"

namespace decomp {

/// Invariant splitting R^d = C(φ) ⊕ U, where C(φ) is the contraction subspace
/// (vectors with φ^n v → 0) and U is the φ-invariant sum of the remaining
/// generalized eigenspaces.
struct ContractionSplit {
  Eigen::MatrixXd contraction_basis;  ///< d×c, orthonormal columns
  Eigen::MatrixXd complement_basis;   ///< d×(d−c), orthonormal columns
  Eigen::MatrixXd projector;          ///< onto C(φ) along U
  double contraction_rate = 0.0;      ///< spectral radius of φ on C(φ)
  /// K with ‖φ^n v‖ ≤ K (ρ_c + tol)^n ‖v‖ on C(φ), measured for n ≤ decay_horizon.
  double decay_constant = 1.0;
  int decay_horizon = 200;
  double tol = 1e-8;

  int dim() const noexcept { return static_cast<int>(projector.rows()); }
  int contraction_dim() const noexcept {
    return static_cast<int>(contraction_basis.cols());
  }
  /// (I − P) v, the U-component of v.
  Eigen::VectorXd complement_part(const Eigen::VectorXd& v) const {
    return v - projector * v;
  }
};

/// Ordered real Schur splitting. Eigenvalues with modulus below 1 − tol span
/// C(φ). Throws SpectralGapError when a modulus falls in [1 − tol, 1 + tol]
/// without being on the unit circle to working precision.
ContractionSplit contraction_split(const LinearMap& map, double tol = 1e-8);

enum class SeriesStatus { converged, diverged, undetermined };
const char* to_string(SeriesStatus s) noexcept;

struct SeriesOptions {
  int horizon = 1000;
  double tol = 1e-8;
  double cap = 1e12;
};

/// Partial sums of B_k = Σ φ^i A_{k−i} (φ^i)^T and b_k = Σ φ^i m_{k−i}.
/// `status` classifies the covariance series, `mean_status` the mean series.
struct SeriesResult {
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean;
  SeriesStatus status = SeriesStatus::undetermined;
  SeriesStatus mean_status = SeriesStatus::undetermined;
  int terms_used = 0;
  double tail_bound = 0.0;
  double mean_tail_bound = 0.0;
  double fitted_ratio = 0.0;
  /// Mean covariance-term norm over the last quarter of the horizon.
  double late_term_mean = 0.0;
  std::vector<double> term_norm_trace;
  std::vector<double> mean_term_norm_trace;
  std::string reason;
};

using CovarianceSequence = std::function<Eigen::MatrixXd(std::int64_t)>;
using MeanSequence = std::function<Eigen::VectorXd(std::int64_t)>;

SeriesResult covariance_series(const LinearMap& map, const CovarianceSequence& cov_seq,
                               const MeanSequence& mean_seq, std::int64_t k,
                               const SeriesOptions& opts = {});

/// Solves B = A + φ B φ^T directly as a d²×d² linear system. When ρ(φ) ≥ 1
/// the solve is restricted to C(φ), which requires A to be supported there.
Eigen::MatrixXd lyapunov_fixed_point(const LinearMap& map, const Eigen::MatrixXd& a);

/// Geometric ratio fitted by least squares on log(values) (zero entries
/// skipped). Returns 0 without positive values and infinity with only one.
double fit_geometric_ratio(const std::vector<double>& values);

}  // namespace decomp
