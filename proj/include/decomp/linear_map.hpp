#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace decomp {

/// The drift map of the recursion: a real d×d matrix with cached spectral
/// data. Immutable after construction.
class LinearMap {
 public:
  /// Throws InputError on an empty, non-square or non-finite matrix.
  explicit LinearMap(Eigen::MatrixXd entries);

  static LinearMap identity(int dim);
  static LinearMap scalar(int dim, double a);
  static LinearMap diagonal(const Eigen::VectorXd& diag);

  int dim() const noexcept { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  const Eigen::VectorXcd& eigenvalues() const noexcept { return eigenvalues_; }
  double spectral_radius() const noexcept { return spectral_radius_; }
  bool invertible() const noexcept { return invertible_; }
  /// 2-norm condition number (infinite for singular maps).
  double condition_number() const noexcept { return condition_; }
  double operator_norm() const noexcept { return operator_norm_; }

  /// φ^n as a matrix; negative n requires an invertible map.
  Eigen::MatrixXd power(std::int64_t n) const;
  /// φ^{-1} v via LU; throws HypothesisError on singular maps.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// this ∘ inner.
  LinearMap compose(const LinearMap& inner) const;

 private:
  Eigen::MatrixXd entries_;
  Eigen::VectorXcd eigenvalues_;
  double spectral_radius_ = 0.0;
  double operator_norm_ = 0.0;
  double condition_ = 0.0;
  bool invertible_ = false;
};

/// φ^n x.
Eigen::VectorXd apply_power(const LinearMap& map, std::int64_t n,
                            const Eigen::VectorXd& x);
/// φ^n X (φ^n)^T, the covariance of the pushforward of a law with covariance X.
Eigen::MatrixXd apply_power(const LinearMap& map, std::int64_t n,
                            const Eigen::MatrixXd& x);

}  // namespace decomp
