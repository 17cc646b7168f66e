#include "decomp/linear_map.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "decomp/error.hpp"

namespace decomp {

namespace {
// Singular values below this fraction of the largest one count as zero.
constexpr double kSingularCutoff = 1e-12;
}  // namespace

LinearMap::LinearMap(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw InputError("LinearMap: matrix must be square with dim >= 1, got " +
                     std::to_string(entries_.rows()) + "x" +
                     std::to_string(entries_.cols()));
  }
  if (!entries_.allFinite()) {
    throw InputError("LinearMap: matrix has non-finite entries");
  }
  eigenvalues_ = entries_.eigenvalues();
  spectral_radius_ = eigenvalues_.cwiseAbs().maxCoeff();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(entries_);
  const Eigen::VectorXd& sv = svd.singularValues();
  operator_norm_ = sv(0);
  const double smin = sv(sv.size() - 1);
  invertible_ = sv(0) > 0.0 && smin > kSingularCutoff * sv(0);
  condition_ = invertible_ ? sv(0) / smin
                           : std::numeric_limits<double>::infinity();
}

LinearMap LinearMap::identity(int dim) {
  return LinearMap(Eigen::MatrixXd::Identity(dim, dim));
}

LinearMap LinearMap::scalar(int dim, double a) {
  return LinearMap(a * Eigen::MatrixXd::Identity(dim, dim));
}

LinearMap LinearMap::diagonal(const Eigen::VectorXd& diag) {
  return LinearMap(Eigen::MatrixXd(diag.asDiagonal()));
}

Eigen::MatrixXd LinearMap::power(std::int64_t n) const {
  Eigen::MatrixXd base;
  if (n < 0) {
    if (!invertible_) {
      throw HypothesisError("negative power of a singular map");
    }
    base = entries_.partialPivLu().inverse();
    n = -n;
  } else {
    base = entries_;
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(dim(), dim());
  // Binary exponentiation.
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

Eigen::VectorXd LinearMap::solve(const Eigen::VectorXd& rhs) const {
  if (!invertible_) throw HypothesisError("cannot invert a singular map");
  if (rhs.size() != dim()) throw InputError("LinearMap::solve: dimension mismatch");
  return entries_.partialPivLu().solve(rhs);
}

LinearMap LinearMap::compose(const LinearMap& inner) const {
  if (inner.dim() != dim()) throw InputError("LinearMap::compose: dimension mismatch");
  return LinearMap(entries_ * inner.entries_);
}

Eigen::VectorXd apply_power(const LinearMap& map, std::int64_t n,
                            const Eigen::VectorXd& x) {
  if (x.size() != map.dim()) throw InputError("apply_power: dimension mismatch");
  if (n == 0) return x;
  return map.power(n) * x;
}

Eigen::MatrixXd apply_power(const LinearMap& map, std::int64_t n,
                            const Eigen::MatrixXd& x) {
  if (x.rows() != map.dim() || x.cols() != map.dim()) {
    throw InputError("apply_power: dimension mismatch");
  }
  if (n == 0) return x;
  const Eigen::MatrixXd p = map.power(n);
  return p * x * p.transpose();
}

}  // namespace decomp
