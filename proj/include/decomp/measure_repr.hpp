#pragma once

#include <cstdint>
#include <variant>

#include <Eigen/Dense>

#include "decomp/noise_model.hpp"

namespace decomp {

struct GaussianRepr {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct DiracRepr {
  Eigen::VectorXd point;
};

/// Seeded sample cloud of a marginal law.
struct EmpiricalRepr {
  Eigen::MatrixXd samples;  ///< n×d
  std::uint64_t seed = 0;
  std::int64_t truncation = 0;  ///< N in Σ_{i≤N} φ^i ξ_{k−i}
  bool certified = false;       ///< truncation backed by an analytic tail bound
};

/// A marginal law λ_k in one of the forms the solver can produce.
using MeasureRepr = std::variant<GaussianRepr, DiracRepr, EmpiricalRepr>;

int dim(const MeasureRepr& repr);

/// The law as a NoiseModel (an empirical cloud becomes a SampleCloud).
NoiseModel to_model(const MeasureRepr& repr);

/// λ ∗ δ_offset.
MeasureRepr translate(const MeasureRepr& repr, const Eigen::VectorXd& offset);

/// n draws; an empirical law is resampled with replacement.
Eigen::MatrixXd sample(const MeasureRepr& repr, std::int64_t n, std::uint64_t seed);

}  // namespace decomp
