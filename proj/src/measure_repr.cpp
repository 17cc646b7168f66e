#include "decomp/measure_repr.hpp"

#include "decomp/error.hpp"

namespace decomp {

int dim(const MeasureRepr& repr) {
  if (const auto* g = std::get_if<GaussianRepr>(&repr)) return static_cast<int>(g->mean.size());
  if (const auto* x = std::get_if<DiracRepr>(&repr)) return static_cast<int>(x->point.size());
  return static_cast<int>(std::get<EmpiricalRepr>(repr).samples.cols());
}

NoiseModel to_model(const MeasureRepr& repr) {
  if (const auto* g = std::get_if<GaussianRepr>(&repr)) {
    return NoiseModel::gaussian(g->mean, g->cov);
  }
  if (const auto* x = std::get_if<DiracRepr>(&repr)) return NoiseModel::dirac(x->point);
  return NoiseModel::sample_cloud(std::get<EmpiricalRepr>(repr).samples);
}

MeasureRepr translate(const MeasureRepr& repr, const Eigen::VectorXd& offset) {
  if (offset.size() != dim(repr)) throw InputError("translate: dimension mismatch");
  if (const auto* g = std::get_if<GaussianRepr>(&repr)) {
    return GaussianRepr{g->mean + offset, g->cov};
  }
  if (const auto* x = std::get_if<DiracRepr>(&repr)) return DiracRepr{x->point + offset};
  EmpiricalRepr e = std::get<EmpiricalRepr>(repr);
  e.samples.rowwise() += offset.transpose();
  return e;
}

Eigen::MatrixXd sample(const MeasureRepr& repr, std::int64_t n, std::uint64_t seed) {
  return sample(to_model(repr), n, seed);
}

}  // namespace decomp
