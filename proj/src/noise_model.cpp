#include "decomp/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "decomp/error.hpp"

namespace decomp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

void require_dim(int expected, Eigen::Index got, const char* what) {
  if (got != expected) {
    throw InputError(std::string(what) + ": dimension mismatch (expected " +
                     std::to_string(expected) + ", got " + std::to_string(got) + ")");
  }
}

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

}  // namespace

// --- construction ----------------------------------------------------------

NoiseModel NoiseModel::dirac(Eigen::VectorXd point) {
  if (point.size() == 0) throw InputError("Dirac: dimension must be >= 1");
  require_finite(point, "Dirac");
  const int d = static_cast<int>(point.size());
  return NoiseModel(std::make_shared<NoiseNode>(NoiseNode{Dirac{std::move(point)}}), d);
}

NoiseModel NoiseModel::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  if (mean.size() == 0) throw InputError("Gaussian: dimension must be >= 1");
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d) {
    throw InputError("Gaussian: covariance must be " + std::to_string(d) + "x" +
                     std::to_string(d));
  }
  require_finite(mean, "Gaussian mean");
  require_finite(cov, "Gaussian covariance");
  const double scale = 1.0 + cov.norm();
  if ((cov - cov.transpose()).norm() > 1e-10 * scale) {
    throw InputError("Gaussian: covariance must be symmetric");
  }
  cov = 0.5 * (cov + cov.transpose());
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff() < -1e-10) {
    throw InputError("Gaussian: covariance must be positive semidefinite");
  }
  return NoiseModel(
      std::make_shared<NoiseNode>(NoiseNode{Gaussian{std::move(mean), std::move(cov)}}),
      d);
}

NoiseModel NoiseModel::uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() == 0) throw InputError("UniformBox: dimension must be >= 1");
  require_dim(static_cast<int>(lo.size()), hi.size(), "UniformBox");
  require_finite(lo, "UniformBox lo");
  require_finite(hi, "UniformBox hi");
  if ((hi - lo).minCoeff() < 0.0) throw InputError("UniformBox: requires lo <= hi");
  const int d = static_cast<int>(lo.size());
  return NoiseModel(
      std::make_shared<NoiseNode>(NoiseNode{UniformBox{std::move(lo), std::move(hi)}}), d);
}

NoiseModel NoiseModel::mixture(std::vector<double> weights,
                               std::vector<NoiseModel> components) {
  if (components.empty() || weights.size() != components.size()) {
    throw InputError("Mixture: need one weight per component and at least one component");
  }
  const int d = components.front().dim();
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require_dim(d, components[i].dim(), "Mixture");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InputError("Mixture: weights must be nonnegative");
    }
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputError("Mixture: weights must sum to 1");
  }
  if (components.size() == 1) return components.front();
  return NoiseModel(std::make_shared<NoiseNode>(
                        NoiseNode{Mixture{std::move(weights), std::move(components)}}),
                    d);
}

NoiseModel NoiseModel::sample_cloud(Eigen::MatrixXd points) {
  if (points.rows() == 0 || points.cols() == 0) {
    throw InputError("SampleCloud: need at least one point of dimension >= 1");
  }
  require_finite(points, "SampleCloud");
  const int d = static_cast<int>(points.cols());
  return NoiseModel(std::make_shared<NoiseNode>(NoiseNode{SampleCloud{std::move(points)}}),
                    d);
}

NoiseModel NoiseModel::shifted(const NoiseModel& base, const Eigen::VectorXd& offset) {
  require_dim(base.dim(), offset.size(), "shift");
  require_finite(offset, "shift");
  if (offset.isZero(0.0)) return base;
  return std::visit(
      Overloaded{
          [&](const Dirac& m) { return dirac(m.point + offset); },
          [&](const Gaussian& m) { return gaussian(m.mean + offset, m.cov); },
          [&](const UniformBox& m) { return uniform_box(m.lo + offset, m.hi + offset); },
          [&](const SampleCloud& m) {
            Eigen::MatrixXd pts = m.points.rowwise() + offset.transpose();
            return sample_cloud(std::move(pts));
          },
          [&](const Shifted& m) { return shifted(m.base, m.offset + offset); },
          [&](const Mixture& m) {
            std::vector<NoiseModel> comps;
            comps.reserve(m.components.size());
            for (const auto& c : m.components) comps.push_back(shifted(c, offset));
            return mixture(m.weights, std::move(comps));
          },
          [&](const IndependentSum& m) {
            std::vector<NoiseModel> comps = m.components;
            comps.front() = shifted(comps.front(), offset);
            return independent_sum(std::move(comps));
          },
          [&](const Pushforward&) {
            return NoiseModel(
                std::make_shared<NoiseNode>(NoiseNode{Shifted{base, offset}}), base.dim());
          },
      },
      base.node().value);
}

NoiseModel NoiseModel::pushforward(const NoiseModel& base, const LinearMap& map) {
  require_dim(base.dim(), map.dim(), "pushforward");
  const Eigen::MatrixXd& a = map.matrix();
  return std::visit(
      Overloaded{
          [&](const Dirac& m) { return dirac(a * m.point); },
          [&](const Gaussian& m) {
            Eigen::MatrixXd cov = a * m.cov * a.transpose();
            cov = 0.5 * (cov + cov.transpose());
            return gaussian(a * m.mean, std::move(cov));
          },
          [&](const UniformBox& m) {
            if (!is_diagonal(a)) {
              return NoiseModel(std::make_shared<NoiseNode>(NoiseNode{Pushforward{map, base}}),
                                base.dim());
            }
            const Eigen::VectorXd x = a.diagonal().cwiseProduct(m.lo);
            const Eigen::VectorXd y = a.diagonal().cwiseProduct(m.hi);
            return uniform_box(x.cwiseMin(y), x.cwiseMax(y));
          },
          [&](const SampleCloud& m) {
            Eigen::MatrixXd pts = m.points * a.transpose();
            return sample_cloud(std::move(pts));
          },
          [&](const Shifted& m) { return shifted(pushforward(m.base, map), a * m.offset); },
          [&](const Mixture& m) {
            std::vector<NoiseModel> comps;
            comps.reserve(m.components.size());
            for (const auto& c : m.components) comps.push_back(pushforward(c, map));
            return mixture(m.weights, std::move(comps));
          },
          [&](const IndependentSum& m) {
            std::vector<NoiseModel> comps;
            comps.reserve(m.components.size());
            for (const auto& c : m.components) comps.push_back(pushforward(c, map));
            return independent_sum(std::move(comps));
          },
          [&](const Pushforward& m) { return pushforward(m.base, map.compose(m.map)); },
      },
      base.node().value);
}

NoiseModel NoiseModel::independent_sum(std::vector<NoiseModel> components) {
  if (components.empty()) throw InputError("independent_sum: no components");
  const int d = components.front().dim();

  // Flatten nested sums and fold every Dirac/Gaussian term into one.
  std::vector<NoiseModel> flat;
  std::vector<NoiseModel> stack(components.rbegin(), components.rend());
  while (!stack.empty()) {
    NoiseModel m = std::move(stack.back());
    stack.pop_back();
    require_dim(d, m.dim(), "independent_sum");
    if (const auto* s = std::get_if<IndependentSum>(&m.node().value)) {
      for (auto it = s->components.rbegin(); it != s->components.rend(); ++it)
        stack.push_back(*it);
    } else {
      flat.push_back(std::move(m));
    }
  }

  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  bool any_gaussian = false, any_closed = false;
  std::vector<NoiseModel> rest;
  for (auto& m : flat) {
    if (const auto* x = std::get_if<Dirac>(&m.node().value)) {
      shift += x->point;
      any_closed = true;
    } else if (const auto* g = std::get_if<Gaussian>(&m.node().value)) {
      shift += g->mean;
      cov += g->cov;
      any_gaussian = true;
      any_closed = true;
    } else {
      rest.push_back(std::move(m));
    }
  }

  if (rest.empty()) return any_gaussian ? gaussian(shift, cov) : dirac(shift);
  if (any_gaussian) {
    rest.insert(rest.begin(), gaussian(shift, cov));
  } else if (any_closed) {
    rest.front() = shifted(rest.front(), shift);
  }
  if (rest.size() == 1) return rest.front();
  return NoiseModel(std::make_shared<NoiseNode>(NoiseNode{IndependentSum{std::move(rest)}}),
                    d);
}

bool NoiseModel::is_dirac() const noexcept {
  return std::holds_alternative<Dirac>(node_->value);
}
bool NoiseModel::is_gaussian() const noexcept {
  return std::holds_alternative<Gaussian>(node_->value);
}
bool NoiseModel::is_gaussian_family() const noexcept { return is_dirac() || is_gaussian(); }

// --- algebra -----------------------------------------------------------------

NoiseModel pushforward(const NoiseModel& model, const LinearMap& map) {
  return NoiseModel::pushforward(model, map);
}

NoiseModel convolve(const NoiseModel& a, const NoiseModel& b) {
  require_dim(a.dim(), b.dim(), "convolve");
  return NoiseModel::independent_sum({a, b});
}

NoiseModel reflect(const NoiseModel& model) {
  return NoiseModel::pushforward(model, LinearMap::scalar(model.dim(), -1.0));
}

NoiseModel symmetrize(const NoiseModel& model) { return convolve(model, reflect(model)); }

Eigen::VectorXd mean(const NoiseModel& model) {
  return std::visit(
      Overloaded{
          [](const Dirac& m) -> Eigen::VectorXd { return m.point; },
          [](const Gaussian& m) -> Eigen::VectorXd { return m.mean; },
          [](const UniformBox& m) -> Eigen::VectorXd { return 0.5 * (m.lo + m.hi); },
          [](const SampleCloud& m) -> Eigen::VectorXd {
            return m.points.colwise().mean().transpose();
          },
          [](const Shifted& m) -> Eigen::VectorXd { return mean(m.base) + m.offset; },
          [](const Pushforward& m) -> Eigen::VectorXd {
            return m.map.matrix() * mean(m.base);
          },
          [&](const Mixture& m) -> Eigen::VectorXd {
            Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
            for (std::size_t i = 0; i < m.components.size(); ++i)
              out += m.weights[i] * mean(m.components[i]);
            return out;
          },
          [&](const IndependentSum& m) -> Eigen::VectorXd {
            Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim());
            for (const auto& c : m.components) out += mean(c);
            return out;
          },
      },
      model.node().value);
}

Eigen::MatrixXd covariance(const NoiseModel& model) {
  const int d = model.dim();
  return std::visit(
      Overloaded{
          [&](const Dirac&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(d, d); },
          [](const Gaussian& m) -> Eigen::MatrixXd { return m.cov; },
          [](const UniformBox& m) -> Eigen::MatrixXd {
            const Eigen::VectorXd w = m.hi - m.lo;
            return Eigen::MatrixXd((w.array().square() / 12.0).matrix().asDiagonal());
          },
          [](const SampleCloud& m) -> Eigen::MatrixXd {
            const Eigen::MatrixXd c = m.points.rowwise() - m.points.colwise().mean();
            return c.transpose() * c / static_cast<double>(m.points.rows());
          },
          [](const Shifted& m) -> Eigen::MatrixXd { return covariance(m.base); },
          [](const Pushforward& m) -> Eigen::MatrixXd {
            return m.map.matrix() * covariance(m.base) * m.map.matrix().transpose();
          },
          [&](const Mixture& m) -> Eigen::MatrixXd {
            const Eigen::VectorXd mu = mean(model);
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
            for (std::size_t i = 0; i < m.components.size(); ++i) {
              const Eigen::VectorXd dm = mean(m.components[i]) - mu;
              out += m.weights[i] * (covariance(m.components[i]) + dm * dm.transpose());
            }
            return out;
          },
          [&](const IndependentSum& m) -> Eigen::MatrixXd {
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
            for (const auto& c : m.components) out += covariance(c);
            return out;
          },
      },
      model.node().value);
}

std::optional<double> support_bound(const NoiseModel& model) {
  return std::visit(
      Overloaded{
          [](const Dirac& m) -> std::optional<double> { return m.point.norm(); },
          [](const Gaussian& m) -> std::optional<double> {
            if (m.cov.isZero(0.0)) return m.mean.norm();
            return std::nullopt;
          },
          [](const UniformBox& m) -> std::optional<double> {
            return m.lo.cwiseAbs().cwiseMax(m.hi.cwiseAbs()).norm();
          },
          [](const SampleCloud& m) -> std::optional<double> {
            return m.points.rowwise().norm().maxCoeff();
          },
          [](const Shifted& m) -> std::optional<double> {
            const auto b = support_bound(m.base);
            if (!b) return std::nullopt;
            return *b + m.offset.norm();
          },
          [](const Pushforward& m) -> std::optional<double> {
            const auto b = support_bound(m.base);
            if (!b) return std::nullopt;
            return m.map.operator_norm() * *b;
          },
          [](const Mixture& m) -> std::optional<double> {
            double out = 0.0;
            for (std::size_t i = 0; i < m.components.size(); ++i) {
              if (m.weights[i] == 0.0) continue;
              const auto b = support_bound(m.components[i]);
              if (!b) return std::nullopt;
              out = std::max(out, *b);
            }
            return out;
          },
          [](const IndependentSum& m) -> std::optional<double> {
            double out = 0.0;
            for (const auto& c : m.components) {
              const auto b = support_bound(c);
              if (!b) return std::nullopt;
              out += *b;
            }
            return out;
          },
      },
      model.node().value);
}

std::optional<double> centered_support_radius(const NoiseModel& model) {
  return std::visit(
      Overloaded{
          [](const Dirac&) -> std::optional<double> { return 0.0; },
          [](const Gaussian& m) -> std::optional<double> {
            if (m.cov.isZero(0.0)) return 0.0;
            return std::nullopt;
          },
          [](const UniformBox& m) -> std::optional<double> {
            return 0.5 * (m.hi - m.lo).norm();
          },
          [](const SampleCloud& m) -> std::optional<double> {
            return (m.points.rowwise() - m.points.colwise().mean())
                .rowwise()
                .norm()
                .maxCoeff();
          },
          [](const Shifted& m) -> std::optional<double> {
            return centered_support_radius(m.base);
          },
          [](const Pushforward& m) -> std::optional<double> {
            const auto r = centered_support_radius(m.base);
            if (!r) return std::nullopt;
            return m.map.operator_norm() * *r;
          },
          [&](const Mixture& m) -> std::optional<double> {
            const Eigen::VectorXd mu = mean(model);
            double out = 0.0;
            for (std::size_t i = 0; i < m.components.size(); ++i) {
              if (m.weights[i] == 0.0) continue;
              const auto r = centered_support_radius(m.components[i]);
              if (!r) return std::nullopt;
              out = std::max(out, *r + (mean(m.components[i]) - mu).norm());
            }
            return out;
          },
          [](const IndependentSum& m) -> std::optional<double> {
            double out = 0.0;
            for (const auto& c : m.components) {
              const auto r = centered_support_radius(c);
              if (!r) return std::nullopt;
              out += *r;
            }
            return out;
          },
      },
      model.node().value);
}

bool same_structure(const NoiseModel& a, const NoiseModel& b) {
  if (a.dim() != b.dim()) return false;
  if (&a.node() == &b.node()) return true;
  const auto& va = a.node().value;
  const auto& vb = b.node().value;
  if (va.index() != vb.index()) return false;
  const auto same_list = [](const std::vector<NoiseModel>& x,
                            const std::vector<NoiseModel>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!same_structure(x[i], y[i])) return false;
    return true;
  };
  return std::visit(
      Overloaded{
          [&](const Dirac& x) { return x.point == std::get<Dirac>(vb).point; },
          [&](const Gaussian& x) {
            const auto& y = std::get<Gaussian>(vb);
            return x.mean == y.mean && x.cov == y.cov;
          },
          [&](const UniformBox& x) {
            const auto& y = std::get<UniformBox>(vb);
            return x.lo == y.lo && x.hi == y.hi;
          },
          [&](const SampleCloud& x) {
            const auto& y = std::get<SampleCloud>(vb);
            return x.points.rows() == y.points.rows() && x.points == y.points;
          },
          [&](const Shifted& x) {
            const auto& y = std::get<Shifted>(vb);
            return x.offset == y.offset && same_structure(x.base, y.base);
          },
          [&](const Pushforward& x) {
            const auto& y = std::get<Pushforward>(vb);
            return x.map.matrix() == y.map.matrix() && same_structure(x.base, y.base);
          },
          [&](const Mixture& x) {
            const auto& y = std::get<Mixture>(vb);
            return x.weights == y.weights && same_list(x.components, y.components);
          },
          [&](const IndependentSum& x) {
            return same_list(x.components, std::get<IndependentSum>(vb).components);
          },
      },
      va);
}

// --- log moment ----------------------------------------------------------------

const char* to_string(MomentMethod m) noexcept {
  switch (m) {
    case MomentMethod::closed_form: return "closed_form";
    case MomentMethod::quadrature: return "quadrature";
    case MomentMethod::monte_carlo: return "monte_carlo";
  }
  return "monte_carlo";
}

namespace {

double log1p_abs_integral(double a, double b) {
  // ∫_a^b log(|t| + 1) dt with a <= b, split at the kink in 0.
  if (a == b) return 0.0;
  const auto f = [](double t) { return std::log1p(std::abs(t)); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  if (a < 0.0 && b > 0.0) {
    return Quad::integrate(f, a, 0.0, 15, 1e-14) + Quad::integrate(f, 0.0, b, 15, 1e-14);
  }
  return Quad::integrate(f, a, b, 15, 1e-14);
}

LogMomentReport monte_carlo_log_moment(const NoiseModel& model, std::int64_t n,
                                       std::uint64_t seed) {
  if (n < 1) throw InputError("log_moment: Monte Carlo path needs n >= 1");
  const Eigen::MatrixXd xs = sample(model, n, seed);
  const Eigen::ArrayXd vals = (xs.rowwise().norm().array() + 1.0).log();
  const double m = vals.mean();
  const double var =
      n > 1 ? (vals - m).square().sum() / static_cast<double>(n - 1) : 0.0;
  LogMomentReport r;
  r.method = MomentMethod::monte_carlo;
  r.n_used = n;
  r.seed = seed;
  r.value = m;
  // Floor at the resolution of the estimate so the error is never reported as 0.
  r.std_error = std::max(std::sqrt(var / static_cast<double>(n)),
                         std::numeric_limits<double>::epsilon() * (1.0 + m));
  if (m > kLogMomentBlowup) {
    r.infinite = true;
    r.note = "undetermined, evidence of divergence";
  }
  return r;
}

}  // namespace

LogMomentReport log_moment(const NoiseModel& model, std::int64_t n, std::uint64_t seed) {
  const auto& v = model.node().value;
  if (const auto* x = std::get_if<Dirac>(&v)) {
    LogMomentReport r;
    r.value = std::log1p(x->point.norm());
    return r;
  }
  if (const auto* g = std::get_if<Gaussian>(&v); g && g->cov.isZero(0.0)) {
    LogMomentReport r;
    r.value = std::log1p(g->mean.norm());
    return r;
  }
  if (const auto* box = std::get_if<UniformBox>(&v); box && model.dim() == 1) {
    LogMomentReport r;
    const double lo = box->lo(0), hi = box->hi(0);
    if (lo == hi) {
      r.value = std::log1p(std::abs(lo));
    } else {
      r.value = log1p_abs_integral(lo, hi) / (hi - lo);
      r.method = MomentMethod::quadrature;
    }
    return r;
  }
  if (const auto* mix = std::get_if<Mixture>(&v)) {
    // Linear in the law: combine per-component reports.
    LogMomentReport r;
    double var = 0.0;
    for (std::size_t i = 0; i < mix->components.size(); ++i) {
      const double w = mix->weights[i];
      if (w == 0.0) continue;
      const auto c = log_moment(mix->components[i], n,
                                seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL);
      r.value += w * c.value;
      r.infinite = r.infinite || c.infinite;
      var += w * w * c.std_error * c.std_error;
      if (static_cast<int>(c.method) > static_cast<int>(r.method)) r.method = c.method;
      r.n_used = std::max(r.n_used, c.n_used);
      if (!c.note.empty()) r.note = c.note;
    }
    r.std_error = std::sqrt(var);
    r.seed = r.method == MomentMethod::monte_carlo ? seed : 0;
    return r;
  }
  return monte_carlo_log_moment(model, n, seed);
}

// --- coset support ----------------------------------------------------------

namespace {

CosetResult coset_of(const NoiseModel& model, const ContractionSplit& split, double tol) {
  const int d = model.dim();
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(d, d) - split.projector;
  const auto fail = [&](std::string why) {
    return CosetResult{false, Eigen::VectorXd::Zero(d), std::move(why)};
  };
  const auto box_coset = [&](const Eigen::MatrixXd& image, const UniformBox& box,
                             const char* label) {
    for (int j = 0; j < d; ++j) {
      if (box.hi(j) == box.lo(j)) continue;
      const double leak = (q * image.col(j)).norm();
      if (leak > tol) {
        std::ostringstream msg;
        msg << label << " axis " << j << " leaves C(phi): complement norm " << leak;
        return fail(msg.str());
      }
    }
    return CosetResult{true, q * image * (0.5 * (box.lo + box.hi)),
                       std::string(label) + " axes lie in C(phi)"};
  };

  return std::visit(
      Overloaded{
          [&](const Dirac& m) {
            return CosetResult{true, q * m.point, "point mass"};
          },
          [&](const Gaussian& m) {
            const Eigen::MatrixXd leak = q * m.cov * q.transpose();
            const double norm = leak.size() ? leak.norm() : 0.0;
            if (norm > tol) {
              std::ostringstream msg;
              msg << "covariance leaks into the complement: norm " << norm;
              return fail(msg.str());
            }
            return CosetResult{true, q * m.mean, "covariance range inside C(phi)"};
          },
          [&](const UniformBox& m) {
            return box_coset(Eigen::MatrixXd::Identity(d, d), m, "box");
          },
          [&](const SampleCloud& m) {
            const Eigen::MatrixXd comp = m.points * q.transpose();
            const Eigen::RowVectorXd first = comp.row(0);
            const double spread = (comp.rowwise() - first).rowwise().norm().maxCoeff();
            if (spread > tol) {
              std::ostringstream msg;
              msg << "sample complement components spread " << spread;
              return fail(msg.str());
            }
            return CosetResult{true, first.transpose(), "all samples share the coset"};
          },
          [&](const Shifted& m) {
            CosetResult r = coset_of(m.base, split, tol);
            if (r.in_coset) r.offset += q * m.offset;
            return r;
          },
          [&](const Pushforward& m) {
            if (const auto* box = std::get_if<UniformBox>(&m.base.node().value)) {
              return box_coset(m.map.matrix(), *box, "mapped box");
            }
            return fail("unsupported structure");
          },
          [&](const Mixture& m) {
            CosetResult out = fail("empty mixture");
            bool first = true;
            for (std::size_t i = 0; i < m.components.size(); ++i) {
              if (m.weights[i] == 0.0) continue;
              CosetResult r = coset_of(m.components[i], split, tol);
              if (!r.in_coset) return r;
              if (first) {
                out = r;
                first = false;
              } else if ((r.offset - out.offset).norm() > tol) {
                std::ostringstream msg;
                msg << "mixture components on different cosets (gap "
                    << (r.offset - out.offset).norm() << ")";
                return fail(msg.str());
              }
            }
            out.certificate = "all mixture components share the coset";
            return out;
          },
          [&](const IndependentSum& m) {
            Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
            for (const auto& c : m.components) {
              CosetResult r = coset_of(c, split, tol);
              if (!r.in_coset) return r;
              offset += r.offset;
            }
            return CosetResult{true, offset, "every summand lies on a coset"};
          },
      },
      model.node().value);
}

}  // namespace

CosetResult support_coset(const NoiseModel& model, const ContractionSplit& split,
                          double tol) {
  require_dim(split.dim(), model.dim(), "support_coset");
  return coset_of(model, split, tol);
}

// --- sampling ------------------------------------------------------------------

namespace {

Eigen::MatrixXd draw(const NoiseModel& model, std::int64_t n, std::mt19937_64& rng) {
  const int d = model.dim();
  return std::visit(
      Overloaded{
          [&](const Dirac& m) -> Eigen::MatrixXd {
            return m.point.transpose().replicate(n, 1);
          },
          [&](const Gaussian& m) -> Eigen::MatrixXd {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.cov);
            const Eigen::MatrixXd root =
                es.eigenvectors() *
                es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
            std::normal_distribution<double> normal(0.0, 1.0);
            Eigen::MatrixXd z(n, d);
            for (std::int64_t i = 0; i < n; ++i)
              for (int j = 0; j < d; ++j) z(i, j) = normal(rng);
            Eigen::MatrixXd out = z * root.transpose();
            out.rowwise() += m.mean.transpose();
            return out;
          },
          [&](const UniformBox& m) -> Eigen::MatrixXd {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            const Eigen::VectorXd w = m.hi - m.lo;
            Eigen::MatrixXd out(n, d);
            for (std::int64_t i = 0; i < n; ++i)
              for (int j = 0; j < d; ++j) out(i, j) = m.lo(j) + w(j) * unif(rng);
            return out;
          },
          [&](const SampleCloud& m) -> Eigen::MatrixXd {
            std::uniform_int_distribution<Eigen::Index> pick(0, m.points.rows() - 1);
            Eigen::MatrixXd out(n, d);
            for (std::int64_t i = 0; i < n; ++i) out.row(i) = m.points.row(pick(rng));
            return out;
          },
          [&](const Shifted& m) -> Eigen::MatrixXd {
            Eigen::MatrixXd out = draw(m.base, n, rng);
            out.rowwise() += m.offset.transpose();
            return out;
          },
          [&](const Pushforward& m) -> Eigen::MatrixXd {
            return draw(m.base, n, rng) * m.map.matrix().transpose();
          },
          [&](const Mixture& m) -> Eigen::MatrixXd {
            std::discrete_distribution<std::size_t> pick(m.weights.begin(), m.weights.end());
            std::vector<std::size_t> label(static_cast<std::size_t>(n));
            std::vector<std::int64_t> count(m.components.size(), 0);
            for (auto& l : label) ++count[l = pick(rng)];
            Eigen::MatrixXd out(n, d);
            for (std::size_t c = 0; c < m.components.size(); ++c) {
              if (count[c] == 0) continue;
              const Eigen::MatrixXd part = draw(m.components[c], count[c], rng);
              Eigen::Index row = 0;
              for (std::int64_t i = 0; i < n; ++i)
                if (label[static_cast<std::size_t>(i)] == c) out.row(i) = part.row(row++);
            }
            return out;
          },
          [&](const IndependentSum& m) -> Eigen::MatrixXd {
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, d);
            for (const auto& c : m.components) out += draw(c, n, rng);
            return out;
          },
      },
      model.node().value);
}

}  // namespace

Eigen::MatrixXd sample(const NoiseModel& model, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample: n must be >= 1");
  std::mt19937_64 rng(seed);
  return draw(model, n, rng);
}

}  // namespace decomp
