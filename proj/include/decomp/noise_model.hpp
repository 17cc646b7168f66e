#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "decomp/linear_map.hpp"
#include "decomp/spectral.hpp"

namespace decomp {

struct NoiseNode;

/// One-step noise law on R^d. A cheap-to-copy immutable handle to a tagged
/// union of closed forms (Dirac, Gaussian, uniform box), sample clouds and
/// structural composites (mixture, shift, linear image, independent sum).
///
/// Factory functions validate their arguments and normalize nested
/// structure: shifts and linear images are pushed into closed forms whenever
/// the result stays in closed form.
class NoiseModel {
 public:
  static NoiseModel dirac(Eigen::VectorXd point);
  static NoiseModel gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static NoiseModel uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static NoiseModel mixture(std::vector<double> weights,
                            std::vector<NoiseModel> components);
  static NoiseModel shifted(const NoiseModel& base, const Eigen::VectorXd& offset);
  static NoiseModel pushforward(const NoiseModel& base, const LinearMap& map);
  static NoiseModel sample_cloud(Eigen::MatrixXd points);
  /// Law of the sum of independent draws from each component.
  static NoiseModel independent_sum(std::vector<NoiseModel> components);

  int dim() const noexcept { return dim_; }
  const NoiseNode& node() const noexcept { return *node_; }

  bool is_dirac() const noexcept;
  bool is_gaussian() const noexcept;
  /// Dirac or Gaussian: the closed-form Gaussian algebra applies.
  bool is_gaussian_family() const noexcept;

 private:
  NoiseModel(std::shared_ptr<const NoiseNode> node, int dim)
      : node_(std::move(node)), dim_(dim) {}

  std::shared_ptr<const NoiseNode> node_;
  int dim_ = 0;
};

struct Dirac {
  Eigen::VectorXd point;
};
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
struct UniformBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};
struct Mixture {
  std::vector<double> weights;
  std::vector<NoiseModel> components;
};
struct Shifted {
  NoiseModel base;
  Eigen::VectorXd offset;
};
struct Pushforward {
  LinearMap map;
  NoiseModel base;
};
struct SampleCloud {
  Eigen::MatrixXd points;  ///< n×d, uniform weights
};
struct IndependentSum {
  std::vector<NoiseModel> components;
};

struct NoiseNode {
  std::variant<Dirac, Gaussian, UniformBox, Mixture, Shifted, Pushforward, SampleCloud,
               IndependentSum>
      value;
};

/// Image law T(ν)(E) = ν(T^{-1}E).
NoiseModel pushforward(const NoiseModel& model, const LinearMap& map);
/// Law of X + Y for independent X ~ a, Y ~ b.
NoiseModel convolve(const NoiseModel& a, const NoiseModel& b);
/// ν̌(E) = ν(−E).
NoiseModel reflect(const NoiseModel& model);
/// ν ∗ ν̌, always symmetric.
NoiseModel symmetrize(const NoiseModel& model);

Eigen::VectorXd mean(const NoiseModel& model);
Eigen::MatrixXd covariance(const NoiseModel& model);
/// sup ‖v‖ over the support, when the support is bounded.
std::optional<double> support_bound(const NoiseModel& model);
/// sup ‖v − mean‖ over the support, when the support is bounded.
std::optional<double> centered_support_radius(const NoiseModel& model);

/// Structural identity (same tags and parameters, bit for bit).
bool same_structure(const NoiseModel& a, const NoiseModel& b);

enum class MomentMethod { closed_form, quadrature, monte_carlo };
const char* to_string(MomentMethod m) noexcept;

/// ∫ log(‖v‖ + 1) dν(v), or an estimate of it.
struct LogMomentReport {
  double value = 0.0;
  bool infinite = false;
  double std_error = 0.0;
  MomentMethod method = MomentMethod::closed_form;
  std::int64_t n_used = 0;
  std::uint64_t seed = 0;
  std::string note;
};

/// Monte Carlo estimates above this are reported as infinite.
inline constexpr double kLogMomentBlowup = 1e6;

LogMomentReport log_moment(const NoiseModel& model, std::int64_t n, std::uint64_t seed);

struct CosetResult {
  bool in_coset = false;
  Eigen::VectorXd offset;  ///< U-component u of the coset u + C(φ)
  std::string certificate;
};

/// Decides whether the law is supported on a coset u + C(φ), with absolute
/// tolerance `tol` on complement components.
CosetResult support_coset(const NoiseModel& model, const ContractionSplit& split,
                          double tol = 1e-8);

/// n i.i.d. draws as an n×d matrix; deterministic in (model, n, seed).
Eigen::MatrixXd sample(const NoiseModel& model, std::int64_t n, std::uint64_t seed);

}  // namespace decomp
