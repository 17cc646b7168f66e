#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "decomp/linear_map.hpp"
#include "decomp/noise_model.hpp"

namespace decomp {

/// μ_k = model for every k outside the window.
struct StationaryTail {
  NoiseModel model;
};

/// μ_k = ψ^k(base); ψ must be invertible so negative k are defined.
struct PushforwardPowerTail {
  NoiseModel base;
  LinearMap map;
};

/// One-dimensional family with μ_0 = δ_0 and, for n ≠ 0,
/// μ_n = (1 − a^|n|) U[0, a^n] + a^|n| U[n, n+1] (mirrored for n < 0).
struct DecayMixtureTail {
  double a = 0.5;
};

/// μ_k = δ_0 outside the window.
struct ZeroTail {};

using TailRule = std::variant<StationaryTail, PushforwardPowerTail, DecayMixtureTail, ZeroTail>;

/// Bi-infinite noise sequence (μ_k)_{k∈Z}: explicit window entries override
/// the analytic tail rule.
class NoiseProcess {
 public:
  NoiseProcess(int dim, std::map<std::int64_t, NoiseModel> window, TailRule tail);

  int dim() const noexcept { return dim_; }
  const std::map<std::int64_t, NoiseModel>& window() const noexcept { return window_; }
  const TailRule& tail() const noexcept { return tail_; }

  NoiseModel model_at(std::int64_t k) const;

 private:
  int dim_;
  std::map<std::int64_t, NoiseModel> window_;
  TailRule tail_;
};

inline NoiseModel model_at(const NoiseProcess& process, std::int64_t k) {
  return process.model_at(k);
}

/// The law of the tail rule at k, ignoring the window.
NoiseModel tail_model_at(const TailRule& tail, int dim, std::int64_t k);

/// Stationary tail and every window entry structurally equal to it.
bool is_stationary(const NoiseProcess& process);
/// Every μ_k is Gaussian or a point mass.
bool is_all_gaussian(const NoiseProcess& process);
/// Every μ_k is a point mass.
bool is_all_dirac(const NoiseProcess& process);

enum class LpVerdict { lp_paths_yes, lp_paths_no, undetermined };
const char* to_string(LpVerdict v) noexcept;

/// Kolmogorov three-series data for Z_n = ‖X_n‖^p truncated at 1.
struct ThreeSeriesReport {
  double p = 1.0;
  int horizon = 0;
  std::int64_t n_lo = 0;  ///< first index summed explicitly
  std::int64_t n_hi = 0;  ///< last index summed explicitly
  double s1 = 0.0;        ///< Σ P(Z_n > 1)
  double s2 = 0.0;        ///< Σ E[Z_n; Z_n ≤ 1]
  double s3 = 0.0;        ///< Σ Var(Z_n 1{Z_n ≤ 1})
  double s1_tail = 0.0;   ///< analytic bound on the remainder (exact for s1 when known)
  double s2_tail = 0.0;
  double s3_tail = 0.0;
  bool tails_certified = false;
  bool estimated_terms = false;  ///< some window terms came from sampling
  LpVerdict verdict = LpVerdict::undetermined;
  std::string reason;
};

ThreeSeriesReport lp_path_check(const NoiseProcess& process, double p, int horizon);

/// Monte Carlo estimate of
/// M_p = lim_n E log((Σ_{|k|≤n} ‖V_k‖^p)^{1/p} + 1).
struct MpReport {
  LogMomentReport estimate;  ///< last level, with its standard error
  std::vector<int> levels;
  std::vector<double> level_values;
  std::vector<double> level_std_errors;
  std::vector<double> increments;
  bool stabilized = false;
  double subadditive_bound = 0.0;  ///< Σ_k E log(‖V_k‖ + 1) over the last level
  double subadditive_std_error = 0.0;
  ThreeSeriesReport lp_check;
};

/// Levels are 5·2^j for j < n_levels. Throws PreconditionError when the
/// ℓ_p check returns lp_paths_no.
MpReport mp_log_moment(const NoiseProcess& process, double p, int n_levels,
                       std::int64_t samples, std::uint64_t seed);

/// Solution of y_k = x_k + φ(y_{k−1}) on [k_min, k_max].
struct ShiftSequence {
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
  std::int64_t anchor_index = 0;
  Eigen::VectorXd anchor;
  std::vector<Eigen::VectorXd> values;

  const Eigen::VectorXd& at(std::int64_t k) const;
  /// max_k ‖y_k − x_k − φ y_{k−1}‖ / (1 + ‖y_k‖) over interior k.
  double max_relative_residual(const std::function<Eigen::VectorXd(std::int64_t)>& x,
                               const LinearMap& map) const;
};

using VectorSequence = std::function<Eigen::VectorXd(std::int64_t)>;

/// Fixes y at `anchor_index` and runs the recursion forward and (through
/// φ^{-1}) backward. Throws HypothesisError for a singular map.
ShiftSequence solve_shift_recursion(const VectorSequence& x, const LinearMap& map,
                                    const Eigen::VectorXd& anchor, std::int64_t k_min,
                                    std::int64_t k_max, std::int64_t anchor_index = 0);

enum class ShiftVerdict { solvable, divergent, undetermined };
const char* to_string(ShiftVerdict v) noexcept;

struct ShiftSolvability {
  ShiftVerdict verdict = ShiftVerdict::undetermined;
  /// Partial sums Σ_{i=0}^N φ^i x_{−i}, N = 0, 1, ...
  std::vector<Eigen::VectorXd> partial_sums;
  std::vector<double> increment_norms;
  Eigen::VectorXd y0;
  double lp_norm = 0.0;  ///< of the induced sequence on [−horizon, horizon]
  std::string reason;
};

/// Decides whether y = x + τ(y) has a solution in ℓ_p among sequences with
/// φ^k y_{−k} → 0, for x_k = b^{−|k|} u.
ShiftSolvability lp_shift_solvable(double b, const Eigen::VectorXd& u, const LinearMap& map,
                                   double p, int horizon);
/// Same for an explicit window (x_k = 0 outside it).
ShiftSolvability lp_shift_solvable(const std::map<std::int64_t, Eigen::VectorXd>& x,
                                   const LinearMap& map, double p, int horizon);

/// Block matrix of the weighted shift τ(v)_i = φ v_{i−1} on L copies of R^d.
Eigen::MatrixXd weighted_shift_matrix(const LinearMap& map, int length);

}  // namespace decomp
