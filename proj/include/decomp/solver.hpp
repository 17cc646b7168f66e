#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "decomp/linear_map.hpp"
#include "decomp/measure_repr.hpp"
#include "decomp/process.hpp"
#include "decomp/spectral.hpp"

namespace decomp {

enum class ExistenceStatus { exists, not_exists, undetermined };
enum class Route { stationary_thm, gaussian_series, lp_paths_thm, dirac_exact, mc_empirical };
enum class SolutionKind { gaussian_closed_form, dirac_exact, empirical };

const char* to_string(ExistenceStatus s) noexcept;
const char* to_string(Route r) noexcept;
const char* to_string(SolutionKind k) noexcept;

struct SolverOptions {
  std::int64_t k_min = -10;
  std::int64_t k_max = 10;
  int horizon = 1000;
  double tol = 1e-8;
  double split_tol = 1e-8;
  double cap = 1e12;
  double p = 2.0;
  std::int64_t samples = 100000;        ///< draws per empirical marginal
  std::int64_t moment_samples = 20000;  ///< draws for log-moment and M_p estimates
  int mp_levels = 4;
  std::uint64_t seed = 0;
  bool force = false;
  std::int64_t truncation = 0;  ///< N for uncertified empirical runs (0 → 200)
  int permutations = 500;
  double alpha = 0.01;
  double residual_tol = 1e-9;
  /// Cap on the rows fed to each energy test (0: none in d = 1, 1000 otherwise).
  std::int64_t max_test_samples = 0;
};

/// One named piece of evidence behind a verdict.
struct Evidence {
  std::string name;
  std::string verdict;
  std::string detail;
  std::optional<double> value;
};

struct ExistenceReport {
  ExistenceStatus status = ExistenceStatus::undetermined;
  std::optional<Route> route;
  std::vector<Evidence> evidence;
  std::vector<std::string> routes_attempted;
  int horizon = 0;
  double tol = 0.0;
  double p = 0.0;
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
};

/// Decides existence of a solution of λ_k = μ_k ∗ φ(λ_{k−1}). Routes are
/// tried in the order stationary → Gaussian series → ℓ_p paths → empirical;
/// the first definite verdict wins and is cross-checked against the series
/// route. Throws HypothesisError for a singular map and ConsistencyError when
/// two routes contradict each other.
ExistenceReport analyze_existence(const NoiseProcess& process, const LinearMap& map,
                                  const SolverOptions& opts = {});

struct VerificationEntry {
  std::int64_t k = 0;
  double cov_residual = 0.0;   ///< relative, Gaussian kind
  double mean_residual = 0.0;  ///< relative, Gaussian and Dirac kinds
  double statistic = 0.0;      ///< energy statistic, empirical kind
  double p_value = 1.0;
  bool passed = true;
  std::string note;
};

struct VerificationReport {
  SolutionKind kind = SolutionKind::gaussian_closed_form;
  std::vector<VerificationEntry> entries;
  bool passed = true;
  double max_residual = 0.0;
  double min_p_value = 1.0;
  double residual_tol = 0.0;
  double alpha = 0.0;
  std::vector<std::int64_t> flagged;
};

/// Marginals λ_k on [k_min, k_max] of a solution.
struct SolutionFamily {
  SolutionKind kind = SolutionKind::gaussian_closed_form;
  int dim = 0;
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
  std::vector<MeasureRepr> marginals;
  /// v of the member λ_k ∗ δ_{φ^k v}; zero for the fundamental solution.
  Eigen::VectorXd shift;
  std::int64_t truncation = 0;  ///< empirical kind
  bool certified = true;
  int horizon = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::vector<VerificationEntry> residuals;

  const MeasureRepr& at(std::int64_t k) const;
};

/// Builds the fundamental solution on [k_min, k_max]. Requires an existence
/// certificate unless opts.force is set; `report` may carry one computed
/// earlier with the same options.
SolutionFamily solve_fundamental(const NoiseProcess& process, const LinearMap& map,
                                 std::int64_t k_min, std::int64_t k_max,
                                 const SolverOptions& opts = {},
                                 const ExistenceReport* report = nullptr);

/// The member {λ_k ∗ δ_{φ^k v}} of the extremal family.
SolutionFamily extremal_family(const SolutionFamily& base, const Eigen::VectorXd& v,
                               const LinearMap& map);

VerificationReport verify_solution(const SolutionFamily& family, const NoiseProcess& process,
                                   const LinearMap& map, const SolverOptions& opts = {});

struct DecayReport {
  std::int64_t k = 0;
  int n_max = 0;
  std::vector<double> cov_norms;       ///< ‖φ^n B_{k−n} (φ^n)^T‖_F
  std::vector<double> mean_norms;      ///< ‖φ^n b_{k−n}‖
  std::vector<double> quantile_norms;  ///< median ‖φ^n (S − mean)‖, empirical kind
  double rate = 0.0;
  bool decays = false;
  std::string reason;
};

/// Decay of φ^n(λ_{k−n}) at k = k_max for n ≤ n_max.
DecayReport strong_decomposability_check(const SolutionFamily& family, const LinearMap& map,
                                         int n_max);

}  // namespace decomp
