#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "decomp/linear_map.hpp"
#include "decomp/measure_repr.hpp"
#include "decomp/process.hpp"

namespace decomp {

/// Paths of η_k = ξ_k + φ(η_{k−1}) for k_start ≤ k ≤ k_end.
struct PathEnsemble {
  std::int64_t k_start = 0;
  std::int64_t k_end = 0;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  MeasureRepr initial;
  std::vector<Eigen::MatrixXd> states;  ///< states[k − k_start], each n×d
  std::vector<Eigen::MatrixXd> noise;   ///< noise[k − k_start − 1], the drawn ξ_k

  int dim() const { return static_cast<int>(states.front().cols()); }
  const Eigen::MatrixXd& marginal(std::int64_t k) const;
  /// max ‖η_k − ξ_k − φ η_{k−1}‖ over all paths and steps.
  double max_residual(const LinearMap& map) const;
};

PathEnsemble simulate_paths(const NoiseProcess& process, const LinearMap& map,
                            const MeasureRepr& initial, std::int64_t k_start,
                            std::int64_t k_end, std::int64_t n, std::uint64_t seed);

/// n draws of S_{k,N} = Σ_{i=0}^N φ^i (ξ_{k−i} − c_{k−i}), where c is the optional
/// centering sequence (zero when empty). Draws for time j use a sub-seed of
/// (seed, j).
EmpiricalRepr backward_partial_sample(
    const NoiseProcess& process, const LinearMap& map, std::int64_t k, std::int64_t truncation,
    std::int64_t n, std::uint64_t seed,
    const std::function<Eigen::VectorXd(std::int64_t)>& centering = {});

struct TwoSampleResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  int permutations = 0;
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultPermutations = 500;

/// Energy distance 2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖ (V-statistic) with a
/// permutation p-value (1 + #{perm ≥ obs}) / (1 + permutations).
TwoSampleResult energy_distance_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     int permutations = kDefaultPermutations,
                                     std::uint64_t seed = 0);

/// sup over grid rows t of |ψ_a(t) − ψ_b(t)| for the empirical characteristic
/// functions of the two clouds.
double ecf_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const Eigen::MatrixXd& grid);

/// Sample cloud as CSV with header x0..x{d-1}.
std::string samples_csv(const Eigen::MatrixXd& samples);
Eigen::MatrixXd parse_samples_csv(const std::string& text);
/// One row per (path, k) with header path,k,x0..x{d-1}.
std::string paths_csv(const PathEnsemble& paths);

}  // namespace decomp
