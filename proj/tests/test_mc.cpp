#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "decomp/error.hpp"
#include "decomp/mc.hpp"
#include "test_support.hpp"

using namespace decomp;
using decomp::testing::column_moments;

namespace {

Eigen::VectorXd one(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd m1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

NoiseModel std_normal() { return NoiseModel::gaussian(one(0.0), m1(1.0)); }

NoiseProcess stationary(const NoiseModel& m) { return NoiseProcess(m.dim(), {}, StationaryTail{m}); }

Eigen::MatrixXd normal_cloud(double mu, std::int64_t n, std::uint64_t seed) {
  return sample(NoiseModel::gaussian(one(mu), m1(1.0)), n, seed);
}

}  // namespace

// --- simulate_paths --------------------------------------------------------------

TEST(SimulatePaths, ResidualAndShape) {
  const NoiseModel noise = NoiseModel::gaussian(Eigen::Vector2d(1.0, -1.0), Eigen::Matrix2d{{1.0, 0.3}, {0.3, 0.5}});
  const LinearMap map(Eigen::Matrix2d{{0.5, 0.2}, {-0.1, 0.9}});
  const PathEnsemble e = simulate_paths(stationary(noise), map, DiracRepr{Eigen::Vector2d(3.0, 3.0)}, -4, 6, 200, 11);
  EXPECT_EQ(e.states.size(), 11u);
  EXPECT_EQ(e.noise.size(), 10u);
  EXPECT_EQ(e.dim(), 2);
  EXPECT_EQ(e.marginal(-4).rows(), 200);
  EXPECT_LE(e.max_residual(map), 1e-12);
  for (Eigen::Index i = 0; i < 200; ++i) EXPECT_EQ(e.marginal(-4).row(i), Eigen::RowVector2d(3.0, 3.0));
}

TEST(SimulatePaths, DiracProcessMatchesShiftRecursion) {
  std::map<std::int64_t, NoiseModel> window;
  for (int k = -3; k <= 5; ++k) window.emplace(k, NoiseModel::dirac(one(0.5 * k - 1.0)));
  const NoiseProcess proc(1, window, ZeroTail{});
  const LinearMap map = LinearMap::scalar(1, -1.5);
  const PathEnsemble e = simulate_paths(proc, map, DiracRepr{one(2.0)}, -3, 8, 3, 1);
  const ShiftSequence s = solve_shift_recursion(
      [&](std::int64_t k) { return std::get<Dirac>(proc.model_at(k).node().value).point; }, map, one(2.0), -3, 8, -3);
  for (std::int64_t k = -3; k <= 8; ++k)
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.marginal(k)(i, 0), s.at(k)(0), 1e-12 * (1.0 + std::abs(s.at(k)(0))));
}

TEST(SimulatePaths, StationaryStartStaysStationary) {
  // Oracle: 1 / (1 − 0.25).
  const PathEnsemble e = simulate_paths(stationary(std_normal()), LinearMap::scalar(1, 0.5),
                                        GaussianRepr{one(0.0), m1(4.0 / 3.0)}, 0, 10, 2000, 21);
  const Eigen::MatrixXd ref = sample(NoiseModel::gaussian(one(0.0), m1(4.0 / 3.0)), 2000, 22);
  EXPECT_GT(energy_distance_test(e.marginal(10), ref, 500, 23).p_value, 0.01);
}

TEST(SimulatePaths, ContractionForgetsInitialLaw) {
  // 0.5^k · 50 falls below 1e-6 after 26 steps.
  const PathEnsemble e = simulate_paths(stationary(std_normal()), LinearMap::scalar(1, 0.5), DiracRepr{one(50.0)}, 0, 30,
                                        2000, 31);
  const Eigen::MatrixXd ref = sample(NoiseModel::gaussian(one(0.0), m1(4.0 / 3.0)), 2000, 32);
  EXPECT_GT(energy_distance_test(e.marginal(30), ref, 500, 33).p_value, 0.01);
}

TEST(SimulatePaths, Deterministic) {
  const auto run = [](std::uint64_t seed) {
    return simulate_paths(stationary(NoiseModel::uniform_box(one(0.0), one(1.0))), LinearMap::scalar(1, 0.7),
                          GaussianRepr{one(0.0), m1(1.0)}, -2, 4, 50, seed);
  };
  const PathEnsemble a = run(5), b = run(5), c = run(6);
  for (std::int64_t k = -2; k <= 4; ++k) {
    EXPECT_EQ(a.marginal(k), b.marginal(k));
    EXPECT_NE(a.marginal(k), c.marginal(k));
  }
  EXPECT_EQ(paths_csv(a), paths_csv(b));
}

TEST(SimulatePaths, RejectsBadArguments) {
  const NoiseProcess proc = stationary(std_normal());
  EXPECT_THROW(simulate_paths(proc, LinearMap::scalar(1, 0.5), DiracRepr{one(0.0)}, 3, 3, 10, 0), InputError);
  EXPECT_THROW(simulate_paths(proc, LinearMap::scalar(1, 0.5), DiracRepr{one(0.0)}, 0, 3, 0, 0), InputError);
  EXPECT_THROW(simulate_paths(proc, LinearMap::scalar(2, 0.5), DiracRepr{one(0.0)}, 0, 3, 10, 0), InputError);
}

// --- backward_partial_sample ----------------------------------------------------

class BackwardUniform : public ::testing::Test {
 protected:
  NoiseModel box = NoiseModel::uniform_box(one(0.0), one(1.0));
  NoiseProcess proc = stationary(box);
  LinearMap map = LinearMap::scalar(1, 0.5);
};

TEST_F(BackwardUniform, ZeroTruncationIsTheNoise) {
  const EmpiricalRepr r = backward_partial_sample(proc, map, 3, 0, 2000, 1);
  EXPECT_EQ(r.truncation, 0);
  EXPECT_GE(r.samples.minCoeff(), 0.0);
  EXPECT_LE(r.samples.maxCoeff(), 1.0);
  EXPECT_GT(energy_distance_test(r.samples, sample(box, 2000, 2), 500, 3).p_value, 0.01);
}

TEST_F(BackwardUniform, TruncatedVariance) {
  const EmpiricalRepr r = backward_partial_sample(proc, map, 0, 30, 100000, 4);
  double series = 0.0;
  for (int i = 0; i <= 30; ++i) series += std::pow(0.25, i);
  const auto mom = column_moments(r.samples);
  EXPECT_LE(std::abs(mom.var - series / 12.0), 3.0 * mom.var_se);
  EXPECT_LE(std::abs(mom.mean - 1.0), 3.0 * mom.mean_se);
}

TEST_F(BackwardUniform, DoublingTruncationNotRejected) {
  const EmpiricalRepr a = backward_partial_sample(proc, map, 0, 30, 2000, 5);
  const EmpiricalRepr b = backward_partial_sample(proc, map, 0, 60, 2000, 6);
  EXPECT_GT(energy_distance_test(a.samples, b.samples, 500, 7).p_value, 0.01);
}

TEST_F(BackwardUniform, MatchesForwardPathsFromZero) {
  const std::int64_t k = 4, n_trunc = 6;
  const EmpiricalRepr back = backward_partial_sample(proc, map, k, n_trunc, 2000, 8);
  const PathEnsemble fwd = simulate_paths(proc, map, DiracRepr{one(0.0)}, k - n_trunc - 1, k, 2000, 9);
  EXPECT_GT(energy_distance_test(back.samples, fwd.marginal(k), 500, 10).p_value, 0.01);
}

TEST_F(BackwardUniform, CenteringShiftsMean) {
  const EmpiricalRepr r =
      backward_partial_sample(proc, map, 0, 20, 20000, 11, [](std::int64_t) { return one(0.5); });
  const auto mom = column_moments(r.samples);
  EXPECT_LE(std::abs(mom.mean), 3.0 * mom.mean_se);
}

TEST_F(BackwardUniform, Deterministic) {
  EXPECT_EQ(backward_partial_sample(proc, map, 2, 10, 300, 12).samples,
            backward_partial_sample(proc, map, 2, 10, 300, 12).samples);
  EXPECT_THROW(backward_partial_sample(proc, map, 2, -1, 300, 12), InputError);
  EXPECT_THROW(backward_partial_sample(proc, map, 2, 3, 0, 12), InputError);
}

// --- energy test -------------------------------------------------------------------

TEST(EnergyTest, IdenticalClouds) {
  const Eigen::MatrixXd x = normal_cloud(0.0, 300, 1);
  const TwoSampleResult r = energy_distance_test(x, x, 200, 0);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(EnergyTest, Calibration) {
  int rejections = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const TwoSampleResult r = energy_distance_test(normal_cloud(0.0, 2000, 1000 + 2 * rep),
                                                   normal_cloud(0.0, 2000, 1001 + 2 * rep), 200, rep);
    if (r.p_value < 0.05) ++rejections;
  }
  EXPECT_LE(rejections, 12);
}

TEST(EnergyTest, Power) {
  const TwoSampleResult r = energy_distance_test(normal_cloud(0.0, 2000, 1), normal_cloud(1.0, 2000, 2), 1000, 3);
  EXPECT_LT(r.p_value, 0.001);
  EXPECT_GT(r.statistic, 0.0);
}

TEST(EnergyTest, StatisticMatchesDirectFormula) {
  // Oracle: V-statistic computed pair by pair in two dimensions.
  const Eigen::MatrixXd a = sample(NoiseModel::uniform_box(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)), 60, 4);
  const Eigen::MatrixXd b = sample(NoiseModel::gaussian(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity()), 70, 5);
  const auto mean_dist = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < y.rows(); ++j) s += (x.row(i) - y.row(j)).norm();
    return s / static_cast<double>(x.rows() * y.rows());
  };
  const double expect = 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
  // Pairwise distances are cached in single precision.
  EXPECT_NEAR(energy_distance_test(a, b, 200, 6).statistic, expect, 1e-6 * expect);
  // Same in one dimension, where a sorted formula is used.
  const Eigen::MatrixXd c = a.leftCols(1), e = b.leftCols(1);
  EXPECT_NEAR(energy_distance_test(c, e, 200, 6).statistic, 2.0 * mean_dist(c, e) - mean_dist(c, c) - mean_dist(e, e), 1e-12);
}

TEST(EnergyTest, Preconditions) {
  EXPECT_THROW(energy_distance_test(normal_cloud(0, 49, 1), normal_cloud(0, 100, 2), 200, 0), InputError);
  EXPECT_THROW(energy_distance_test(normal_cloud(0, 100, 1), normal_cloud(0, 100, 2), 199, 0), InputError);
}

// --- ecf_distance ------------------------------------------------------------------

TEST(EcfDistance, IdenticalIsZero) {
  const Eigen::MatrixXd x = normal_cloud(0.0, 100, 1);
  EXPECT_EQ(ecf_distance(x, x, Eigen::MatrixXd::Constant(3, 1, 0.7)), 0.0);
}

TEST(EcfDistance, PointMassesClosedForm) {
  const Eigen::Vector2d x(0.3, -1.2), t(1.5, 0.4);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::MatrixXd b = x.transpose();
  const double expect = std::abs(1.0 - std::polar(1.0, t.dot(x)));
  EXPECT_NEAR(ecf_distance(a, b, t.transpose()), expect, 1e-15);
}

TEST(EcfDistance, IndependentGaussianClouds) {
  const int n = 100000;
  Eigen::MatrixXd grid(21, 1);
  for (int i = 0; i < 21; ++i) grid(i, 0) = -2.0 + 0.2 * i;
  const double dist = ecf_distance(normal_cloud(0.0, n, 1), normal_cloud(0.0, n, 2), grid);
  EXPECT_GE(dist, 0.0);
  EXPECT_LE(dist, 8.0 / std::sqrt(n));
  EXPECT_GT(ecf_distance(normal_cloud(0.0, n, 1), normal_cloud(0.5, n, 2), grid), 0.1);
}

// --- CSV --------------------------------------------------------------------------

TEST(SamplesCsv, RoundTripIsExact) {
  Eigen::MatrixXd x = sample(NoiseModel::gaussian(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()), 50, 3);
  x(0, 0) = 1e-300;
  x(1, 1) = -0.1;
  const std::string text = samples_csv(x);
  EXPECT_EQ(text.substr(0, 9), "x0,x1,x2\n");
  EXPECT_EQ(parse_samples_csv(text), x);
}

TEST(SamplesCsv, RejectsMalformed) {
  EXPECT_THROW(parse_samples_csv("x0,x1\n1,2\n3\n"), InputError);
  EXPECT_THROW(parse_samples_csv("x0\nabc\n"), InputError);
}

TEST(PathsCsv, Layout) {
  const PathEnsemble e = simulate_paths(stationary(std_normal()), LinearMap::scalar(1, 0.5), DiracRepr{one(0.0)}, 0, 2, 2, 1);
  const std::string text = paths_csv(e);
  EXPECT_EQ(text.substr(0, 11), "path,k,x0\n0");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 3);
}
