#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "decomp/error.hpp"
#include "decomp/mc.hpp"
#include "decomp/noise_model.hpp"
#include "decomp/spectral.hpp"
#include "test_support.hpp"

using namespace decomp;
using decomp::testing::column_moments;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

NoiseModel unit_box() { return NoiseModel::uniform_box(vec({0.0}), vec({1.0})); }

template <class T>
const T& as(const NoiseModel& m) {
  return std::get<T>(m.node().value);
}

// E log(|X| + 1) for X ~ N(0, 1), by adaptive quadrature.
double gaussian_log_moment_oracle() {
  using boost::math::quadrature::gauss_kronrod;
  const auto f = [](double x) {
    return std::log(x + 1.0) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  };
  return 2.0 * gauss_kronrod<double, 61>::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-14);
}

}  // namespace

// --- construction and validation ---------------------------------------------

TEST(NoiseModel, ValidatesParameters) {
  EXPECT_THROW(NoiseModel::gaussian(vec({0.0, 0.0}), Eigen::Matrix2d{{1.0, 0.0}, {0.0, -1.0}}), InputError);
  EXPECT_THROW(NoiseModel::gaussian(vec({0.0, 0.0}), Eigen::Matrix2d{{1.0, 0.5}, {0.0, 1.0}}), InputError);
  EXPECT_THROW(NoiseModel::uniform_box(vec({1.0}), vec({0.0})), InputError);
  EXPECT_THROW(NoiseModel::mixture({0.5, 0.4}, {NoiseModel::dirac(vec({0.0})), NoiseModel::dirac(vec({1.0}))}),
               InputError);
  EXPECT_THROW(NoiseModel::mixture({1.5, -0.5}, {NoiseModel::dirac(vec({0.0})), NoiseModel::dirac(vec({1.0}))}),
               InputError);
  EXPECT_THROW(NoiseModel::mixture({0.5, 0.5}, {NoiseModel::dirac(vec({0.0})), NoiseModel::dirac(vec({1.0, 2.0}))}),
               InputError);
  EXPECT_THROW(NoiseModel::sample_cloud(Eigen::MatrixXd(0, 2)), InputError);
  EXPECT_THROW(NoiseModel::dirac(vec({std::nan("")})), InputError);
}

TEST(NoiseModel, AcceptsNearlyPsdCovariance) {
  EXPECT_NO_THROW(NoiseModel::gaussian(vec({0.0}), m1(-1e-12)));
}

// --- pushforward -------------------------------------------------------------

TEST(Pushforward, DiracUnderDiagonal) {
  const NoiseModel m = pushforward(NoiseModel::dirac(vec({1.0, 2.0})), LinearMap::diagonal(vec({0.5, 2.0})));
  ASSERT_TRUE(m.is_dirac());
  EXPECT_EQ(as<Dirac>(m).point, vec({0.5, 4.0}));
}

TEST(Pushforward, StandardGaussianImage) {
  const Eigen::Matrix2d phi{{1.0, 2.0}, {-0.5, 3.0}};
  const NoiseModel m = pushforward(NoiseModel::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                   LinearMap(phi));
  ASSERT_TRUE(m.is_gaussian());
  EXPECT_LE((as<Gaussian>(m).cov - phi * phi.transpose()).norm(), 1e-14);
  EXPECT_EQ(as<Gaussian>(m).mean.norm(), 0.0);
}

TEST(Pushforward, BoxUnderScalarStaysBox) {
  const NoiseModel m = pushforward(unit_box(), LinearMap::scalar(1, 0.5));
  const auto& box = as<UniformBox>(m);
  EXPECT_EQ(box.lo(0), 0.0);
  EXPECT_EQ(box.hi(0), 0.5);
  const auto mom = column_moments(sample(m, 100000, 17));
  EXPECT_LE(std::abs(mom.var - 0.25 / 12.0), 3.0 * mom.var_se);
}

TEST(Pushforward, NegativeScaleFlipsBox) {
  const NoiseModel m = pushforward(unit_box(), LinearMap::scalar(1, -2.0));
  const auto& box = as<UniformBox>(m);
  EXPECT_EQ(box.lo(0), -2.0);
  EXPECT_EQ(box.hi(0), 0.0);
}

TEST(Pushforward, NonDiagonalBoxIsWrappedAndComposes) {
  const NoiseModel box = NoiseModel::uniform_box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  const LinearMap a(Eigen::Matrix2d{{1.0, 1.0}, {0.0, 1.0}});
  const LinearMap b(Eigen::Matrix2d{{0.5, 0.0}, {2.0, 1.0}});
  const NoiseModel once = pushforward(box, a);
  EXPECT_TRUE(std::holds_alternative<Pushforward>(once.node().value));
  const NoiseModel twice = pushforward(once, b);
  const NoiseModel direct = pushforward(box, b.compose(a));
  EXPECT_TRUE(same_structure(twice, direct));
}

TEST(Pushforward, CompositionInDistribution) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::Matrix2d a, b;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        a(i, j) = g(rng);
        b(i, j) = g(rng);
      }
    const NoiseModel base = NoiseModel::mixture(
        {0.3, 0.7}, {NoiseModel::uniform_box(vec({0.0, -1.0}), vec({1.0, 1.0})),
                     NoiseModel::gaussian(vec({2.0, 0.0}), Eigen::MatrixXd::Identity(2, 2))});
    const NoiseModel lhs = pushforward(pushforward(base, LinearMap(a)), LinearMap(b));
    const Eigen::MatrixXd direct = sample(base, 600, 100 + trial) * (b * a).transpose();
    const TwoSampleResult t = energy_distance_test(sample(lhs, 600, 200 + trial), direct, 300, trial);
    EXPECT_GT(t.p_value, 0.01);
  }
}

TEST(Pushforward, DimensionMismatch) {
  EXPECT_THROW(pushforward(unit_box(), LinearMap::identity(2)), InputError);
}

// --- convolve ------------------------------------------------------------------

TEST(Convolve, GaussianAdditivity) {
  const NoiseModel c = convolve(NoiseModel::gaussian(vec({0.0}), m1(1.0)), NoiseModel::gaussian(vec({1.0}), m1(2.0)));
  ASSERT_TRUE(c.is_gaussian());
  EXPECT_EQ(as<Gaussian>(c).mean(0), 1.0);
  EXPECT_EQ(as<Gaussian>(c).cov(0, 0), 3.0);
}

TEST(Convolve, DiracsAdd) {
  const NoiseModel c = convolve(NoiseModel::dirac(vec({1.0, 2.0})), NoiseModel::dirac(vec({-3.0, 0.5})));
  ASSERT_TRUE(c.is_dirac());
  EXPECT_EQ(as<Dirac>(c).point, vec({-2.0, 2.5}));
}

TEST(Convolve, DiracShiftsBox) {
  const NoiseModel c = convolve(NoiseModel::dirac(vec({2.0})), unit_box());
  const auto& box = as<UniformBox>(c);
  EXPECT_EQ(box.lo(0), 2.0);
  EXPECT_EQ(box.hi(0), 3.0);
}

TEST(Convolve, SumOfUniformsMoments) {
  const NoiseModel c = convolve(unit_box(), unit_box());
  const auto mom = column_moments(sample(c, 100000, 5));
  EXPECT_LE(std::abs(mom.mean - 1.0), 3.0 * mom.mean_se);
  EXPECT_LE(std::abs(mom.var - 1.0 / 6.0), 3.0 * mom.var_se);
  EXPECT_NEAR(mean(c)(0), 1.0, 1e-15);
  EXPECT_NEAR(covariance(c)(0, 0), 1.0 / 6.0, 1e-15);
}

TEST(Convolve, CommutativeAndAssociativeInDistribution) {
  const NoiseModel a = unit_box();
  const NoiseModel b = NoiseModel::gaussian(vec({1.0}), m1(0.5));
  const NoiseModel c = NoiseModel::mixture({0.5, 0.5}, {NoiseModel::dirac(vec({-1.0})), NoiseModel::dirac(vec({2.0}))});
  const int n = 2000;
  EXPECT_GT(energy_distance_test(sample(convolve(a, b), n, 1), sample(convolve(b, a), n, 2), 300, 3).p_value, 0.01);
  EXPECT_GT(energy_distance_test(sample(convolve(convolve(a, b), c), n, 4),
                                 sample(convolve(a, convolve(b, c)), n, 5), 300, 6)
                .p_value,
            0.01);
}

// --- symmetrize ----------------------------------------------------------------

TEST(Symmetrize, Dirac) {
  const NoiseModel s = symmetrize(NoiseModel::dirac(vec({3.0})));
  ASSERT_TRUE(s.is_dirac());
  EXPECT_EQ(as<Dirac>(s).point(0), 0.0);
}

TEST(Symmetrize, GaussianVarianceDoubles) {
  const NoiseModel s = symmetrize(NoiseModel::gaussian(vec({5.0}), m1(1.0)));
  ASSERT_TRUE(s.is_gaussian());
  EXPECT_EQ(as<Gaussian>(s).mean(0), 0.0);
  EXPECT_EQ(as<Gaussian>(s).cov(0, 0), 2.0);
}

TEST(Symmetrize, UniformBecomesSymmetricTriangle) {
  const NoiseModel s = symmetrize(unit_box());
  const Eigen::MatrixXd x = sample(s, 100000, 8);
  const auto mom = column_moments(x);
  EXPECT_LE(std::abs(mom.skew), 3.0 * mom.skew_se);
  EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NEAR(mean(s)(0), 0.0, 1e-15);
  EXPECT_GT(energy_distance_test(x.topRows(2000), -sample(s, 2000, 9), 300, 10).p_value, 0.01);
}

// --- log moment ----------------------------------------------------------------

TEST(LogMoment, DiracClosedForm) {
  const LogMomentReport zero = log_moment(NoiseModel::dirac(vec({0.0})), 10, 0);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(zero.method, MomentMethod::closed_form);
  const LogMomentReport r = log_moment(NoiseModel::dirac(vec({3.0, 4.0})), 10, 0);
  EXPECT_DOUBLE_EQ(r.value, std::log(6.0));
}

TEST(LogMoment, UniformByQuadrature) {
  const LogMomentReport r = log_moment(unit_box(), 1, 0);
  EXPECT_EQ(r.method, MomentMethod::quadrature);
  EXPECT_NEAR(r.value, 2.0 * std::log(2.0) - 1.0, 1e-9);
  EXPECT_EQ(r.std_error, 0.0);
}

TEST(LogMoment, GaussianMonteCarloMatchesQuadrature) {
  const LogMomentReport r = log_moment(NoiseModel::gaussian(vec({0.0}), m1(1.0)), 1000000, 42);
  EXPECT_EQ(r.method, MomentMethod::monte_carlo);
  EXPECT_GT(r.std_error, 0.0);
  EXPECT_FALSE(r.infinite);
  EXPECT_LE(std::abs(r.value - gaussian_log_moment_oracle()), 3.0 * r.std_error);
}

TEST(LogMoment, Subadditive) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 5; ++trial) {
    const NoiseModel a = NoiseModel::uniform_box(vec({u(rng)}), vec({5.0}));
    const double s = u(rng);
    const NoiseModel b = NoiseModel::gaussian(vec({u(rng)}), m1(1.0 + s * s));
    const LogMomentReport ra = log_moment(a, 50000, 1 + trial);
    const LogMomentReport rb = log_moment(b, 50000, 2 + trial);
    const LogMomentReport rc = log_moment(convolve(a, b), 50000, 3 + trial);
    const double se = std::sqrt(ra.std_error * ra.std_error + rb.std_error * rb.std_error + rc.std_error * rc.std_error);
    EXPECT_LE(rc.value, ra.value + rb.value + 3.0 * se);
  }
}

TEST(LogMoment, BoundedSupportIsFinite) {
  const NoiseModel m = NoiseModel::uniform_box(vec({-1.0, 0.0}), vec({1.0, 2.0}));
  const LogMomentReport r = log_moment(m, 20000, 5);
  EXPECT_FALSE(r.infinite);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_GT(r.std_error, 0.0);
}

// --- support_coset -----------------------------------------------------------

class CosetTest : public ::testing::Test {
 protected:
  ContractionSplit split = contraction_split(LinearMap::diagonal(vec({0.5, 2.0})));
};

TEST_F(CosetTest, AxisAlignedGaussian) {
  const CosetResult r = support_coset(NoiseModel::gaussian(vec({1.0, 3.0}), Eigen::Matrix2d{{1.0, 0.0}, {0.0, 0.0}}), split);
  EXPECT_TRUE(r.in_coset);
  EXPECT_LE((r.offset - vec({0.0, 3.0})).norm(), 1e-12);
}

TEST_F(CosetTest, CovarianceLeaksIntoExpandingAxis) {
  EXPECT_FALSE(support_coset(NoiseModel::gaussian(vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2)), split).in_coset);
}

TEST_F(CosetTest, MixtureOfDiracsSharingComplement) {
  const NoiseModel m = NoiseModel::mixture({0.5, 0.5}, {NoiseModel::dirac(vec({1.0, 3.0})), NoiseModel::dirac(vec({-2.0, 3.0}))});
  const CosetResult r = support_coset(m, split);
  EXPECT_TRUE(r.in_coset);
  // Oracle: complement projection of each component.
  const Eigen::Matrix2d q = Eigen::Matrix2d::Identity() - split.projector;
  EXPECT_LE((r.offset - q * vec({1.0, 3.0})).norm(), 1e-12);
  EXPECT_LE((r.offset - q * vec({-2.0, 3.0})).norm(), 1e-12);
}

TEST_F(CosetTest, MixtureWithDifferentOffsetsFails) {
  const NoiseModel m = NoiseModel::mixture({0.5, 0.5}, {NoiseModel::dirac(vec({1.0, 3.0})), NoiseModel::dirac(vec({1.0, 4.0}))});
  EXPECT_FALSE(support_coset(m, split).in_coset);
}

TEST_F(CosetTest, BoxAxesAndClouds) {
  EXPECT_TRUE(support_coset(NoiseModel::uniform_box(vec({0.0, 2.0}), vec({1.0, 2.0})), split).in_coset);
  EXPECT_FALSE(support_coset(NoiseModel::uniform_box(vec({0.0, 2.0}), vec({1.0, 2.5})), split).in_coset);
  Eigen::MatrixXd pts(3, 2);
  pts << 0.0, 1.0, 5.0, 1.0, -2.0, 1.0;
  EXPECT_TRUE(support_coset(NoiseModel::sample_cloud(pts), split).in_coset);
  pts(1, 1) = 1.5;
  EXPECT_FALSE(support_coset(NoiseModel::sample_cloud(pts), split).in_coset);
}

TEST_F(CosetTest, ShiftEquivariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  const std::vector<NoiseModel> models = {
      NoiseModel::gaussian(vec({1.0, 3.0}), Eigen::Matrix2d{{1.0, 0.0}, {0.0, 0.0}}),
      NoiseModel::uniform_box(vec({0.0, 2.0}), vec({1.0, 2.0})),
      NoiseModel::mixture({0.5, 0.5}, {NoiseModel::dirac(vec({1.0, 3.0})), NoiseModel::dirac(vec({-2.0, 3.0}))})};
  for (const auto& m : models) {
    const CosetResult base = support_coset(m, split);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd w = vec({g(rng), g(rng)});
      const CosetResult shifted = support_coset(NoiseModel::shifted(m, w), split);
      ASSERT_TRUE(shifted.in_coset);
      EXPECT_LE((shifted.offset - base.offset - split.complement_part(w)).norm(), 1e-10);
    }
  }
}

TEST_F(CosetTest, LinearImageOfBox) {
  // A shear keeps the image of a segment on the contracting axis inside it.
  const NoiseModel seg = NoiseModel::uniform_box(vec({0.0, 1.0}), vec({1.0, 1.0}));
  const LinearMap shear(Eigen::Matrix2d{{1.0, 3.0}, {0.0, 1.0}});
  EXPECT_TRUE(support_coset(pushforward(seg, shear), split).in_coset);
  const LinearMap tilt(Eigen::Matrix2d{{1.0, 0.0}, {1.0, 1.0}});
  EXPECT_FALSE(support_coset(pushforward(seg, tilt), split).in_coset);
}

// --- sample ------------------------------------------------------------------

TEST(Sample, DiracCopies) {
  const Eigen::MatrixXd x = sample(NoiseModel::dirac(vec({1.0, -2.0})), 7, 3);
  ASSERT_EQ(x.rows(), 7);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(x.row(i), vec({1.0, -2.0}).transpose());
}

TEST(Sample, GaussianMeanClt) {
  const int n = 100000;
  const Eigen::MatrixXd x = sample(NoiseModel::gaussian(vec({0.0}), m1(1.0)), n, 2024);
  EXPECT_LE(std::abs(x.mean()), 3.0 / std::sqrt(n));
}

TEST(Sample, Deterministic) {
  const NoiseModel m = NoiseModel::mixture(
      {0.2, 0.8}, {NoiseModel::gaussian(vec({0.0, 1.0}), Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}}),
                   NoiseModel::uniform_box(vec({0.0, 0.0}), vec({1.0, 3.0}))});
  EXPECT_EQ(sample(m, 500, 99), sample(m, 500, 99));
  EXPECT_NE(sample(m, 500, 99), sample(m, 500, 100));
  EXPECT_THROW(sample(m, 0, 1), InputError);
}

TEST(Sample, MixtureMoments) {
  const NoiseModel m = NoiseModel::mixture({0.25, 0.75}, {NoiseModel::dirac(vec({0.0})), unit_box()});
  const auto mom = column_moments(sample(m, 100000, 4));
  // Oracle: E = 0.75·0.5; E X² = 0.75/3.
  const double mu = 0.375;
  const double var = 0.25 - mu * mu;
  EXPECT_LE(std::abs(mom.mean - mu), 3.0 * mom.mean_se);
  EXPECT_LE(std::abs(mom.var - var), 3.0 * mom.var_se);
  EXPECT_NEAR(mean(m)(0), mu, 1e-15);
  EXPECT_NEAR(covariance(m)(0, 0), var, 1e-15);
}

TEST(SupportBound, BoxAndGaussian) {
  EXPECT_NEAR(*support_bound(NoiseModel::uniform_box(vec({-1.0, 0.0}), vec({2.0, 2.0}))), std::sqrt(8.0), 1e-15);
  EXPECT_FALSE(support_bound(NoiseModel::gaussian(vec({0.0}), m1(1.0))).has_value());
  EXPECT_NEAR(*centered_support_radius(unit_box()), 0.5, 1e-15);
}
