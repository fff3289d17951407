#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "fsdc/sampling.hpp"
#include "fsdc/statistics.hpp"
#include "test_util.hpp"

namespace fsdc {
namespace {

using testing::error_kind_of;

CalibratedDistribution dist(const Vector& mean, const Matrix& cov) {
  CalibratedDistribution d;
  d.mean = mean;
  d.covariance = cov;
  return d;
}

TEST(Cholesky, Identity) {
  const auto f = cholesky_psd(Matrix::Identity(4, 4), 1e-6);
  EXPECT_EQ(f.lower, Matrix(Matrix::Identity(4, 4)));
  EXPECT_EQ(f.jitter, 0.0);
}

TEST(Cholesky, HandExample) {
  Matrix s(2, 2);
  s << 4, 2, 2, 3;
  const auto f = cholesky_psd(s, 1e-6);
  EXPECT_LT((f.lower * f.lower.transpose() - s).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.lower(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 1), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(f.lower(0, 1), 0.0);
}

TEST(Cholesky, RankDeficientNeedsSmallJitter) {
  Matrix s(2, 2);
  s << 1, 1, 1, 1;
  const auto f = cholesky_psd(s, 1e-6);
  EXPECT_GT(f.jitter, 0.0);
  EXPECT_LE(f.jitter, 1e-5);
  EXPECT_LT((f.lower * f.lower.transpose() - s - f.jitter * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cholesky, ElementwiseAlphaOnLowRankRepairs) {
  // Elementwise alpha on a rank-1 covariance stays singular.
  const Vector u = Vector::LinSpaced(6, 1, 2);
  Matrix s = u * u.transpose();
  s.array() += 0.21;
  const auto f = cholesky_psd(s, 1e-6);
  EXPECT_LE(f.jitter, 1e-6 * 1e6);
  EXPECT_TRUE(f.lower.allFinite());
}

TEST(Cholesky, IndefiniteBeyondCapFails) {
  Matrix s(2, 2);
  s << 1, 0, 0, -1;
  EXPECT_EQ(error_kind_of([&] { cholesky_psd(s, 1e-6); }), ErrorKind::not_factorizable);
}

TEST(Cholesky, AsymmetricRejected) {
  Matrix s(2, 2);
  s << 1, 0.5, 0.4, 1;
  EXPECT_EQ(error_kind_of([&] { cholesky_psd(s, 1e-6); }), ErrorKind::precondition);
}

TEST(Cholesky, JitterLadderPicksSmallestWorkingStep) {
  // Eigenvalue -5e-5 needs c > 5e-5: 1e-6 and 1e-5 fail, 1e-4 succeeds.
  Matrix s = Matrix::Identity(3, 3);
  s(2, 2) = -5e-5;
  EXPECT_DOUBLE_EQ(cholesky_psd(s, 1e-6).jitter, 1e-4);
}

TEST(Density, MatchesDenseInverseFormula) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix sigma = testing::random_spd(3, seed);
    const Vector mu = testing::normal_rows(1, 3, seed + 50).row(0).transpose();
    const Vector x = testing::normal_rows(1, 3, seed + 90).row(0).transpose();
    const FactoredGaussian g = factorize(dist(mu, sigma), 1e-6);
    const Vector diff = x - mu;
    const double direct = -0.5 * (diff.dot(sigma.inverse() * diff) + std::log(sigma.determinant()) +
                                  3 * std::log(2 * std::numbers::pi));
    EXPECT_NEAR(g.log_density(x), direct, 1e-8);
  }
}

TEST(Sampler, CountsAndLabels) {
  CalibratedSet set;
  set[0] = {dist(Vector::Zero(2), Matrix::Identity(2, 2))};
  for (int j = 0; j < 5; ++j) set[3].push_back(dist(Vector::Constant(2, j), Matrix::Identity(2, 2)));
  SamplerConfig cfg;
  const SampledFeatures s = sample_features(set, cfg);
  EXPECT_EQ(s.features.rows(), 1500);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 0u), 750);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 3u), 750);
  EXPECT_EQ(s.jitter_log.size(), 6u);
  // 150 per distribution for K = 5: rows 750 + 150 j .. come from distribution j.
  for (int j = 0; j < 5; ++j) {
    const RowMatrix block = s.features.middleRows(750 + 150 * j, 150);
    EXPECT_NEAR(block.col(0).mean(), j, 0.35);
  }
}

TEST(Sampler, RemainderGoesToEarliestDistributions) {
  CalibratedSet set;
  for (int j = 0; j < 3; ++j) set[1].push_back(dist(Vector::Constant(2, 100.0 * j), Matrix::Identity(2, 2) * 1e-4));
  SamplerConfig cfg;
  cfg.total_per_class = 8;  // 3, 3, 2
  const SampledFeatures s = sample_features(set, cfg);
  ASSERT_EQ(s.features.rows(), 8);
  std::vector<int> per(3, 0);
  for (Eigen::Index i = 0; i < 8; ++i) ++per[static_cast<int>(std::lround(s.features(i, 0) / 100.0))];
  EXPECT_EQ(per, (std::vector<int>{3, 3, 2}));
}

TEST(Sampler, MeanOfSmallCovariance) {
  CalibratedSet set;
  set[0] = {dist(Vector::Ones(2), Matrix::Identity(2, 2) * 0.01)};
  SamplerConfig cfg;
  cfg.total_per_class = 10000;
  const SampledFeatures s = sample_features(set, cfg);
  EXPECT_LT((class_mean(s.features) - Vector::Ones(2)).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Sampler, Deterministic) {
  CalibratedSet set;
  set[2] = {dist(Vector::Zero(3), testing::random_spd(3, 1))};
  SamplerConfig cfg;
  cfg.seed = 77;
  EXPECT_EQ(sample_features(set, cfg).features, sample_features(set, cfg).features);
  SamplerConfig other = cfg;
  other.seed = 78;
  EXPECT_NE(sample_features(set, cfg).features, sample_features(set, other).features);
}

TEST(Sampler, StreamsIndependentOfOtherLabels) {
  CalibratedSet one;
  one[4] = {dist(Vector::Zero(2), Matrix::Identity(2, 2))};
  CalibratedSet two = one;
  two[1] = {dist(Vector::Ones(2), Matrix::Identity(2, 2))};
  SamplerConfig cfg;
  cfg.total_per_class = 10;
  const RowMatrix a = sample_features(one, cfg).features;
  const RowMatrix b = sample_features(two, cfg).features.bottomRows(10);
  EXPECT_EQ(a, b);
}

TEST(Sampler, PropagatesFactorizationFailure) {
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CalibratedSet set;
  set[6] = {dist(Vector::Zero(2), bad)};
  try {
    sample_features(set, SamplerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_factorizable);
    EXPECT_NE(std::string(e.what()).find("label 6 distribution 0"), std::string::npos);
  }
}

TEST(Sampler, ConfigValidation) {
  CalibratedSet set;
  set[0] = {dist(Vector::Zero(2), Matrix::Identity(2, 2))};
  SamplerConfig cfg;
  cfg.total_per_class = 0;
  EXPECT_EQ(error_kind_of([&] { sample_features(set, cfg); }), ErrorKind::spec);
  EXPECT_EQ(error_kind_of([&] { sample_features(CalibratedSet{}, SamplerConfig{}); }), ErrorKind::precondition);
}

}  // namespace
}  // namespace fsdc
