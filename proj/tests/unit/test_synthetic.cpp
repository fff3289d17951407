#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "fsdc/statistics.hpp"
#include "fsdc/synthetic.hpp"
#include "fsdc/transform.hpp"
#include "test_util.hpp"

namespace fsdc {
namespace {

using testing::error_kind_of;

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Closed forms for z ~ N(m, s^2).
double folded_mean(double m, double s) {
  return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2 * s * s)) + m * (1 - 2 * phi(-m / s));
}

TEST(Synthetic, FoldedMomentsMatchClosedForms) {
  for (auto [m, s] : {std::pair{1.0, 0.5}, {0.1, 0.7}, {0.0, 1.0}, {2.5, 0.3}}) {
    const auto p1 = folded_power_moments(m, s, 1.0);
    const double e1 = folded_mean(m, s);
    EXPECT_NEAR(p1.mean, e1, 1e-9);
    EXPECT_NEAR(p1.variance, m * m + s * s - e1 * e1, 1e-9);

    const auto p2 = folded_power_moments(m, s, 2.0);
    EXPECT_NEAR(p2.mean, m * m + s * s, 1e-9);
    EXPECT_NEAR(p2.variance, 4 * m * m * s * s + 2 * s * s * s * s, 1e-9);
  }
}

TEST(Synthetic, DeterministicForSeed) {
  SyntheticSpec spec;
  spec.samples_per_class = 20;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  ASSERT_EQ(a.dataset.size(), b.dataset.size());
  for (std::size_t i = 0; i < a.dataset.size(); ++i) {
    EXPECT_EQ(a.dataset.records()[i].values, b.dataset.records()[i].values);
    EXPECT_EQ(a.dataset.records()[i].class_id, b.dataset.records()[i].class_id);
  }
  spec.seed += 1;
  const auto c = generate_synthetic(spec);
  EXPECT_NE(a.dataset.records()[0].values, c.dataset.records()[0].values);
}

TEST(Synthetic, SplitRolesFollowGroups) {
  SyntheticSpec spec;
  spec.samples_per_class = 3;
  spec.val_per_group = 1;
  const auto data = generate_synthetic(spec);
  EXPECT_EQ(data.split.novel_classes, (std::set<ClassId>{4, 9, 14, 19, 24}));
  EXPECT_EQ(data.split.val_classes, (std::set<ClassId>{3, 8, 13, 18, 23}));
  EXPECT_EQ(data.split.base_classes.size(), 15u);
  EXPECT_TRUE(data.dataset.nonneg());
  for (const auto& t : data.truth) {
    EXPECT_EQ(t.power, t.role == SplitRole::base ? 1.0 : spec.skew_power);
    EXPECT_EQ(t.group, t.class_id / 5);
  }
}

TEST(Synthetic, RejectsInvalidSpecs) {
  SyntheticSpec spec;
  spec.dim = 1;
  EXPECT_EQ(error_kind_of([&] { generate_synthetic(spec); }), ErrorKind::spec);
  spec = {};
  spec.skew_power = 0.5;
  EXPECT_EQ(error_kind_of([&] { spec.validate(); }), ErrorKind::spec);
  spec = {};
  spec.num_classes = 4;
  spec.class_similarity_groups = {{0, 1}, {2}};
  EXPECT_EQ(error_kind_of([&] { spec.validate(); }), ErrorKind::spec);
  spec.class_similarity_groups = {{0, 1}, {1, 2, 3}};
  EXPECT_EQ(error_kind_of([&] { spec.validate(); }), ErrorKind::spec);
  spec.class_similarity_groups = {{0, 3}, {1, 2}};
  EXPECT_NO_THROW(spec.validate());
}

// With no common level and no group bumps the latent means are near zero, so
// the novel marginals are close to squared folded normals (skewness near
// sqrt(8)).
TEST(Synthetic, SkewedMarginalsOnNovelClass) {
  SyntheticSpec spec;
  spec.samples_per_class = 10000;
  spec.num_classes = 5;
  spec.level = 0.0;
  spec.group_spread = 0.0;
  const auto data = generate_synthetic(spec);
  ASSERT_EQ(data.split.novel_classes, (std::set<ClassId>{4}));
  const RowMatrix x = data.dataset.class_rows(4);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Vector col = x.col(j);
    EXPECT_GT(sample_skewness({col.data(), static_cast<std::size_t>(col.size())}), 0.5) << "dim " << j;
  }
}

// Default settings offset the latent means, which shrinks the skew but keeps
// every novel marginal right-skewed.
TEST(Synthetic, DefaultNovelMarginalsAreRightSkewed) {
  SyntheticSpec spec;
  spec.samples_per_class = 10000;
  const auto data = generate_synthetic(spec);
  for (ClassId id : data.split.novel_classes) {
    const RowMatrix x = data.dataset.class_rows(id);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Vector col = x.col(j);
      EXPECT_GT(sample_skewness({col.data(), static_cast<std::size_t>(col.size())}), 0.0)
          << "class " << id << " dim " << j;
    }
  }
}

TEST(Synthetic, GroundTruthMatchesEmpiricalMoments) {
  SyntheticSpec spec;
  spec.samples_per_class = 4000;
  spec.num_classes = 10;
  const auto data = generate_synthetic(spec);
  for (const auto& t : data.truth) {
    const RowMatrix x = data.dataset.class_rows(t.class_id);
    const Vector m = class_mean(x);
    const Matrix c = class_covariance(x, m);
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      const double se = std::sqrt(t.variance(j) / 4000.0);
      EXPECT_NEAR(m(j), t.mean(j), 5 * se + 1e-6) << "class " << t.class_id << " dim " << j;
      EXPECT_NEAR(c(j, j), t.variance(j), 0.15 * t.variance(j));
    }
  }
}

TEST(Synthetic, SameGroupMeansAreCosineClose) {
  const auto data = generate_synthetic(SyntheticSpec{});
  const BaseStatsTable table = build_base_stats(data.dataset, data.split);
  double min_same = 1.0;
  for (const auto& a : table.entries()) {
    for (const auto& b : table.entries()) {
      if (a.class_id < b.class_id && a.class_id / 5 == b.class_id / 5) {
        min_same = std::min(min_same, class_similarity(a, b).mean_sim);
      }
    }
  }
  EXPECT_GT(min_same, 0.9);
}

// Every class sits closer to its own group's center than to any other
// group's center, in the latent space.
TEST(Synthetic, ClassesNearestOwnGroupCenter) {
  const auto data = generate_synthetic(SyntheticSpec{});
  std::map<std::size_t, std::pair<Vector, int>> centers;
  for (const auto& t : data.truth) {
    auto& [sum, n] = centers[t.group];
    if (n == 0) sum = Vector::Zero(t.latent_mean.size());
    sum += t.latent_mean;
    ++n;
  }
  for (const auto& t : data.truth) {
    std::size_t nearest = 0;
    double best = 1e300;
    for (const auto& [group, c] : centers) {
      const double dist = (t.latent_mean - c.first / c.second).norm();
      if (dist < best) {
        best = dist;
        nearest = group;
      }
    }
    EXPECT_EQ(nearest, t.group) << "class " << t.class_id;
  }
}

TEST(Synthetic, GroundTruthJsonHasEveryClass) {
  SyntheticSpec spec;
  spec.samples_per_class = 2;
  const auto data = generate_synthetic(spec);
  const auto j = ground_truth_to_json(spec, data.truth);
  ASSERT_EQ(j["classes"].size(), 25u);
  EXPECT_EQ(j["classes"][4]["role"], "novel");
  EXPECT_EQ(j["classes"][4]["mean"].size(), 16u);
  EXPECT_EQ(j["groups"].size(), 5u);
}

}  // namespace
}  // namespace fsdc
