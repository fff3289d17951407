#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "fsdc/statistics.hpp"
#include "fsdc/synthetic.hpp"
#include "test_util.hpp"

namespace fsdc {
namespace {

using testing::error_kind_of;
using testing::TempDir;

RowMatrix rows(std::initializer_list<std::initializer_list<double>> r) {
  RowMatrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(ClassMean, Midpoint) {
  const Vector m = class_mean(rows({{0, 0}, {2, 2}}));
  EXPECT_EQ(m, Vector::Ones(2));
}

TEST(ClassMean, SingleVector) {
  const RowMatrix x = rows({{1.5, -2, 7}});
  EXPECT_EQ(class_mean(x), Vector(x.row(0).transpose()));
}

TEST(ClassMean, EmptyIsError) {
  EXPECT_EQ(error_kind_of([] { class_mean(RowMatrix(0, 3)); }), ErrorKind::empty_class);
}

TEST(ClassMean, MonteCarloTolerance) {
  Vector mu(4);
  mu << 1, -2, 0.5, 3;
  RowMatrix x = testing::normal_rows(1000, 4, 17);
  x.rowwise() += mu.transpose();
  EXPECT_LT((class_mean(x) - mu).cwiseAbs().maxCoeff(), 0.15);
}

TEST(ClassCovariance, HandComputedTwoPoints) {
  const RowMatrix x = rows({{0, 0}, {2, 2}});
  const Matrix c = class_covariance(x, class_mean(x));
  Matrix expected(2, 2);
  expected << 2, 2, 2, 2;
  EXPECT_EQ(c, expected);
}

TEST(ClassCovariance, CopiesHaveZeroCovariance) {
  const RowMatrix x = rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  EXPECT_EQ(class_covariance(x, class_mean(x)), Matrix::Zero(3, 3));
}

TEST(ClassCovariance, NeedsTwoSamples) {
  const RowMatrix x = rows({{1, 2}});
  EXPECT_EQ(error_kind_of([&] { class_covariance(x, class_mean(x)); }), ErrorKind::insufficient_samples);
}

TEST(ClassCovariance, MonteCarloFrobenius) {
  Matrix sigma(3, 3);
  sigma << 2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5;
  const Matrix l = sigma.llt().matrixL();
  const RowMatrix x = testing::normal_rows(5000, 3, 99) * l.transpose();
  const Matrix c = class_covariance(x, class_mean(x));
  EXPECT_LT((c - sigma).norm(), 0.1 * sigma.norm());
}

TEST(ClassCovariance, ExactlySymmetricAndPsd) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RowMatrix x = testing::normal_rows(7 + seed, 6, seed).array().exp();
    const Matrix c = class_covariance(x, class_mean(x));
    EXPECT_TRUE((c.array() == c.transpose().array()).all());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(c).eigenvalues().minCoeff();
    EXPECT_GE(min_eig, -1e-8 * c.trace());
  }
}

TEST(ClassCovariance, InvariantToRowOrder) {
  RowMatrix x = testing::normal_rows(30, 4, 5);
  const Matrix c = class_covariance(x, class_mean(x));
  RowMatrix y(30, 4);
  Rng rng(1);
  std::vector<Eigen::Index> order(30);
  for (Eigen::Index i = 0; i < 30; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (Eigen::Index i = 0; i < 30; ++i) y.row(i) = x.row(order[i]);
  EXPECT_LT((class_covariance(y, class_mean(y)) - c).cwiseAbs().maxCoeff(), 1e-12);
}

Dataset tiny_dataset() {
  return Dataset(2, {{{0, 0}, 0}, {{2, 2}, 0}, {{1, 0}, 1}, {{1, 4}, 1}, {{5, 5}, 2}});
}

TEST(BaseStats, BuildsOnePerBaseClass) {
  const Dataset ds = tiny_dataset();
  const BaseStatsTable t = build_base_stats(ds, {{0, 1}, {}, {2}});
  ASSERT_EQ(t.size(), 2u);
  Vector expected(2);
  expected << 1, 2;
  EXPECT_EQ(t.at(1).mean, expected);
  EXPECT_EQ(t.at(0).count, 2u);
  EXPECT_EQ(t.means().row(1), t.at(1).mean.transpose());
  EXPECT_EQ(error_kind_of([&] { t.at(2); }), ErrorKind::missing_class);
}

TEST(BaseStats, SingleBaseClass) {
  EXPECT_EQ(build_base_stats(tiny_dataset(), {{1}, {}, {}}).size(), 1u);
}

TEST(BaseStats, Errors) {
  const Dataset ds = tiny_dataset();
  EXPECT_EQ(error_kind_of([&] { build_base_stats(ds, {{0, 9}, {}, {}}); }), ErrorKind::missing_class);
  try {
    build_base_stats(ds, {{0, 2}, {}, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_samples);
    EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos);
  }
}

TEST(BaseStats, EqualsPerClassComposition) {
  SyntheticSpec spec;
  spec.samples_per_class = 30;
  const auto data = generate_synthetic(spec);
  const BaseStatsTable t = build_base_stats(data.dataset, data.split);
  for (ClassId id : data.split.base_classes) {
    const auto s = compute_class_statistics(id, data.dataset.class_rows(id));
    EXPECT_EQ(t.at(id).mean, s.mean);
    EXPECT_EQ(t.at(id).covariance, s.covariance);
  }
}

TEST(BaseStats, TransformOption) {
  const Dataset ds = tiny_dataset();
  BaseStatsOptions opts;
  opts.transform = TukeyParams{0.5};
  const BaseStatsTable t = build_base_stats(ds, {{1}, {}, {}}, opts);
  EXPECT_DOUBLE_EQ(t.at(1).mean(1), 1.0);  // mean of sqrt(0) and sqrt(4)
}

TEST(BaseStats, MeansNearGeneratorTruth) {
  SyntheticSpec spec;
  spec.samples_per_class = 2000;
  const auto data = generate_synthetic(spec);
  const BaseStatsTable t = build_base_stats(data.dataset, data.split);
  for (ClassId id : data.split.base_classes) {
    const auto& truth = data.truth[id];
    for (Eigen::Index j = 0; j < truth.mean.size(); ++j) {
      EXPECT_NEAR(t.at(id).mean(j), truth.mean(j), 5 * std::sqrt(truth.variance(j) / 2000) + 1e-6);
    }
  }
}

TEST(BaseStats, TableValidation) {
  ClassStatistics a{1, Vector::Zero(2), Matrix::Zero(2, 2), 2};
  ClassStatistics b{1, Vector::Zero(2), Matrix::Zero(2, 2), 2};
  EXPECT_EQ(error_kind_of([&] { BaseStatsTable(2, {a, b}); }), ErrorKind::data);
  ClassStatistics c{2, Vector::Zero(3), Matrix::Zero(3, 3), 2};
  EXPECT_EQ(error_kind_of([&] { BaseStatsTable(2, {a, c}); }), ErrorKind::dimension);
  // Entries come back sorted by id.
  ClassStatistics d{0, Vector::Ones(2), Matrix::Identity(2, 2), 2};
  const BaseStatsTable t(2, {a, d});
  EXPECT_EQ(t.entry(0).class_id, 0u);
  EXPECT_EQ(t.entry(1).class_id, 1u);
}

TEST(Similarity, SelfAndOrthogonal) {
  ClassStatistics a{0, Vector::Zero(2), Matrix::Identity(2, 2), 2};
  a.mean << 1, 0;
  ClassStatistics b = a;
  b.mean << 0, 3;
  const auto self = class_similarity(a, a);
  EXPECT_NEAR(self.mean_sim, 1.0, 1e-15);
  EXPECT_NEAR(self.var_sim, 1.0, 1e-15);
  const auto ortho = class_similarity(a, b);
  EXPECT_NEAR(ortho.mean_sim, 0.0, 1e-15);
  EXPECT_NEAR(ortho.var_sim, 1.0, 1e-15);
  ClassStatistics z = a;
  z.mean.setZero();
  EXPECT_EQ(error_kind_of([&] { class_similarity(a, z); }), ErrorKind::undefined_similarity);
}

// Every latent mean shares a common offset, so cosines are compared on
// average rather than pair by pair.
TEST(Similarity, SameGroupAboveCrossGroup) {
  const auto data = generate_synthetic(SyntheticSpec{});
  const BaseStatsTable t = build_base_stats(data.dataset, data.split);
  for (const auto& a : t.entries()) {
    double same = 0, cross = 0;
    int n_same = 0, n_cross = 0;
    for (const auto& b : t.entries()) {
      if (a.class_id == b.class_id) continue;
      const double s = class_similarity(a, b).mean_sim;
      if (a.class_id / 5 == b.class_id / 5) {
        same += s;
        ++n_same;
      } else {
        cross += s;
        ++n_cross;
      }
    }
    EXPECT_GT(same / n_same, cross / n_cross) << "class " << a.class_id;
  }
}

TEST(StatsFile, RoundTripAndErrors) {
  TempDir dir;
  SyntheticSpec spec;
  spec.samples_per_class = 10;
  const auto data = generate_synthetic(spec);
  const BaseStatsTable t = build_base_stats(data.dataset, data.split);
  save_base_stats(t, dir / "s.fsst");
  EXPECT_EQ(std::filesystem::file_size(dir / "s.fsst"), 16u + 20u * (4u + 8u * 16u + 8u * 256u));
  const BaseStatsTable back = load_base_stats(dir / "s.fsst");
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back.entry(i).class_id, t.entry(i).class_id);
    EXPECT_EQ(back.entry(i).mean, t.entry(i).mean);
    EXPECT_EQ(back.entry(i).covariance, t.entry(i).covariance);
  }
  std::string bytes = read_file(dir / "s.fsst");
  bytes[0] = 'X';
  write_file_atomic(dir / "bad.fsst", bytes);
  EXPECT_EQ(error_kind_of([&] { load_base_stats(dir / "bad.fsst"); }), ErrorKind::format);
  write_file_atomic(dir / "short.fsst", read_file(dir / "s.fsst").substr(0, 100));
  EXPECT_EQ(error_kind_of([&] { load_base_stats(dir / "short.fsst"); }), ErrorKind::format);
}

}  // namespace
}  // namespace fsdc
