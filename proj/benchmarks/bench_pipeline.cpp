#include <benchmark/benchmark.h>

#include "fsdc/calibration.hpp"
#include "fsdc/classifiers.hpp"
#include "fsdc/harness.hpp"
#include "fsdc/rng.hpp"
#include "fsdc/sampling.hpp"
#include "fsdc/statistics.hpp"
#include "fsdc/synthetic.hpp"

namespace {

using namespace fsdc;

RowMatrix gaussian_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

TrainSet blob_task(Eigen::Index per_class, Eigen::Index d, std::uint32_t classes) {
  TrainSet ts;
  ts.features = gaussian_rows(per_class * classes, d, 3);
  for (std::uint32_t c = 0; c < classes; ++c) {
    ts.class_map.push_back(c);
    for (Eigen::Index i = 0; i < per_class; ++i) {
      ts.features(c * per_class + i, c % d) += 2.0;
      ts.labels.push_back(c);
    }
  }
  return ts;
}

void BM_LogisticObjective(benchmark::State& state) {
  const TrainSet ts = blob_task(state.range(0), 16, 5);
  LinearModel m{Matrix::Constant(5, 16, 0.01), Vector::Zero(5), LinearKind::logistic};
  for (auto _ : state) {
    auto lg = logistic_loss(m, ts.features, ts.labels, 1e-3);
    benchmark::DoNotOptimize(lg.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_LogisticObjective)->Arg(151)->Arg(751);

void BM_TrainLogistic(benchmark::State& state) {
  const TrainSet ts = blob_task(751, 16, 5);
  OptimizerConfig cfg;
  cfg.epochs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train_logistic(ts, cfg).bias);
}
BENCHMARK(BM_TrainLogistic)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_TrainSvm(benchmark::State& state) {
  const TrainSet ts = blob_task(751, 16, 5);
  OptimizerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train_svm(ts, cfg).bias);
}
BENCHMARK(BM_TrainSvm)->Unit(benchmark::kMillisecond);

void BM_CholeskyPsd(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const RowMatrix a = gaussian_rows(d, d, 5);
  const Matrix sigma = a.transpose() * a + Matrix::Identity(d, d);
  for (auto _ : state) benchmark::DoNotOptimize(cholesky_psd(sigma, 1e-6).lower.data());
}
BENCHMARK(BM_CholeskyPsd)->Arg(16)->Arg(64)->Arg(640);

void BM_SampleFeatures(benchmark::State& state) {
  CalibratedSet dists;
  for (std::uint32_t y = 0; y < 5; ++y) {
    CalibratedDistribution cd;
    cd.mean = Vector::Constant(16, y);
    cd.covariance = Matrix::Identity(16, 16) * 0.5;
    cd.covariance.array() += 0.21;
    dists[y].push_back(cd);
  }
  SamplerConfig cfg;
  cfg.total_per_class = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_features(dists, cfg).features.data());
}
BENCHMARK(BM_SampleFeatures)->Arg(750)->Unit(benchmark::kMicrosecond);

void BM_Calibrate(benchmark::State& state) {
  SyntheticSpec spec;
  spec.num_classes = static_cast<std::uint32_t>(state.range(0));
  spec.samples_per_class = 50;
  const SyntheticData data = generate_synthetic(spec);
  const BaseStatsTable table = build_base_stats(data.dataset, data.split);
  const Vector x = data.dataset.row(0);
  CalibrationParams p;
  for (auto _ : state) benchmark::DoNotOptimize(calibrate(x, table, p).mean.data());
}
BENCHMARK(BM_Calibrate)->Arg(25)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_Episode(benchmark::State& state) {
  const SyntheticData data = generate_synthetic(SyntheticSpec{});
  const BaseStatsTable table = build_base_stats(data.dataset, data.split);
  EpisodeSpec es;
  const EpisodeSampler sampler(data.dataset, data.split, es);
  PipelineConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episode(sampler.sample(i++), table, cfg).accuracy);
}
BENCHMARK(BM_Episode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
