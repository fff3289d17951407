#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fsdc/calibration.hpp"
#include "fsdc/classifiers.hpp"
#include "fsdc/features_io.hpp"
#include "fsdc/sampling.hpp"
#include "fsdc/statistics.hpp"
#include "fsdc/transform.hpp"

namespace fsdc {

struct EpisodeSpec {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t q_queries = 15;
  std::size_t num_episodes = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

// One N-way-K-shot task. Labels are task indices; classes[label] is the
// dataset class id. Features are raw (untransformed).
struct Episode {
  std::size_t index = 0;
  std::vector<ClassId> classes;
  RowMatrix support;
  std::vector<std::uint32_t> support_labels;
  RowMatrix query;
  std::vector<std::uint32_t> query_labels;
};

/// Draws episodes from the novel classes of a split. Episode i depends only
/// on (spec.seed, i). Construction checks that the spec is satisfiable.
class EpisodeSampler {
 public:
  EpisodeSampler(const Dataset& ds, const SplitManifest& split, const EpisodeSpec& spec);

  Episode sample(std::size_t index) const;

 private:
  const Dataset* ds_;
  EpisodeSpec spec_;
  std::vector<ClassId> novel_;
};

Episode sample_episode(const Dataset& ds, const SplitManifest& split, const EpisodeSpec& spec,
                       std::size_t index);

enum class ClassifierKind { logistic, svm, max_likelihood, chance };
enum class BaselineKind { none, nearest_class };

struct PipelineConfig {
  TukeyParams tukey;
  bool use_tukey = true;
  // Base statistics (and the retrieval pool) taken on transformed features.
  bool tukey_base = false;
  CalibrationParams calib;
  SamplerConfig sampler;  // total_per_class == 0 disables generation
  bool use_generation = true;
  OptimizerConfig optimizer;
  ClassifierKind classifier = ClassifierKind::logistic;
  MlAggregate ml_aggregate = MlAggregate::max;
  BaselineKind baseline = BaselineKind::none;
  std::size_t nearest_m = 1;

  void validate() const;
  bool generates() const noexcept {
    return use_generation && baseline == BaselineKind::none && sampler.total_per_class > 0;
  }
};

struct EpisodeOutcome {
  double accuracy = 0.0;
  std::size_t repaired_distributions = 0;  // factorizations that needed jitter
  double max_jitter = 0.0;
};

// Seed of the feature sampler inside episode `episode_index`.
std::uint64_t episode_sampler_seed(std::uint64_t sampler_seed, std::size_t episode_index) noexcept;

/// Runs the full task procedure on one episode and scores the query set:
/// transform support and query, calibrate every support feature against the
/// base statistics, sample features (or retrieve nearest-class features for
/// the retrieval baseline), train the configured classifier and predict.
/// `pool` is required only for the retrieval baseline.
EpisodeOutcome run_episode(const Episode& ep, const BaseStatsTable& stats, const PipelineConfig& cfg,
                           const BaseFeaturePool* pool = nullptr);

struct EvalReport {
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;  // 1.96 * stddev / sqrt(num_episodes)
  std::vector<double> per_episode_accuracies;
  PipelineConfig config;
  EpisodeSpec episode;
  std::uint64_t episode_seed_base = 0;
  std::size_t repaired_distributions = 0;
  double max_jitter = 0.0;
};

struct EvalOptions {
  std::size_t workers = 1;
  // Called after each finished episode with the running count.
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Mean accuracy with 95% confidence interval over spec.num_episodes
/// episodes. Episodes run on a bounded worker pool; results are merged by
/// episode index so the report does not depend on the worker count.
EvalReport evaluate(const Dataset& ds, const SplitManifest& split, const BaseStatsTable& stats,
                    const EpisodeSpec& spec, const PipelineConfig& cfg,
                    const EvalOptions& options = {});

// Aggregates per-episode accuracies into a report (mean, population stddev CI).
void summarize(EvalReport& report);

enum class SweepParam { lambda, num_generated, k, alpha, nearest_m };

SweepParam parse_sweep_param(const std::string& name);
const char* to_string(SweepParam p) noexcept;

// `cfg` with one hyperparameter replaced by `value`.
PipelineConfig with_param(PipelineConfig cfg, SweepParam param, double value);

struct SweepCell {
  double value;
  EvalReport report;
};

// One evaluate per value; every cell sees the same episodes.
std::vector<SweepCell> sweep(const Dataset& ds, const SplitManifest& split,
                             const BaseStatsTable& stats, SweepParam param,
                             const std::vector<double>& values, const PipelineConfig& base_cfg,
                             const EpisodeSpec& spec, const EvalOptions& options = {});

// Paired difference a - b over shared episodes: mean and 95% half-width.
struct PairedDifference {
  double mean;
  double ci95_halfwidth;
};
PairedDifference paired_difference(const EvalReport& a, const EvalReport& b);

}  // namespace fsdc
