#include "fsdc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <thread>

#include "fsdc/error.hpp"
#include "fsdc/rng.hpp"

namespace fsdc {

namespace {

// Stream tags so that different consumers of one episode index never share
// a random stream.
constexpr std::uint64_t kTagEpisode = 0x65;
constexpr std::uint64_t kTagSampler = 0x73;
constexpr std::uint64_t kTagOptimizer = 0x6f;
constexpr std::uint64_t kTagRetrieval = 0x72;
constexpr std::uint64_t kTagChance = 0x63;

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

RowMatrix stack(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace

void EpisodeSpec::validate() const {
  if (n_way == 0 || k_shot == 0 || q_queries == 0 || num_episodes == 0) {
    throw Error(ErrorKind::spec, "n_way, k_shot, q_queries and num_episodes must be positive");
  }
}

EpisodeSampler::EpisodeSampler(const Dataset& ds, const SplitManifest& split, const EpisodeSpec& spec)
    : ds_(&ds), spec_(spec), novel_(split.novel_classes.begin(), split.novel_classes.end()) {
  spec_.validate();
  if (spec_.n_way > novel_.size()) {
    throw Error(ErrorKind::unsatisfiable, std::to_string(spec_.n_way) + "-way episodes need " +
                                              std::to_string(spec_.n_way) + " novel classes, split has " +
                                              std::to_string(novel_.size()));
  }
  const std::size_t need = spec_.k_shot + spec_.q_queries;
  for (ClassId id : novel_) {
    if (!ds.has_class(id)) {
      throw Error(ErrorKind::unsatisfiable, "novel class " + std::to_string(id) + " has no samples");
    }
    const std::size_t have = ds.class_size(id);
    if (have < need) {
      throw Error(ErrorKind::unsatisfiable,
                  "novel class " + std::to_string(id) + " has " + std::to_string(have) +
                      " samples, episodes need " + std::to_string(need));
    }
  }
}

Episode EpisodeSampler::sample(std::size_t index) const {
  Rng rng(derive_seed({spec_.seed, kTagEpisode, index}));
  std::vector<ClassId> pool = novel_;
  for (std::size_t i = 0; i < spec_.n_way; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }

  Episode ep;
  ep.index = index;
  ep.classes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec_.n_way));
  const auto d = static_cast<Eigen::Index>(ds_->dim());
  ep.support.resize(static_cast<Eigen::Index>(spec_.n_way * spec_.k_shot), d);
  ep.query.resize(static_cast<Eigen::Index>(spec_.n_way * spec_.q_queries), d);

  Eigen::Index s_row = 0;
  Eigen::Index q_row = 0;
  for (std::uint32_t label = 0; label < spec_.n_way; ++label) {
    std::vector<std::size_t> idx = ds_->class_indices(ep.classes[label]);
    const std::size_t take = spec_.k_shot + spec_.q_queries;
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      const auto& values = ds_->records()[idx[i]].values;
      const bool is_support = i < spec_.k_shot;
      auto dst = is_support ? ep.support.row(s_row++) : ep.query.row(q_row++);
      for (Eigen::Index c = 0; c < d; ++c) dst(c) = static_cast<double>(values[static_cast<std::size_t>(c)]);
      (is_support ? ep.support_labels : ep.query_labels).push_back(label);
    }
  }
  return ep;
}

Episode sample_episode(const Dataset& ds, const SplitManifest& split, const EpisodeSpec& spec,
                       std::size_t index) {
  return EpisodeSampler(ds, split, spec).sample(index);
}

void PipelineConfig::validate() const {
  tukey.validate();
  optimizer.validate();
  if (!(sampler.jitter > 0)) throw Error(ErrorKind::spec, "jitter must be positive");
  if (baseline == BaselineKind::nearest_class && nearest_m == 0) {
    throw Error(ErrorKind::spec, "nearest-class retrieval needs m >= 1");
  }
  if (baseline == BaselineKind::nearest_class &&
      (classifier == ClassifierKind::max_likelihood || classifier == ClassifierKind::chance)) {
    throw Error(ErrorKind::spec, "nearest-class retrieval needs a trained linear classifier");
  }
}

std::uint64_t episode_sampler_seed(std::uint64_t sampler_seed, std::size_t episode_index) noexcept {
  return derive_seed({sampler_seed, kTagSampler, episode_index});
}

EpisodeOutcome run_episode(const Episode& ep, const BaseStatsTable& stats, const PipelineConfig& cfg,
                           const BaseFeaturePool* pool) {
  if (static_cast<std::size_t>(ep.support.cols()) != stats.dim()) {
    throw Error(ErrorKind::dimension, "episode features have dim " + std::to_string(ep.support.cols()) +
                                          ", base statistics have dim " + std::to_string(stats.dim()));
  }
  EpisodeOutcome out;
  const std::size_t n_way = ep.classes.size();

  if (cfg.classifier == ClassifierKind::chance) {
    Rng rng(derive_seed({cfg.optimizer.seed, kTagChance, ep.index}));
    std::vector<std::uint32_t> guess(ep.query_labels.size());
    for (auto& g : guess) g = static_cast<std::uint32_t>(rng.below(n_way));
    out.accuracy = accuracy(guess, ep.query_labels);
    return out;
  }

  RowMatrix support = cfg.use_tukey ? tukey_transform(ep.support, cfg.tukey) : ep.support;
  RowMatrix query = cfg.use_tukey ? tukey_transform(ep.query, cfg.tukey) : ep.query;

  TrainSet ts;
  ts.class_map = ep.classes;
  ts.features = support;
  ts.labels = ep.support_labels;

  if (cfg.baseline == BaselineKind::nearest_class) {
    if (pool == nullptr) throw Error(ErrorKind::precondition, "retrieval baseline needs a base feature pool");
    RowMatrix extra(static_cast<Eigen::Index>(cfg.nearest_m) * support.rows(), support.cols());
    std::vector<std::uint32_t> extra_labels;
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
      const Vector x = support.row(i).transpose();
      extra.middleRows(i * static_cast<Eigen::Index>(cfg.nearest_m), static_cast<Eigen::Index>(cfg.nearest_m)) =
          retrieve_nearest_class_features(
              x, *pool, stats, cfg.nearest_m,
              derive_seed({cfg.sampler.seed, kTagRetrieval, ep.index, static_cast<std::uint64_t>(i)}));
      extra_labels.insert(extra_labels.end(), cfg.nearest_m, ep.support_labels[static_cast<std::size_t>(i)]);
    }
    ts.features = stack(ts.features, extra);
    ts.labels.insert(ts.labels.end(), extra_labels.begin(), extra_labels.end());
  } else if (cfg.classifier == ClassifierKind::max_likelihood) {
    const CalibratedSet dists = calibrate_support_set(support, ep.support_labels, stats, cfg.calib);
    const LikelihoodClassifier ml(dists, cfg.sampler.jitter, cfg.ml_aggregate);
    std::vector<std::uint32_t> predicted(static_cast<std::size_t>(query.rows()));
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
      predicted[static_cast<std::size_t>(i)] = ml.classify(query.row(i).transpose());
    }
    out.accuracy = accuracy(predicted, ep.query_labels);
    return out;
  } else if (cfg.generates()) {
    const CalibratedSet dists = calibrate_support_set(support, ep.support_labels, stats, cfg.calib);
    SamplerConfig sc = cfg.sampler;
    sc.seed = episode_sampler_seed(cfg.sampler.seed, ep.index);
    SampledFeatures gen = sample_features(dists, sc);
    for (const auto& j : gen.jitter_log) {
      if (j.jitter > 0) {
        ++out.repaired_distributions;
        out.max_jitter = std::max(out.max_jitter, j.jitter);
      }
    }
    ts.features = stack(ts.features, gen.features);
    ts.labels.insert(ts.labels.end(), gen.labels.begin(), gen.labels.end());
  }

  OptimizerConfig oc = cfg.optimizer;
  oc.seed = derive_seed({cfg.optimizer.seed, kTagOptimizer, ep.index});
  const LinearModel model =
      cfg.classifier == ClassifierKind::svm ? train_svm(ts, oc) : train_logistic(ts, oc);
  out.accuracy = accuracy(predict(model, query), ep.query_labels);
  return out;
}

void summarize(EvalReport& report) {
  const auto& acc = report.per_episode_accuracies;
  if (acc.empty()) throw Error(ErrorKind::precondition, "no episodes to summarize");
  const double n = static_cast<double>(acc.size());
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  report.mean_accuracy = mean;
  report.ci95_halfwidth = 1.96 * std::sqrt(ss / n) / std::sqrt(n);
}

EvalReport evaluate(const Dataset& ds, const SplitManifest& split, const BaseStatsTable& stats,
                    const EpisodeSpec& spec, const PipelineConfig& cfg, const EvalOptions& options) {
  cfg.validate();
  if (ds.dim() != stats.dim()) {
    throw Error(ErrorKind::dimension, "dataset dim " + std::to_string(ds.dim()) +
                                          " does not match base statistics dim " + std::to_string(stats.dim()));
  }
  if (cfg.classifier != ClassifierKind::chance &&
      (cfg.generates() || cfg.classifier == ClassifierKind::max_likelihood)) {
    cfg.calib.validate(stats.size());
  }
  const EpisodeSampler sampler(ds, split, spec);

  std::optional<BaseFeaturePool> pool;
  if (cfg.baseline == BaselineKind::nearest_class) {
    std::optional<TukeyParams> t;
    if (cfg.use_tukey && cfg.tukey_base) t = cfg.tukey;
    pool.emplace(ds, split, t);
  }

  const std::size_t n = spec.num_episodes;
  std::vector<EpisodeOutcome> outcomes(n);
  std::vector<std::exception_ptr> failures(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::mutex progress_mu;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        outcomes[i] = run_episode(sampler.sample(i), stats, cfg, pool ? &*pool : nullptr);
      } catch (...) {
        failures[i] = std::current_exception();
        failed.store(true);
        return;
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (options.progress) {
        std::lock_guard lock(progress_mu);
        options.progress(d, n);
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    const std::string context = "episode " + std::to_string(i);
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      rethrow_with_context(e, context);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::data, context + ": " + e.what());
    }
  }

  EvalReport report;
  report.config = cfg;
  report.episode = spec;
  report.episode_seed_base = spec.seed;
  report.per_episode_accuracies.reserve(n);
  for (const auto& o : outcomes) {
    report.per_episode_accuracies.push_back(o.accuracy);
    report.repaired_distributions += o.repaired_distributions;
    report.max_jitter = std::max(report.max_jitter, o.max_jitter);
  }
  summarize(report);
  return report;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda") return SweepParam::lambda;
  if (name == "num_generated") return SweepParam::num_generated;
  if (name == "k") return SweepParam::k;
  if (name == "alpha") return SweepParam::alpha;
  if (name == "nearest_m") return SweepParam::nearest_m;
  throw Error(ErrorKind::usage, "unknown sweep parameter '" + name + "'");
}

const char* to_string(SweepParam p) noexcept {
  switch (p) {
    case SweepParam::lambda: return "lambda";
    case SweepParam::num_generated: return "num_generated";
    case SweepParam::k: return "k";
    case SweepParam::alpha: return "alpha";
    case SweepParam::nearest_m: return "nearest_m";
  }
  return "?";
}

namespace {

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0) || v != std::floor(v) || v > 1e12) {
    throw Error(ErrorKind::usage, std::string(what) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

PipelineConfig with_param(PipelineConfig cfg, SweepParam param, double value) {
  switch (param) {
    case SweepParam::lambda:
      cfg.tukey.lambda = value;
      break;
    case SweepParam::num_generated:
      cfg.sampler.total_per_class = as_count(value, "num_generated");
      break;
    case SweepParam::k:
      cfg.calib.k = as_count(value, "k");
      break;
    case SweepParam::alpha:
      cfg.calib.alpha = value;
      break;
    case SweepParam::nearest_m:
      cfg.nearest_m = as_count(value, "nearest_m");
      cfg.baseline = BaselineKind::nearest_class;
      break;
  }
  return cfg;
}

std::vector<SweepCell> sweep(const Dataset& ds, const SplitManifest& split,
                             const BaseStatsTable& stats, SweepParam param,
                             const std::vector<double>& values, const PipelineConfig& base_cfg,
                             const EpisodeSpec& spec, const EvalOptions& options) {
  if (values.empty()) throw Error(ErrorKind::usage, "sweep needs at least one value");
  std::vector<SweepCell> cells;
  cells.reserve(values.size());
  for (double v : values) {
    try {
      cells.push_back({v, evaluate(ds, split, stats, spec, with_param(base_cfg, param, v), options)});
    } catch (const Error& e) {
      rethrow_with_context(e, std::string(to_string(param)) + "=" + std::to_string(v));
    }
  }
  return cells;
}

PairedDifference paired_difference(const EvalReport& a, const EvalReport& b) {
  const auto& x = a.per_episode_accuracies;
  const auto& y = b.per_episode_accuracies;
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorKind::precondition, "paired comparison needs equally many episodes");
  }
  EvalReport diff;
  diff.per_episode_accuracies.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff.per_episode_accuracies[i] = x[i] - y[i];
  summarize(diff);
  return {diff.mean_accuracy, diff.ci95_halfwidth};
}

}  // namespace fsdc
