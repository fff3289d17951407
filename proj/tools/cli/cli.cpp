#include "cli.hpp"

#include <cstdlib>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fsdc/config.hpp"
#include "fsdc/error.hpp"
#include "fsdc/features_io.hpp"
#include "fsdc/harness.hpp"
#include "fsdc/projection.hpp"
#include "fsdc/statistics.hpp"
#include "fsdc/synthetic.hpp"

namespace fsdc::cli {

using nlohmann::json;

json merge_settings(const json& base, const json& overrides) {
  json merged = flatten_settings(base);
  const json flat = flatten_settings(overrides);
  for (auto it = flat.begin(); it != flat.end(); ++it) merged[it.key()] = *it;
  return merged;
}

namespace {

// A command-line flag that, when present, sets one config key.
struct Override {
  CLI::Option* option;
  std::string key;
  std::function<json()> value;
};

// Flags shared by eval, sweep and project. Each one maps onto a config key
// and only takes effect when given, so a config file can supply the rest.
class PipelineFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--dataset", dataset, "Feature file (binary FSDC, or .csv)")->required();
    app->add_option("--split", split, "Split manifest JSON")->required();
    app->add_option("--stats", stats, "Base statistics file; computed from the dataset when omitted");
    app->add_option("--config", config, "JSON config with dotted (or nested) keys");
    app->add_option("--set", sets, "Override any config key: key=value (value parsed as JSON)");
    app->add_option("--workers", workers, "Episode worker threads (default: FSDC_WORKERS or hardware)");

    real(app, "--lambda", "tukey.lambda", "Tukey power");
    real(app, "--log-epsilon", "tukey.log_epsilon", "Shift for zeros under the log transform");
    flag(app, "--no-tukey", "tukey.use", false, "Skip the Tukey transform");
    flag(app, "--tukey-base", "tukey.base", true, "Base statistics taken on transformed features");
    count(app, "--k", "calib.k", "Number of base classes used for calibration");
    real(app, "--alpha", "calib.alpha", "Dispersion constant");
    flag(app, "--no-novel-feature", "calib.use_novel_feature", false,
         "Calibrated mean from base means only");
    add(app->add_flag("--alpha-diagonal")->description("Add alpha on the diagonal only"), "calib.alpha_mode",
        [] { return json("diagonal"); });
    count(app, "--num-generated", "sampler.num_generated", "Generated features per class");
    flag(app, "--no-generation", "sampler.use_generation", false, "Train on the support set only");
    count(app, "--sampler-seed", "sampler.seed", "Seed of the feature sampler");
    real(app, "--jitter", "sampler.jitter", "Initial Cholesky jitter");
    real(app, "--lr", "optimizer.learning_rate", "Learning rate");
    count(app, "--epochs", "optimizer.epochs", "Training epochs");
    count(app, "--batch-size", "optimizer.batch_size", "Mini-batch size (0 = full batch)");
    real(app, "--l2", "optimizer.l2", "L2 penalty on weights");
    count(app, "--optimizer-seed", "optimizer.seed", "Seed of the optimizer");
    flag(app, "--no-standardize", "optimizer.standardize", false, "Train on unscaled features");
    text(app, "--classifier", "classifier.kind", "logistic, svm, max_likelihood or chance");
    text(app, "--ml-aggregate", "classifier.ml_aggregate", "max or mean");
    auto* baseline = app->add_option("--baseline", baseline_, "none or nearest:<m>");
    baseline_option_ = baseline;
    count(app, "--n-way", "episode.n_way", "Classes per episode");
    count(app, "--k-shot", "episode.k_shot", "Support samples per class");
    count(app, "--queries", "episode.q_queries", "Query samples per class");
    count(app, "--episodes", "episode.num_episodes", "Number of episodes");
    count(app, "--seed", "episode.seed", "Episode seed");
  }

  RunConfig resolve(std::ostream& err) const {
    json file = json::object();
    if (!config.empty()) {
      try {
        file = json::parse(read_file(config));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::usage, "config " + config + ": " + e.what());
      }
    }
    json flags = json::object();
    for (const auto& o : overrides_) {
      if (o.option->count() > 0) flags[o.key] = o.value();
    }
    if (baseline_option_->count() > 0) {
      if (baseline_ == "none") {
        flags["baseline.kind"] = "none";
      } else if (baseline_.rfind("nearest:", 0) == 0) {
        flags["baseline.kind"] = "nearest_class";
        flags["baseline.nearest_m"] = parse_count(baseline_.substr(8), "--baseline");
      } else {
        throw Error(ErrorKind::usage, "--baseline expects none or nearest:<m>, got '" + baseline_ + "'");
      }
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorKind::usage, "--set expects key=value, got '" + s + "'");
      }
      const std::string raw = s.substr(eq + 1);
      json v;
      try {
        v = json::parse(raw);
      } catch (const json::exception&) {
        v = raw;  // bare words are strings
      }
      flags[s.substr(0, eq)] = v;
    }

    RunConfig cfg;
    apply_settings(cfg, merge_settings(file, flags));

    if (cfg.pipeline.classifier == ClassifierKind::max_likelihood) {
      for (const auto& o : overrides_) {
        if (o.option->count() > 0 && o.key.rfind("optimizer.", 0) == 0) {
          err << "warning: " << o.option->get_name() << " is ignored by the max_likelihood classifier\n";
        }
      }
    }
    return cfg;
  }

  std::size_t resolve_workers() const {
    if (workers > 0) return workers;
    if (const char* env = std::getenv("FSDC_WORKERS"); env != nullptr && *env != '\0') {
      const std::size_t n = parse_count(env, "FSDC_WORKERS");
      if (n == 0) throw Error(ErrorKind::usage, "FSDC_WORKERS must be >= 1");
      return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
  }

  std::string dataset;
  std::string split;
  std::string stats;
  std::string config;
  std::vector<std::string> sets;
  std::size_t workers = 0;

 private:
  static std::size_t parse_count(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size() || s.front() == '-') {
      throw Error(ErrorKind::usage, what + " expects a non-negative integer, got '" + s + "'");
    }
    return static_cast<std::size_t>(v);
  }

  void add(CLI::Option* opt, std::string key, std::function<json()> value) {
    overrides_.push_back({opt, std::move(key), std::move(value)});
  }
  void real(CLI::App* app, const char* name, const char* key, const char* help) {
    auto v = std::make_shared<double>();
    add(app->add_option(name, *v, help), key, [v] { return json(*v); });
  }
  void count(CLI::App* app, const char* name, const char* key, const char* help) {
    auto v = std::make_shared<std::uint64_t>();
    add(app->add_option(name, *v, help), key, [v] { return json(*v); });
  }
  void text(CLI::App* app, const char* name, const char* key, const char* help) {
    auto v = std::make_shared<std::string>();
    add(app->add_option(name, *v, help), key, [v] { return json(*v); });
  }
  void flag(CLI::App* app, const char* name, const char* key, bool when_set, const char* help) {
    add(app->add_flag(name)->description(help), key, [when_set] { return json(when_set); });
  }

  std::vector<Override> overrides_;
  std::string baseline_;
  CLI::Option* baseline_option_ = nullptr;
};

struct Inputs {
  Dataset dataset;
  SplitManifest split;
  BaseStatsTable stats;
};

Inputs load_inputs(const PipelineFlags& flags, const RunConfig& cfg) {
  Dataset ds = load_dataset(flags.dataset, format_from_path(flags.dataset));
  SplitManifest split = load_split(flags.split);
  if (!flags.stats.empty()) {
    BaseStatsTable stats = load_base_stats(flags.stats);
    return {std::move(ds), std::move(split), std::move(stats)};
  }
  BaseStatsOptions opts;
  if (cfg.pipeline.use_tukey && cfg.pipeline.tukey_base) opts.transform = cfg.pipeline.tukey;
  BaseStatsTable stats = build_base_stats(ds, split, opts);
  return {std::move(ds), std::move(split), std::move(stats)};
}

std::string format_accuracy(double mean, double ci) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * mean << " ± " << 100.0 * ci;
  return s.str();
}

EvalOptions eval_options(const PipelineFlags& flags, bool progress, std::ostream& err) {
  EvalOptions opts;
  opts.workers = flags.resolve_workers();
  if (progress) {
    opts.progress = [&err](std::size_t done, std::size_t total) {
      const std::size_t step = std::max<std::size_t>(1, total / 10);
      if (done % step == 0 || done == total) err << "episodes " << done << "/" << total << "\n";
    };
  }
  return opts;
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> values;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw Error(ErrorKind::usage, "bad sweep value '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw Error(ErrorKind::usage, "--values needs at least one value");
  return values;
}

int cmd_synth(const SyntheticSpec& spec_in, std::uint32_t group_size, const std::string& dataset_path,
              const std::string& split_path, const std::string& truth_path, std::ostream& out) {
  SyntheticSpec spec = spec_in;
  if (group_size == 0) throw Error(ErrorKind::usage, "--group-size must be >= 1");
  spec.class_similarity_groups = SyntheticSpec::contiguous_groups(spec.num_classes, group_size);
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::usage, e.what());
  }
  const SyntheticData data = generate_synthetic(spec);
  save_dataset(data.dataset, dataset_path, format_from_path(dataset_path));
  save_split(data.split, split_path);
  write_file_atomic(truth_path, ground_truth_to_json(spec, data.truth).dump(2) + "\n");
  out << "wrote " << data.dataset.size() << " features (" << data.split.base_classes.size() << " base, "
      << data.split.val_classes.size() << " val, " << data.split.novel_classes.size()
      << " novel classes) to " << dataset_path << "\n";
  return 0;
}

int cmd_stats(const std::string& dataset_path, const std::string& split_path, const std::string& out_path,
              bool tukey_base, double lambda, const std::string& similarity_path, std::ostream& out) {
  const Dataset ds = load_dataset(dataset_path, format_from_path(dataset_path));
  const SplitManifest split = load_split(split_path);
  BaseStatsOptions opts;
  if (tukey_base) opts.transform = TukeyParams{lambda};
  const BaseStatsTable table = build_base_stats(ds, split, opts);
  save_base_stats(table, out_path);
  for (const auto& e : table.entries()) out << "class " << e.class_id << ": " << e.count << " samples\n";
  out << "wrote statistics of " << table.size() << " base classes to " << out_path << "\n";

  if (!similarity_path.empty()) {
    std::ostringstream csv;
    csv << "class_a,class_b,mean_sim,var_sim\n";
    csv << std::setprecision(17);
    for (const auto& a : table.entries()) {
      for (const auto& b : table.entries()) {
        if (a.class_id >= b.class_id) continue;
        const ClassSimilarity s = class_similarity(a, b);
        csv << a.class_id << ',' << b.class_id << ',' << s.mean_sim << ',' << s.var_sim << '\n';
      }
    }
    write_file_atomic(similarity_path, csv.str());
  }
  return 0;
}

int cmd_eval(const PipelineFlags& flags, const std::string& out_path, bool progress, std::ostream& out,
             std::ostream& err) {
  const RunConfig cfg = flags.resolve(err);
  const Inputs in = load_inputs(flags, cfg);
  const EvalReport report =
      evaluate(in.dataset, in.split, in.stats, cfg.episode, cfg.pipeline, eval_options(flags, progress, err));
  write_file_atomic(out_path, report_to_json(report).dump(2) + "\n");
  out << format_accuracy(report.mean_accuracy, report.ci95_halfwidth) << "\n";
  return 0;
}

int cmd_sweep(const PipelineFlags& flags, const std::string& param_name, const std::string& values_list,
              const std::string& csv_path, const std::string& json_path, bool progress, std::ostream& out,
              std::ostream& err) {
  const SweepParam param = parse_sweep_param(param_name);
  const std::vector<double> values = parse_values(values_list);
  const RunConfig cfg = flags.resolve(err);
  const Inputs in = load_inputs(flags, cfg);
  const auto cells = sweep(in.dataset, in.split, in.stats, param, values, cfg.pipeline, cfg.episode,
                           eval_options(flags, progress, err));
  write_file_atomic(csv_path, sweep_to_csv(cells));
  if (!json_path.empty()) {
    nlohmann::ordered_json j;
    j["param"] = to_string(param);
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
      j["cells"].push_back({{"value", c.value}, {"report", report_to_json(c.report)}});
    }
    write_file_atomic(json_path, j.dump(2) + "\n");
  }
  for (const auto& c : cells) {
    out << to_string(param) << "=" << c.value << "  "
        << format_accuracy(c.report.mean_accuracy, c.report.ci95_halfwidth) << "\n";
  }
  return 0;
}

int cmd_project(const PipelineFlags& flags, std::size_t episode_index, const std::string& out_path,
                std::ostream& out, std::ostream& err) {
  RunConfig cfg = flags.resolve(err);
  const Inputs in = load_inputs(flags, cfg);
  const PipelineConfig& pc = cfg.pipeline;
  const Episode ep = sample_episode(in.dataset, in.split, cfg.episode, episode_index);

  const RowMatrix support = pc.use_tukey ? tukey_transform(ep.support, pc.tukey) : ep.support;
  const RowMatrix query = pc.use_tukey ? tukey_transform(ep.query, pc.tukey) : ep.query;
  SampledFeatures gen;
  if (pc.generates()) {
    const CalibratedSet dists = calibrate_support_set(support, ep.support_labels, in.stats, pc.calib);
    SamplerConfig sc = pc.sampler;
    sc.seed = episode_sampler_seed(pc.sampler.seed, episode_index);
    gen = sample_features(dists, sc);
  } else {
    gen.features.resize(0, support.cols());
  }

  RowMatrix all(support.rows() + query.rows() + gen.features.rows(), support.cols());
  all << support, query, gen.features;
  const Projection2d proj = project_2d(all);

  std::vector<ProjectedPoint> points;
  points.reserve(static_cast<std::size_t>(all.rows()));
  Eigen::Index r = 0;
  auto emit = [&](const std::vector<std::uint32_t>& labels, const char* role) {
    for (std::uint32_t label : labels) {
      points.push_back({proj.points(r, 0), proj.points(r, 1), label, role});
      ++r;
    }
  };
  emit(ep.support_labels, "support");
  emit(ep.query_labels, "query");
  emit(gen.labels, "generated");
  write_file_atomic(out_path, projection_to_csv(points));
  out << "wrote " << points.size() << " projected points to " << out_path << "\n";
  return 0;
}

int fail(std::ostream& err, ErrorKind kind, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  err << "error[" << to_string(kind) << "]: " << line << "\n";
  return kind == ErrorKind::usage ? 2 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot distribution calibration toolkit", "fsdc"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic few-shot feature dataset");
  SyntheticSpec sspec;
  std::uint32_t group_size = 5;
  std::string synth_dataset = "synth.fsdc";
  std::string synth_split = "split.json";
  std::string synth_truth = "truth.json";
  synth->add_option("--classes", sspec.num_classes, "Number of classes")->capture_default_str();
  synth->add_option("--dim", sspec.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--per-class", sspec.samples_per_class, "Samples per class")->capture_default_str();
  synth->add_option("--skew-power", sspec.skew_power, "Power applied to val and novel classes")
      ->capture_default_str();
  synth->add_option("--seed", sspec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--group-size", group_size, "Classes per similarity group")->capture_default_str();
  synth->add_option("--novel-per-group", sspec.novel_per_group, "Novel classes per group")
      ->capture_default_str();
  synth->add_option("--val-per-group", sspec.val_per_group, "Validation classes per group")
      ->capture_default_str();
  synth->add_option("--level", sspec.level, "Common latent offset")->capture_default_str();
  synth->add_option("--group-spread", sspec.group_spread, "Scale of group centers")->capture_default_str();
  synth->add_option("--class-radius", sspec.class_radius, "Spread of class means within a group")
      ->capture_default_str();
  synth->add_option("--noise", sspec.noise, "Typical within-class stddev")->capture_default_str();
  synth->add_option("--dataset", synth_dataset, "Output feature file")->capture_default_str();
  synth->add_option("--split", synth_split, "Output split manifest")->capture_default_str();
  synth->add_option("--truth", synth_truth, "Output ground-truth JSON")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Compute base-class statistics");
  std::string stats_dataset, stats_split, stats_out = "stats.fsst", similarity_path;
  bool tukey_base = false;
  double stats_lambda = 0.5;
  stats->add_option("--dataset", stats_dataset, "Feature file")->required();
  stats->add_option("--split", stats_split, "Split manifest")->required();
  stats->add_option("--out", stats_out, "Output statistics file")->capture_default_str();
  stats->add_flag("--tukey-base", tukey_base, "Transform base features before taking statistics");
  stats->add_option("--lambda", stats_lambda, "Tukey power for --tukey-base")->capture_default_str();
  stats->add_option("--similarity-report", similarity_path, "Write pairwise mean/var similarity CSV");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate the pipeline over many episodes");
  PipelineFlags eval_flags;
  eval_flags.attach(eval);
  std::string eval_out = "report.json";
  bool eval_progress = false;
  eval->add_option("--out", eval_out, "Output report JSON")->capture_default_str();
  eval->add_flag("--progress", eval_progress, "Print an episode counter on stderr");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Evaluate across values of one hyperparameter");
  PipelineFlags sweep_flags;
  sweep_flags.attach(sw);
  std::string sweep_param, sweep_values, sweep_csv = "sweep.csv", sweep_json;
  bool sweep_progress = false;
  sw->add_option("--param", sweep_param, "lambda, num_generated, k, alpha or nearest_m")->required();
  sw->add_option("--values", sweep_values, "Comma-separated values")->required();
  sw->add_option("--out", sweep_csv, "Output CSV (value,mean,ci95)")->capture_default_str();
  sw->add_option("--json", sweep_json, "Also write every report as JSON");
  sw->add_flag("--progress", sweep_progress, "Print an episode counter on stderr");

  // project
  auto* project = app.add_subcommand("project", "2-D PCA projection of one calibrated episode");
  PipelineFlags project_flags;
  project_flags.attach(project);
  std::size_t episode_index = 0;
  std::string project_out = "projection.csv";
  project->add_option("--episode-index", episode_index, "Which episode to project")->capture_default_str();
  project->add_option("--out", project_out, "Output CSV (x,y,label,role)")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, ErrorKind::usage, e.what());
  }

  try {
    if (synth->parsed()) return cmd_synth(sspec, group_size, synth_dataset, synth_split, synth_truth, out);
    if (stats->parsed()) {
      return cmd_stats(stats_dataset, stats_split, stats_out, tukey_base, stats_lambda, similarity_path, out);
    }
    if (eval->parsed()) return cmd_eval(eval_flags, eval_out, eval_progress, out, err);
    if (sw->parsed()) {
      return cmd_sweep(sweep_flags, sweep_param, sweep_values, sweep_csv, sweep_json, sweep_progress, out, err);
    }
    if (project->parsed()) return cmd_project(project_flags, episode_index, project_out, out, err);
  } catch (const Error& e) {
    return fail(err, e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(err, ErrorKind::io, e.what());
  }
  return fail(err, ErrorKind::usage, "no command given");
}

}  // namespace fsdc::cli
