#include "fsdc/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "fsdc/error.hpp"

namespace fsdc {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(ClassifierKind kind) noexcept {
  switch (kind) {
    case ClassifierKind::logistic: return "logistic";
    case ClassifierKind::svm: return "svm";
    case ClassifierKind::max_likelihood: return "max_likelihood";
    case ClassifierKind::chance: return "chance";
  }
  return "?";
}

ClassifierKind parse_classifier(const std::string& name) {
  if (name == "logistic") return ClassifierKind::logistic;
  if (name == "svm") return ClassifierKind::svm;
  if (name == "max_likelihood") return ClassifierKind::max_likelihood;
  if (name == "chance") return ClassifierKind::chance;
  throw Error(ErrorKind::usage, "unknown classifier '" + name + "' (logistic, svm, max_likelihood, chance)");
}

const char* to_string(MlAggregate agg) noexcept {
  return agg == MlAggregate::max ? "max" : "mean";
}

MlAggregate parse_ml_aggregate(const std::string& name) {
  if (name == "max") return MlAggregate::max;
  if (name == "mean") return MlAggregate::mean;
  throw Error(ErrorKind::usage, "unknown ml aggregate '" + name + "' (max, mean)");
}

const char* to_string(AlphaMode mode) noexcept {
  return mode == AlphaMode::elementwise ? "elementwise" : "diagonal";
}

AlphaMode parse_alpha_mode(const std::string& name) {
  if (name == "elementwise") return AlphaMode::elementwise;
  if (name == "diagonal") return AlphaMode::diagonal;
  throw Error(ErrorKind::usage, "unknown alpha mode '" + name + "' (elementwise, diagonal)");
}

namespace {

const char* to_string(BaselineKind kind) noexcept {
  return kind == BaselineKind::none ? "none" : "nearest_class";
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "none") return BaselineKind::none;
  if (name == "nearest_class") return BaselineKind::nearest_class;
  throw Error(ErrorKind::usage, "unknown baseline '" + name + "' (none, nearest_class)");
}

[[noreturn]] void bad_value(const std::string& key, const char* expected, const json& v) {
  throw Error(ErrorKind::usage, "setting '" + key + "' expects " + expected + ", got " + v.dump());
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_value(key, "a boolean", v);
  return v.get<bool>();
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number", v);
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad_value(key, "a finite number", v);
  return d;
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 9.0e15) return static_cast<std::uint64_t>(d);
  }
  bad_value(key, "a non-negative integer", v);
}

std::size_t as_size(const std::string& key, const json& v) { return static_cast<std::size_t>(as_u64(key, v)); }

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) bad_value(key, "a string", v);
  return v.get<std::string>();
}

struct Setting {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const json&)> set;
  std::function<ordered_json(const RunConfig&)> get;
};

#define FSDC_SETTING(KEY, FIELD, PARSE)                                              \
  Setting {                                                                                  \
    KEY, [](RunConfig& c, const std::string& k, const json& v) { c.FIELD = PARSE(k, v); },  \
        [](const RunConfig& c) { return ordered_json(c.FIELD); }                     \
  }

const std::vector<Setting>& registry() {
  static const std::vector<Setting> table = {
      FSDC_SETTING("tukey.use", pipeline.use_tukey, as_bool),
      FSDC_SETTING("tukey.lambda", pipeline.tukey.lambda, as_real),
      FSDC_SETTING("tukey.log_epsilon", pipeline.tukey.log_epsilon, as_real),
      FSDC_SETTING("tukey.base", pipeline.tukey_base, as_bool),
      FSDC_SETTING("calib.k", pipeline.calib.k, as_size),
      FSDC_SETTING("calib.alpha", pipeline.calib.alpha, as_real),
      FSDC_SETTING("calib.use_novel_feature", pipeline.calib.use_novel_feature, as_bool),
      Setting{"calib.alpha_mode",
              [](RunConfig& c, const std::string& k, const json& v) {
                c.pipeline.calib.alpha_mode = parse_alpha_mode(as_string(k, v));
              },
              [](const RunConfig& c) { return ordered_json(to_string(c.pipeline.calib.alpha_mode)); }},
      FSDC_SETTING("sampler.use_generation", pipeline.use_generation, as_bool),
      FSDC_SETTING("sampler.num_generated", pipeline.sampler.total_per_class, as_size),
      FSDC_SETTING("sampler.seed", pipeline.sampler.seed, as_u64),
      FSDC_SETTING("sampler.jitter", pipeline.sampler.jitter, as_real),
      FSDC_SETTING("optimizer.learning_rate", pipeline.optimizer.learning_rate, as_real),
      FSDC_SETTING("optimizer.epochs", pipeline.optimizer.epochs, as_size),
      FSDC_SETTING("optimizer.batch_size", pipeline.optimizer.batch_size, as_size),
      FSDC_SETTING("optimizer.l2", pipeline.optimizer.l2, as_real),
      FSDC_SETTING("optimizer.seed", pipeline.optimizer.seed, as_u64),
      FSDC_SETTING("optimizer.standardize", pipeline.optimizer.standardize, as_bool),
      Setting{"classifier.kind",
              [](RunConfig& c, const std::string& k, const json& v) {
                c.pipeline.classifier = parse_classifier(as_string(k, v));
              },
              [](const RunConfig& c) { return ordered_json(to_string(c.pipeline.classifier)); }},
      Setting{"classifier.ml_aggregate",
              [](RunConfig& c, const std::string& k, const json& v) {
                c.pipeline.ml_aggregate = parse_ml_aggregate(as_string(k, v));
              },
              [](const RunConfig& c) { return ordered_json(to_string(c.pipeline.ml_aggregate)); }},
      Setting{"baseline.kind",
              [](RunConfig& c, const std::string& k, const json& v) {
                c.pipeline.baseline = parse_baseline(as_string(k, v));
              },
              [](const RunConfig& c) { return ordered_json(to_string(c.pipeline.baseline)); }},
      FSDC_SETTING("baseline.nearest_m", pipeline.nearest_m, as_size),
      FSDC_SETTING("episode.n_way", episode.n_way, as_size),
      FSDC_SETTING("episode.k_shot", episode.k_shot, as_size),
      FSDC_SETTING("episode.q_queries", episode.q_queries, as_size),
      FSDC_SETTING("episode.num_episodes", episode.num_episodes, as_size),
      FSDC_SETTING("episode.seed", episode.seed, as_u64),
  };
  return table;
}

#undef FSDC_SETTING

void flatten_into(const json& j, const std::string& prefix, json& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten_into(*it, key, out);
    } else {
      out[key] = *it;
    }
  }
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : registry()) k.emplace_back(s.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const json& value) {
  for (const auto& s : registry()) {
    if (key == s.key) {
      s.set(cfg, key, value);
      return;
    }
  }
  throw Error(ErrorKind::usage, "unknown config key '" + key + "'");
}

json flatten_settings(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::usage, "config must be a JSON object");
  json out = json::object();
  flatten_into(j, "", out);
  return out;
}

void apply_settings(RunConfig& cfg, const json& j) {
  const json flat = flatten_settings(j);
  for (auto it = flat.begin(); it != flat.end(); ++it) apply_setting(cfg, it.key(), *it);
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json out = ordered_json::object();
  for (const auto& s : registry()) {
    const std::string key = s.key;
    const auto dot = key.find('.');
    out[key.substr(0, dot)][key.substr(dot + 1)] = s.get(cfg);
  }
  return out;
}

ordered_json report_to_json(const EvalReport& report) {
  ordered_json out;
  out["mean_accuracy"] = report.mean_accuracy;
  out["ci95_halfwidth"] = report.ci95_halfwidth;
  out["num_episodes"] = report.per_episode_accuracies.size();
  out["episode_seed_base"] = report.episode_seed_base;
  out["repaired_distributions"] = report.repaired_distributions;
  out["max_jitter"] = report.max_jitter;
  out["config"] = to_json(RunConfig{report.config, report.episode});
  out["per_episode_accuracies"] = report.per_episode_accuracies;
  return out;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
  std::string out = "value,mean,ci95\n";
  for (const auto& c : cells) {
    out += shortest(c.value) + "," + shortest(c.report.mean_accuracy) + "," +
           shortest(c.report.ci95_halfwidth) + "\n";
  }
  return out;
}

}  // namespace fsdc
