#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdc/harness.hpp"

namespace fsdc {

// Everything an evaluation run is configured by.
struct RunConfig {
  PipelineConfig pipeline;
  EpisodeSpec episode;
};

const char* to_string(ClassifierKind kind) noexcept;
ClassifierKind parse_classifier(const std::string& name);
const char* to_string(MlAggregate agg) noexcept;
MlAggregate parse_ml_aggregate(const std::string& name);
const char* to_string(AlphaMode mode) noexcept;
AlphaMode parse_alpha_mode(const std::string& name);

/// Dotted keys accepted by apply_setting, in snapshot order:
///   tukey.{use,lambda,log_epsilon,base}
///   calib.{k,alpha,use_novel_feature,alpha_mode}
///   sampler.{use_generation,num_generated,seed,jitter}
///   optimizer.{learning_rate,epochs,batch_size,l2,seed,standardize}
///   classifier.{kind,ml_aggregate}
///   baseline.{kind,nearest_m}
///   episode.{n_way,k_shot,q_queries,num_episodes,seed}
const std::vector<std::string>& setting_keys();

// Sets one field from a JSON scalar. Unknown keys and ill-typed values are
// usage errors.
void apply_setting(RunConfig& cfg, const std::string& key, const nlohmann::json& value);

// Collapses nested objects to dotted keys: {"calib":{"k":3}} -> {"calib.k":3}.
nlohmann::json flatten_settings(const nlohmann::json& j);

// Applies every key of a (possibly nested) JSON object.
void apply_settings(RunConfig& cfg, const nlohmann::json& j);

// Nested snapshot, one object per group, every settable field present.
nlohmann::ordered_json to_json(const RunConfig& cfg);

nlohmann::ordered_json report_to_json(const EvalReport& report);

// "value,mean,ci95" header plus one row per cell.
std::string sweep_to_csv(const std::vector<SweepCell>& cells);

}  // namespace fsdc
