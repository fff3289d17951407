#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdc/features_io.hpp"
#include "fsdc/types.hpp"

namespace fsdc {

enum class SplitRole { base, val, novel };

const char* to_string(SplitRole role) noexcept;

/// Parameters of the synthetic feature generator.
///
/// Each class draws latent Gaussians z ~ N(m, diag(s^2)); stored features are
/// |z|^p. Base classes use p = 1 (near-Gaussian, folding is rare), val and
/// novel classes use p = skew_power, so their marginals are right skewed and
/// a Tukey power of 1/skew_power maps them back to the latent space the base
/// classes live in. Classes of one similarity group share a group center and
/// noise profile; each class mean is the center plus a small offset.
struct SyntheticSpec {
  std::uint32_t num_classes = 25;
  std::uint32_t dim = 16;
  std::uint32_t samples_per_class = 200;
  double skew_power = 2.0;
  // Partition of [0, num_classes). Empty means contiguous groups of 5.
  std::vector<std::vector<ClassId>> class_similarity_groups;
  std::uint64_t seed = 7;

  // Within each group (in listed order) the last `novel_per_group` classes
  // are novel, the `val_per_group` before them are validation, the rest base.
  std::uint32_t novel_per_group = 1;
  std::uint32_t val_per_group = 0;

  // Geometry of the latent space.
  double level = 1.0;         // common offset of every latent mean
  double group_spread = 0.6;  // scale of |N(0,1)| group-center bumps
  double class_radius = 0.25; // per-dimension stddev of class offsets
  double noise = 0.5;         // typical latent per-dimension stddev

  static std::vector<std::vector<ClassId>> contiguous_groups(std::uint32_t num_classes,
                                                             std::uint32_t group_size);

  // Throws spec error on any violated invariant.
  void validate() const;
};

struct ClassGroundTruth {
  ClassId class_id = 0;
  std::size_t group = 0;
  SplitRole role = SplitRole::base;
  double power = 1.0;
  Vector latent_mean;
  Vector latent_stddev;
  // Exact moments of the stored feature |z|^power (dimensions independent,
  // so the true covariance is diag(variance)).
  Vector mean;
  Vector variance;

  Matrix covariance() const { return variance.asDiagonal(); }
};

struct SyntheticData {
  Dataset dataset;
  SplitManifest split;
  std::vector<ClassGroundTruth> truth;  // indexed by class id
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

nlohmann::ordered_json ground_truth_to_json(const SyntheticSpec& spec,
                                    const std::vector<ClassGroundTruth>& truth);

// Mean and variance of |z|^p for z ~ N(mean, stddev^2), by quadrature.
struct PowerMoments {
  double mean;
  double variance;
};
PowerMoments folded_power_moments(double mean, double stddev, double power);

}  // namespace fsdc
