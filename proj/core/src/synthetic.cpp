#include "fsdc/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "fsdc/error.hpp"
#include "fsdc/rng.hpp"

namespace fsdc {

namespace {

// Stream tags so that each kind of draw has its own independent sequence.
enum : std::uint64_t { kGroupStream = 1, kClassStream = 2, kSampleStream = 3 };

double simpson(double lo, double hi, int intervals, auto&& f) {
  if (hi <= lo) return 0.0;
  const double h = (hi - lo) / intervals;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

const char* to_string(SplitRole role) noexcept {
  switch (role) {
    case SplitRole::base: return "base";
    case SplitRole::val: return "val";
    case SplitRole::novel: return "novel";
  }
  return "base";
}

std::vector<std::vector<ClassId>> SyntheticSpec::contiguous_groups(std::uint32_t num_classes,
                                                                   std::uint32_t group_size) {
  if (group_size == 0) throw Error(ErrorKind::spec, "group size must be positive");
  std::vector<std::vector<ClassId>> groups;
  for (ClassId c = 0; c < num_classes; ++c) {
    if (c % group_size == 0) groups.emplace_back();
    groups.back().push_back(c);
  }
  return groups;
}

void SyntheticSpec::validate() const {
  if (num_classes == 0) throw Error(ErrorKind::spec, "num_classes must be positive");
  if (dim < 2) throw Error(ErrorKind::spec, "dim must be at least 2, got " + std::to_string(dim));
  if (samples_per_class == 0) throw Error(ErrorKind::spec, "samples_per_class must be positive");
  if (!(skew_power >= 1.0) || !std::isfinite(skew_power)) {
    throw Error(ErrorKind::spec, "skew_power must be >= 1");
  }
  if (!(level >= 0) || !(group_spread >= 0) || !(class_radius >= 0) || !(noise > 0)) {
    throw Error(ErrorKind::spec, "geometry parameters must be non-negative (noise positive)");
  }
  if (!class_similarity_groups.empty()) {
    std::vector<int> seen(num_classes, 0);
    for (const auto& g : class_similarity_groups) {
      if (g.empty()) throw Error(ErrorKind::spec, "empty similarity group");
      for (ClassId id : g) {
        if (id >= num_classes) {
          throw Error(ErrorKind::spec, "group member " + std::to_string(id) + " out of range");
        }
        if (seen[id]++) throw Error(ErrorKind::spec, "class " + std::to_string(id) + " in two groups");
      }
    }
    for (ClassId id = 0; id < num_classes; ++id) {
      if (!seen[id]) throw Error(ErrorKind::spec, "class " + std::to_string(id) + " in no group");
    }
  }
}

PowerMoments folded_power_moments(double mean, double stddev, double power) {
  const double lo = mean - 12.0 * stddev;
  const double hi = mean + 12.0 * stddev;
  const double norm = 1.0 / (stddev * std::sqrt(2.0 * std::numbers::pi));
  auto moment = [&](double order) {
    auto f = [&](double t) {
      const double u = (t - mean) / stddev;
      return std::pow(std::fabs(t), order) * norm * std::exp(-0.5 * u * u);
    };
    // Split at the kink of |t| so each piece is smooth.
    if (lo < 0.0 && hi > 0.0) return simpson(lo, 0.0, 4000, f) + simpson(0.0, hi, 4000, f);
    return simpson(lo, hi, 8000, f);
  };
  const double m1 = moment(power);
  const double m2 = moment(2.0 * power);
  return {m1, m2 - m1 * m1};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto groups = spec.class_similarity_groups.empty()
                          ? SyntheticSpec::contiguous_groups(spec.num_classes, 5)
                          : spec.class_similarity_groups;
  const Eigen::Index d = spec.dim;

  std::vector<ClassGroundTruth> truth(spec.num_classes);
  SplitManifest split;

  for (std::size_t g = 0; g < groups.size(); ++g) {
    Rng group_rng(derive_seed({spec.seed, kGroupStream, g}));
    Vector center(d);
    Vector noise_profile(d);
    for (Eigen::Index j = 0; j < d; ++j) center(j) = spec.level + spec.group_spread * std::fabs(group_rng.normal());
    for (Eigen::Index j = 0; j < d; ++j) noise_profile(j) = spec.noise * (0.75 + 0.5 * group_rng.uniform_open());

    const auto& members = groups[g];
    const std::size_t n = members.size();
    const std::size_t n_novel = std::min<std::size_t>(spec.novel_per_group, n);
    const std::size_t n_val = std::min<std::size_t>(spec.val_per_group, n - n_novel);

    for (std::size_t pos = 0; pos < n; ++pos) {
      const ClassId id = members[pos];
      ClassGroundTruth& t = truth[id];
      t.class_id = id;
      t.group = g;
      if (pos >= n - n_novel) {
        t.role = SplitRole::novel;
        split.novel_classes.insert(id);
      } else if (pos >= n - n_novel - n_val) {
        t.role = SplitRole::val;
        split.val_classes.insert(id);
      } else {
        t.role = SplitRole::base;
        split.base_classes.insert(id);
      }
      t.power = t.role == SplitRole::base ? 1.0 : spec.skew_power;

      Rng class_rng(derive_seed({spec.seed, kClassStream, id}));
      t.latent_mean.resize(d);
      t.latent_stddev.resize(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        t.latent_mean(j) = std::max(0.05, center(j) + spec.class_radius * class_rng.normal());
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        t.latent_stddev(j) = noise_profile(j) * (0.9 + 0.2 * class_rng.uniform_open());
      }
      t.mean.resize(d);
      t.variance.resize(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const auto m = folded_power_moments(t.latent_mean(j), t.latent_stddev(j), t.power);
        t.mean(j) = m.mean;
        t.variance(j) = m.variance;
      }
    }
  }

  std::vector<FeatureVector> records;
  records.reserve(static_cast<std::size_t>(spec.num_classes) * spec.samples_per_class);
  for (ClassId id = 0; id < spec.num_classes; ++id) {
    const auto& t = truth[id];
    Rng rng(derive_seed({spec.seed, kSampleStream, id}));
    for (std::uint32_t s = 0; s < spec.samples_per_class; ++s) {
      FeatureVector r;
      r.class_id = id;
      r.values.resize(spec.dim);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double z = t.latent_mean(j) + t.latent_stddev(j) * rng.normal();
        const double g = std::fabs(z);
        r.values[static_cast<std::size_t>(j)] =
            static_cast<float>(t.power == 1.0 ? g : std::pow(g, t.power));
      }
      records.push_back(std::move(r));
    }
  }

  return {Dataset(spec.dim, std::move(records)), std::move(split), std::move(truth)};
}

nlohmann::ordered_json ground_truth_to_json(const SyntheticSpec& spec,
                                    const std::vector<ClassGroundTruth>& truth) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& t : truth) {
    classes.push_back({{"class_id", t.class_id},
                       {"group", t.group},
                       {"role", to_string(t.role)},
                       {"power", t.power},
                       {"latent_mean", vec(t.latent_mean)},
                       {"latent_stddev", vec(t.latent_stddev)},
                       {"mean", vec(t.mean)},
                       {"variance", vec(t.variance)}});
  }
  nlohmann::ordered_json out;
  out["spec"] = {{"num_classes", spec.num_classes},
                 {"dim", spec.dim},
                 {"samples_per_class", spec.samples_per_class},
                 {"skew_power", spec.skew_power},
                 {"seed", spec.seed},
                 {"novel_per_group", spec.novel_per_group},
                 {"val_per_group", spec.val_per_group},
                 {"level", spec.level},
                 {"group_spread", spec.group_spread},
                 {"class_radius", spec.class_radius},
                 {"noise", spec.noise}};
  out["groups"] = spec.class_similarity_groups.empty()
                      ? SyntheticSpec::contiguous_groups(spec.num_classes, 5)
                      : spec.class_similarity_groups;
  out["classes"] = classes;
  return out;
}

}  // namespace fsdc
