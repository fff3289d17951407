#include "fsdc/sampling.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "fsdc/error.hpp"
#include "fsdc/rng.hpp"

namespace fsdc {

namespace {

constexpr double kJitterGrowth = 10.0;
constexpr double kJitterCap = 1e6;

}  // namespace

CholeskyFactor cholesky_psd(const Matrix& sigma, double jitter) {
  if (sigma.rows() != sigma.cols()) throw Error(ErrorKind::dimension, "covariance is not square");
  if (!(jitter > 0)) throw Error(ErrorKind::spec, "jitter must be positive");
  const double scale = sigma.cwiseAbs().maxCoeff();
  if (!std::isfinite(scale)) throw Error(ErrorKind::not_factorizable, "covariance has non-finite entries");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::precondition, "covariance is not symmetric");
  }

  const Eigen::Index d = sigma.rows();
  double c = 0.0;
  for (;;) {
    Matrix shifted = sigma;
    shifted.diagonal().array() += c;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if (lower.allFinite() && (lower.diagonal().array() > 0).all()) return {std::move(lower), c};
    }
    c = (c == 0.0) ? jitter : c * kJitterGrowth;
    if (c > kJitterCap * jitter * (1.0 + 1e-9)) {
      throw Error(ErrorKind::not_factorizable,
                  "covariance (dim " + std::to_string(d) + ") not factorizable with jitter up to " +
                      std::to_string(kJitterCap * jitter));
    }
  }
}

double FactoredGaussian::log_density(const Vector& x) const {
  const Vector diff = x - mean;
  const Vector y = factor.lower.triangularView<Eigen::Lower>().solve(diff);
  const double log_det = 2.0 * factor.lower.diagonal().array().log().sum();
  const double d = static_cast<double>(x.size());
  return -0.5 * (y.squaredNorm() + log_det + d * std::log(2.0 * std::numbers::pi));
}

FactoredGaussian factorize(const CalibratedDistribution& dist, double jitter) {
  return {dist.mean, cholesky_psd(dist.covariance, jitter)};
}

void SamplerConfig::validate() const {
  if (total_per_class == 0) throw Error(ErrorKind::spec, "total_per_class must be >= 1");
  if (!(jitter > 0)) throw Error(ErrorKind::spec, "jitter must be positive");
}

SampledFeatures sample_features(const CalibratedSet& dists, const SamplerConfig& cfg) {
  cfg.validate();
  if (dists.empty()) throw Error(ErrorKind::precondition, "no calibrated distributions to sample");
  const Eigen::Index d = dists.begin()->second.front().mean.size();
  const auto total = static_cast<Eigen::Index>(cfg.total_per_class * dists.size());

  SampledFeatures out;
  out.features.resize(total, d);
  out.labels.reserve(static_cast<std::size_t>(total));

  Eigen::Index row = 0;
  for (const auto& [label, list] : dists) {
    if (list.empty()) {
      throw Error(ErrorKind::precondition, "label " + std::to_string(label) + " has no distributions");
    }
    const std::size_t per = cfg.total_per_class / list.size();
    const std::size_t extra = cfg.total_per_class % list.size();
    for (std::size_t j = 0; j < list.size(); ++j) {
      const auto count = static_cast<Eigen::Index>(per + (j < extra ? 1 : 0));
      FactoredGaussian g;
      try {
        g = factorize(list[j], cfg.jitter);
      } catch (const Error& e) {
        rethrow_with_context(e, "label " + std::to_string(label) + " distribution " + std::to_string(j));
      }
      out.jitter_log.push_back({label, j, g.factor.jitter});
      if (count == 0) continue;

      Rng rng(derive_seed({cfg.seed, label, j}));
      RowMatrix z(count, d);
      for (Eigen::Index r = 0; r < count; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) z(r, c) = rng.normal();
      }
      out.features.middleRows(row, count) =
          (z * g.factor.lower.transpose()).rowwise() + g.mean.transpose();
      out.labels.insert(out.labels.end(), static_cast<std::size_t>(count), label);
      row += count;
    }
  }
  return out;
}

}  // namespace fsdc
