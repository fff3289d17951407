#include "fsdc/transform.hpp"

#include <cmath>
#include <string>

#include "fsdc/error.hpp"

namespace fsdc {

namespace {

double tukey_scalar(double x, const TukeyParams& p) {
  if (!std::isfinite(x)) throw Error(ErrorKind::data, "non-finite feature value");
  if (x < 0) throw Error(ErrorKind::domain, "negative feature value " + std::to_string(x));
  if (p.lambda == 1.0) return x;
  if (p.lambda == 0.0) return std::log(x == 0.0 ? p.log_epsilon : x);
  if (p.lambda == 0.5) return std::sqrt(x);
  return std::pow(x, p.lambda);
}

}  // namespace

void TukeyParams::validate() const {
  if (!std::isfinite(lambda)) throw Error(ErrorKind::spec, "tukey lambda must be finite");
  if (!(log_epsilon > 0) || !std::isfinite(log_epsilon)) {
    throw Error(ErrorKind::spec, "tukey log_epsilon must be positive");
  }
}

Vector tukey_transform(const Vector& x, const TukeyParams& params) {
  params.validate();
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = tukey_scalar(x(i), params);
  return out;
}

RowMatrix tukey_transform(const RowMatrix& rows, const TukeyParams& params) {
  params.validate();
  RowMatrix out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out(r, c) = tukey_scalar(rows(r, c), params);
  }
  return out;
}

double sample_skewness(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) {
    throw Error(ErrorKind::undefined_skewness, "skewness needs at least 3 values, got " + std::to_string(n));
  }
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0;
  double m3 = 0;
  for (double v : values) {
    const double dv = v - mean;
    m2 += dv * dv;
    m3 += dv * dv * dv;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (!(m2 > 0)) throw Error(ErrorKind::undefined_skewness, "zero variance");
  const double g1 = m3 / std::pow(m2, 1.5);
  const double nn = static_cast<double>(n);
  return g1 * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
}

}  // namespace fsdc
