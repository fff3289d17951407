#include "fsdc/projection.hpp"

#include <charconv>

#include <Eigen/Eigenvalues>

#include "fsdc/error.hpp"

namespace fsdc {

Projection2d project_2d(const RowMatrix& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 2) throw Error(ErrorKind::precondition, "projection needs at least 2 features");
  if (d < 2) throw Error(ErrorKind::dimension, "projection needs at least 2 dimensions");

  Projection2d out;
  out.center = features.colwise().mean().transpose();
  const RowMatrix centered = features.rowwise() - out.center.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (!(cov.trace() > 0)) throw Error(ErrorKind::data, "features have zero variance");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::data, "eigendecomposition failed");
  // Eigen returns ascending order.
  out.eigenvalues = eig.eigenvalues().reverse();
  out.components.resize(d, 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Vector v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.col(c) = v;
  }
  out.points = centered * out.components;
  return out;
}

namespace {

void append(std::string& s, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

}  // namespace

std::string projection_to_csv(const std::vector<ProjectedPoint>& points) {
  std::string out = "x,y,label,role\n";
  for (const auto& p : points) {
    append(out, p.x);
    out += ',';
    append(out, p.y);
    out += ',' + std::to_string(p.label) + ',' + p.role + '\n';
  }
  return out;
}

}  // namespace fsdc
