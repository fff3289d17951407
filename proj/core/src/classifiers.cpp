#include "fsdc/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fsdc/error.hpp"
#include "fsdc/rng.hpp"

namespace fsdc {

namespace {

void check_shapes(const LinearModel& model, const RowMatrix& x, std::span<const std::uint32_t> labels) {
  if (model.weights.cols() != x.cols()) throw Error(ErrorKind::dimension, "model/feature dimension mismatch");
  if (model.bias.size() != model.weights.rows()) throw Error(ErrorKind::dimension, "bias length mismatch");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw Error(ErrorKind::dimension, "feature rows and labels differ in length");
  }
  if (x.rows() == 0) throw Error(ErrorKind::precondition, "empty training batch");
}

// Objective on rows of `x`; gradients are written into `out`.
void logistic_objective(const Matrix& w, const Vector& b, const RowMatrix& x,
                        std::span<const std::uint32_t> labels, double l2, LossGradient& out) {
  const Eigen::Index n = x.rows();
  Matrix p = x * w.transpose();
  p.rowwise() += b.transpose();
  const Vector top = p.rowwise().maxCoeff();
  p.colwise() -= top;
  double target = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) target += p(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]));
  p = p.array().exp();
  const Vector z = p.rowwise().sum();
  p.array().colwise() /= z.array();
  for (Eigen::Index i = 0; i < n; ++i) p(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
  p /= static_cast<double>(n);
  out.loss = (z.array().log().sum() - target) / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
  out.grad_weights.noalias() = p.transpose() * x;
  out.grad_weights += l2 * w;
  out.grad_bias = p.colwise().sum().transpose();
}

void hinge_objective(const Matrix& w, const Vector& b, const RowMatrix& x,
                     std::span<const std::uint32_t> labels, double l2, LossGradient& out) {
  const auto n = static_cast<double>(x.rows());
  RowMatrix s = x * w.transpose();
  s.rowwise() += b.transpose();
  double loss = 0.0;
  // s becomes the subgradient coefficient d(loss)/d(score).
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const double sign = (c == y) ? 1.0 : -1.0;
      const double margin = 1.0 - sign * s(i, c);
      if (margin > 0) {
        loss += margin;
        s(i, c) = -sign;
      } else {
        s(i, c) = 0.0;
      }
    }
  }
  s /= n;
  out.loss = loss / n + 0.5 * l2 * w.squaredNorm();
  out.grad_weights = s.transpose() * x + l2 * w;
  out.grad_bias = s.colwise().sum().transpose();
}

using Objective = void (*)(const Matrix&, const Vector&, const RowMatrix&,
                           std::span<const std::uint32_t>, double, LossGradient&);

LinearModel train_linear(const TrainSet& ts, const OptimizerConfig& cfg, LinearKind kind,
                         Objective objective, std::vector<double>* loss_history) {
  ts.validate();
  cfg.validate();
  const Eigen::Index n = ts.features.rows();
  const Eigen::Index d = ts.features.cols();
  const auto classes = static_cast<Eigen::Index>(ts.num_classes());

  Vector shift = Vector::Zero(d);
  Vector scale = Vector::Ones(d);
  if (cfg.standardize) {
    shift = ts.features.colwise().mean().transpose();
    const Vector var = (ts.features.rowwise() - shift.transpose()).colwise().squaredNorm().transpose() /
                       static_cast<double>(n);
    for (Eigen::Index j = 0; j < d; ++j) scale(j) = var(j) > 0 ? std::sqrt(var(j)) : 1.0;
  }
  const RowMatrix x = cfg.standardize
                          ? RowMatrix((ts.features.rowwise() - shift.transpose()).array().rowwise() /
                                      scale.transpose().array())
                          : ts.features;

  Matrix w = Matrix::Zero(classes, d);
  Vector b = Vector::Zero(classes);
  LossGradient lg;

  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= static_cast<std::size_t>(n);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  RowMatrix batch;
  std::vector<std::uint32_t> batch_labels;

  if (loss_history) loss_history->clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    if (full_batch) {
      objective(w, b, x, ts.labels, cfg.l2, lg);
      epoch_loss = lg.loss;
      if (std::isfinite(lg.loss)) {
        w -= cfg.learning_rate * lg.grad_weights;
        b -= cfg.learning_rate * lg.grad_bias;
      }
    } else {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
      }
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        batch.resize(static_cast<Eigen::Index>(stop - start), d);
        batch_labels.resize(stop - start);
        for (std::size_t r = start; r < stop; ++r) {
          batch.row(static_cast<Eigen::Index>(r - start)) = x.row(static_cast<Eigen::Index>(order[r]));
          batch_labels[r - start] = ts.labels[order[r]];
        }
        objective(w, b, batch, batch_labels, cfg.l2, lg);
        epoch_loss += lg.loss;
        ++batches;
        if (!std::isfinite(lg.loss)) break;
        w -= cfg.learning_rate * lg.grad_weights;
        b -= cfg.learning_rate * lg.grad_bias;
      }
      epoch_loss /= static_cast<double>(batches);
    }
    if (!std::isfinite(epoch_loss) || !w.allFinite() || !b.allFinite()) {
      throw Error(ErrorKind::divergence, "training loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (loss_history) loss_history->push_back(epoch_loss);
  }

  LinearModel model;
  model.kind = kind;
  model.weights = w.array().rowwise() / scale.transpose().array();
  model.bias = b - model.weights * shift;
  return model;
}

}  // namespace

void TrainSet::validate() const {
  if (class_map.size() < 2) throw Error(ErrorKind::precondition, "training needs at least 2 classes");
  if (features.rows() == 0) throw Error(ErrorKind::precondition, "empty training set");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorKind::dimension, "feature rows and labels differ in length");
  }
  std::vector<bool> present(class_map.size(), false);
  for (auto y : labels) {
    if (y >= class_map.size()) throw Error(ErrorKind::precondition, "label " + std::to_string(y) + " out of range");
    present[y] = true;
  }
  for (std::size_t c = 0; c < present.size(); ++c) {
    if (!present[c]) throw Error(ErrorKind::precondition, "class index " + std::to_string(c) + " has no samples");
  }
  if (!features.allFinite()) throw Error(ErrorKind::data, "training features contain non-finite values");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::spec, "learning rate must be positive");
  }
  if (epochs == 0) throw Error(ErrorKind::spec, "epochs must be >= 1");
  if (!(l2 >= 0) || !std::isfinite(l2)) throw Error(ErrorKind::spec, "l2 must be >= 0");
}

LossGradient logistic_loss(const LinearModel& model, const RowMatrix& x,
                           std::span<const std::uint32_t> labels, double l2) {
  check_shapes(model, x, labels);
  LossGradient out;
  logistic_objective(model.weights, model.bias, x, labels, l2, out);
  return out;
}

LossGradient hinge_loss(const LinearModel& model, const RowMatrix& x,
                        std::span<const std::uint32_t> labels, double l2) {
  check_shapes(model, x, labels);
  LossGradient out;
  hinge_objective(model.weights, model.bias, x, labels, l2, out);
  return out;
}

LinearModel train_logistic(const TrainSet& ts, const OptimizerConfig& cfg,
                           std::vector<double>* loss_history) {
  return train_linear(ts, cfg, LinearKind::logistic, &logistic_objective, loss_history);
}

LinearModel train_svm(const TrainSet& ts, const OptimizerConfig& cfg,
                      std::vector<double>* loss_history) {
  return train_linear(ts, cfg, LinearKind::svm, &hinge_objective, loss_history);
}

std::uint32_t predict(const LinearModel& model, const Vector& x) {
  if (x.size() != model.weights.cols()) {
    throw Error(ErrorKind::dimension, "feature has dim " + std::to_string(x.size()) + ", model expects " +
                                          std::to_string(model.weights.cols()));
  }
  const Vector s = model.scores(x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < s.size(); ++c) {
    if (s(c) > s(best)) best = c;
  }
  return static_cast<std::uint32_t>(best);
}

std::vector<std::uint32_t> predict(const LinearModel& model, const RowMatrix& x) {
  if (x.cols() != model.weights.cols()) throw Error(ErrorKind::dimension, "model/feature dimension mismatch");
  RowMatrix s = x * model.weights.transpose();
  s.rowwise() += model.bias.transpose();
  std::vector<std::uint32_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

LikelihoodClassifier::LikelihoodClassifier(const CalibratedSet& dists, double jitter,
                                           MlAggregate aggregate)
    : aggregate_(aggregate) {
  if (dists.empty()) throw Error(ErrorKind::precondition, "no calibrated distributions");
  for (const auto& [label, list] : dists) {
    if (list.empty()) throw Error(ErrorKind::precondition, "label " + std::to_string(label) + " has no distributions");
    labels_.push_back(label);
    auto& factored = gaussians_.emplace_back();
    for (std::size_t j = 0; j < list.size(); ++j) {
      try {
        factored.push_back(factorize(list[j], jitter));
      } catch (const Error& e) {
        rethrow_with_context(e, "label " + std::to_string(label) + " distribution " + std::to_string(j));
      }
    }
  }
}

double LikelihoodClassifier::class_log_likelihood(std::size_t class_position, const Vector& x) const {
  const auto& list = gaussians_.at(class_position);
  std::vector<double> logs;
  logs.reserve(list.size());
  for (const auto& g : list) logs.push_back(g.log_density(x));
  const double top = *std::max_element(logs.begin(), logs.end());
  if (aggregate_ == MlAggregate::max) return top;
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - top);
  return top + std::log(acc / static_cast<double>(logs.size()));
}

std::uint32_t LikelihoodClassifier::classify(const Vector& x) const {
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    const double ll = class_log_likelihood(c, x);
    // Labels are ascending, so strict > keeps the lowest label on ties.
    if (ll > best_ll) {
      best_ll = ll;
      best = c;
    }
  }
  return labels_[best];
}

std::uint32_t max_likelihood_classify(const Vector& x, const CalibratedSet& dists, double jitter,
                                      MlAggregate aggregate) {
  return LikelihoodClassifier(dists, jitter, aggregate).classify(x);
}

}  // namespace fsdc
