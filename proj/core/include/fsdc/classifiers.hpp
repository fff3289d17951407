#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsdc/calibration.hpp"
#include "fsdc/sampling.hpp"
#include "fsdc/types.hpp"

namespace fsdc {

// Training data for one task. Labels are task-local indices 0..N-1;
// class_map[i] is the dataset class id behind index i.
struct TrainSet {
  RowMatrix features;
  std::vector<std::uint32_t> labels;
  std::vector<ClassId> class_map;

  std::size_t num_classes() const noexcept { return class_map.size(); }
  void validate() const;
};

enum class LinearKind { logistic, svm };

struct LinearModel {
  Matrix weights;  // N x d
  Vector bias;     // N
  LinearKind kind = LinearKind::logistic;

  Vector scores(const Vector& x) const { return weights * x + bias; }
};

struct OptimizerConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 300;
  std::size_t batch_size = 0;  // 0 = full batch
  double l2 = 1e-3;
  std::uint64_t seed = 0;
  // Train on per-dimension standardized features and fold the scaling back
  // into the returned weights.
  bool standardize = true;

  void validate() const;
};

struct LossGradient {
  double loss = 0.0;
  Matrix grad_weights;
  Vector grad_bias;
};

// Mean softmax cross-entropy plus (l2/2)*||W||^2 (bias unpenalized).
LossGradient logistic_loss(const LinearModel& model, const RowMatrix& x,
                           std::span<const std::uint32_t> labels, double l2);

// Mean one-vs-rest hinge, sum_c max(0, 1 - y_c * s_c), plus (l2/2)*||W||^2.
LossGradient hinge_loss(const LinearModel& model, const RowMatrix& x,
                        std::span<const std::uint32_t> labels, double l2);

/// Multinomial logistic regression by (mini-batch) gradient descent from a
/// zero initialization. Throws divergence if the loss becomes non-finite.
/// `loss_history`, when given, receives the training objective at the start
/// of every epoch.
LinearModel train_logistic(const TrainSet& ts, const OptimizerConfig& cfg,
                           std::vector<double>* loss_history = nullptr);

// One-vs-rest linear SVM by subgradient descent.
LinearModel train_svm(const TrainSet& ts, const OptimizerConfig& cfg,
                      std::vector<double>* loss_history = nullptr);

// Argmax of the class scores; ties go to the lowest index.
std::uint32_t predict(const LinearModel& model, const Vector& x);
std::vector<std::uint32_t> predict(const LinearModel& model, const RowMatrix& x);

enum class MlAggregate {
  max,   // best single calibrated distribution of the class
  mean,  // equal-weight mixture of the class's distributions
};

/// Classifies by likelihood under each class's calibrated Gaussians.
class LikelihoodClassifier {
 public:
  LikelihoodClassifier(const CalibratedSet& dists, double jitter,
                       MlAggregate aggregate = MlAggregate::max);

  std::uint32_t classify(const Vector& x) const;
  double class_log_likelihood(std::size_t class_position, const Vector& x) const;
  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }

 private:
  std::vector<std::uint32_t> labels_;
  std::vector<std::vector<FactoredGaussian>> gaussians_;
  MlAggregate aggregate_;
};

std::uint32_t max_likelihood_classify(const Vector& x, const CalibratedSet& dists,
                                      double jitter = 1e-6,
                                      MlAggregate aggregate = MlAggregate::max);

}  // namespace fsdc
