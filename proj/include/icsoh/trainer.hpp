#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icsoh/bilstm.hpp"

namespace icsoh {

struct TrainConfig {
  int max_epochs = 500;
  int batch_size = 32;
  double initial_lr = 0.01;
  int lr_drop_period = 350;
  double lr_drop_factor = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int window_length = 5;
  double clip_norm = 5.0;
  /// An epoch loss above this counts as divergence (NumericalError).
  double divergence_loss = 1e6;

  void validate() const;
};

/// Step-decayed learning rate for a zero-based epoch.
double learning_rate_at(const TrainConfig& cfg, double initial_lr, int epoch);

struct TrainResult {
  BiLstmNetwork network;
  std::vector<double> loss_history;  // mean mini-batch loss per epoch
};

/// The starting point used by train_bilstm: seeded uniform init with the
/// head bias set to the mean target.
BiLstmNetwork initial_network(std::span<const SequencePair> data, const TrainConfig& cfg, int hidden);

/// Mini-batch Adam on MSE with BPTT gradients, global-norm clipping and
/// step learning-rate decay. Throws NumericalError on a non-finite or
/// diverging loss, naming the epoch.
TrainResult train_bilstm(std::span<const SequencePair> data, const TrainConfig& cfg, int hidden,
                         double initial_lr);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

/// Central finite differences against BPTT for every parameter.
GradientCheckResult gradient_check(const BiLstmNetwork& net, const SequencePair& pair,
                                   double epsilon = 1e-5);

}  // namespace icsoh
