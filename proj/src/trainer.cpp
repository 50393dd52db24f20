#include "icsoh/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "icsoh/error.hpp"

namespace icsoh {

void TrainConfig::validate() const {
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0)) throw ConfigError("lr_drop_factor must lie in (0, 1]");
  if (lr_drop_period < 1) throw ConfigError("lr_drop_period must be positive");
  if (window_length < 1) throw ConfigError("window_length must be positive");
}

double learning_rate_at(const TrainConfig& cfg, double initial_lr, int epoch) {
  return initial_lr * std::pow(cfg.lr_drop_factor, epoch / cfg.lr_drop_period);
}

BiLstmNetwork initial_network(std::span<const SequencePair> data, const TrainConfig& cfg, int hidden) {
  if (data.empty()) throw DataError("training needs at least one pair");
  const auto d = static_cast<int>(data.front().sequence.cols());
  BiLstmNetwork net = BiLstmNetwork::initialize(d, hidden, cfg.seed);
  double mean = 0.0;
  for (const auto& p : data) mean += p.target;
  net.head_bias = mean / static_cast<double>(data.size());
  return net;
}

TrainResult train_bilstm(std::span<const SequencePair> data, const TrainConfig& cfg, int hidden,
                         double initial_lr) {
  cfg.validate();
  if (!(initial_lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& p : data) {
    if (!std::isfinite(p.target)) throw DataError("training targets must be finite");
  }
  TrainResult result{initial_network(data, cfg, hidden), {}};
  BiLstmNetwork& net = result.network;

  Eigen::VectorXd params = flatten_parameters(net);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  BiLstmNetwork grad_net;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<const SequencePair*> batch;
  long long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = learning_rate_at(cfg, initial_lr, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(&data[order[k]]);
      const double loss = loss_and_gradient(net, batch, &grad_net);
      epoch_loss += loss * static_cast<double>(batch.size());

      Eigen::VectorXd g = flatten_parameters(grad_net);
      const double norm = g.norm();
      if (!std::isfinite(norm) || !std::isfinite(loss)) {
        throw NumericalError("non-finite loss or gradient at epoch " + std::to_string(epoch));
      }
      if (norm > cfg.clip_norm) g *= cfg.clip_norm / norm;

      ++step;
      m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
      v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
      assign_parameters(net, params);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss) || epoch_loss > cfg.divergence_loss) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

GradientCheckResult gradient_check(const BiLstmNetwork& net, const SequencePair& pair, double epsilon) {
  const SequencePair* ptr = &pair;
  const std::span<const SequencePair* const> batch(&ptr, 1);
  BiLstmNetwork grad;
  loss_and_gradient(net, batch, &grad);

  GradientCheckResult r;
  r.analytic = flatten_parameters(grad);
  const Eigen::VectorXd base = flatten_parameters(net);
  r.numeric.resize(base.size());
  BiLstmNetwork probe = net;
  Eigen::VectorXd shifted = base;
  for (Eigen::Index k = 0; k < base.size(); ++k) {
    shifted(k) = base(k) + epsilon;
    assign_parameters(probe, shifted);
    const double up = loss_and_gradient(probe, batch, nullptr);
    shifted(k) = base(k) - epsilon;
    assign_parameters(probe, shifted);
    const double down = loss_and_gradient(probe, batch, nullptr);
    shifted(k) = base(k);
    r.numeric(k) = (up - down) / (2.0 * epsilon);
    const double a = r.analytic(k), n = r.numeric(k);
    r.max_relative_error =
        std::max(r.max_relative_error, std::abs(a - n) / std::max(std::abs(a) + std::abs(n), 1e-8));
  }
  return r;
}

}  // namespace icsoh
