#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace icsoh {

enum class Gate : int { Forget = 0, Input = 1, Candidate = 2, Output = 3 };

/// Parameters of one LSTM direction. The four gate matrices are stacked
/// row-wise (forget, input, candidate, output); each acts on the
/// concatenation [h_{t-1}, x_t].
struct LstmParams {
  int input_size = 0;
  int hidden_size = 0;
  Eigen::MatrixXd weights;  // 4h x (h + d)
  Eigen::VectorXd bias;     // 4h

  static LstmParams zeros(int input_size, int hidden_size);

  [[nodiscard]] auto gate_weights(Gate g) {
    return weights.middleRows(static_cast<int>(g) * hidden_size, hidden_size);
  }
  [[nodiscard]] auto gate_weights(Gate g) const {
    return weights.middleRows(static_cast<int>(g) * hidden_size, hidden_size);
  }
  [[nodiscard]] auto gate_bias(Gate g) { return bias.segment(static_cast<int>(g) * hidden_size, hidden_size); }
  [[nodiscard]] auto gate_bias(Gate g) const {
    return bias.segment(static_cast<int>(g) * hidden_size, hidden_size);
  }

  bool operator==(const LstmParams& o) const {
    return input_size == o.input_size && hidden_size == o.hidden_size && weights == o.weights &&
           bias == o.bias;
  }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zeros(int hidden_size) {
    return {Eigen::VectorXd::Zero(hidden_size), Eigen::VectorXd::Zero(hidden_size)};
  }
};

/// One time step of the LSTM recurrence.
LstmState lstm_step(const LstmParams& params, const LstmState& prev, const Eigen::VectorXd& x);

/// Forward and backward LSTMs feeding a rectified linear head on
/// [h_W(forward), h_1(backward)].
struct BiLstmNetwork {
  LstmParams forward;
  LstmParams backward;
  Eigen::RowVectorXd head_weights;  // 1 x 2h
  double head_bias = 0.0;

  [[nodiscard]] int input_size() const { return forward.input_size; }
  [[nodiscard]] int hidden_size() const { return forward.hidden_size; }
  [[nodiscard]] std::size_t parameter_count() const;

  static BiLstmNetwork zeros(int input_size, int hidden_size);

  /// Uniform weights in [-1/sqrt(h), 1/sqrt(h)], forget-gate bias +1.
  static BiLstmNetwork initialize(int input_size, int hidden_size, std::uint64_t seed);

  bool operator==(const BiLstmNetwork& o) const {
    return forward == o.forward && backward == o.backward && head_weights == o.head_weights &&
           head_bias == o.head_bias;
  }
};

/// W x d matrix; row t is the feature vector at time step t.
using Sequence = Eigen::MatrixXd;

struct SequencePair {
  Sequence sequence;
  double target = 0.0;
};

/// Intermediate activations of one direction over a batch (columns).
struct DirectionCache {
  std::vector<Eigen::MatrixXd> concat;  // [h_prev; x] per processed step
  std::vector<Eigen::MatrixXd> gates;   // 4h x B activated gates per step
  std::vector<Eigen::MatrixXd> cell;    // c_t per step
  std::vector<Eigen::MatrixXd> cell_prev;
  std::vector<Eigen::MatrixXd> hidden;  // h_t per step
};

struct ForwardCache {
  DirectionCache forward;
  DirectionCache backward;  // steps in processing order (t = W..1)
  Eigen::MatrixXd features; // 2h x B concatenated readout
  Eigen::RowVectorXd pre_activation;
  Eigen::RowVectorXd prediction;
};

struct ForwardResult {
  double prediction = 0.0;
  ForwardCache cache;
};

/// Single-sequence forward pass with the full activation cache.
ForwardResult bilstm_forward(const BiLstmNetwork& net, const Sequence& sequence);

/// Batched forward pass; all sequences must share the same length.
ForwardCache bilstm_forward_batch(const BiLstmNetwork& net, std::span<const Sequence* const> batch);

double bilstm_predict(const BiLstmNetwork& net, const Sequence& sequence);
std::vector<double> bilstm_predict_all(const BiLstmNetwork& net, std::span<const Sequence> sequences);

/// Mean squared error over the batch; when `gradient` is non-null it
/// receives dLoss/dParams (same shapes as `net`) via BPTT.
double loss_and_gradient(const BiLstmNetwork& net, std::span<const SequencePair* const> batch,
                         BiLstmNetwork* gradient);

/// Parameters in a fixed order: forward W, b, backward W, b, head W, head b.
Eigen::VectorXd flatten_parameters(const BiLstmNetwork& net);
void assign_parameters(BiLstmNetwork& net, const Eigen::VectorXd& flat);

nlohmann::json network_to_json(const BiLstmNetwork& net);
BiLstmNetwork network_from_json(const nlohmann::json& j);

}  // namespace icsoh
