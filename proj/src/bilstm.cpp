#include "icsoh/bilstm.hpp"

#include <cmath>
#include <random>

#include "icsoh/error.hpp"

namespace icsoh {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

// Runs one direction over `inputs` (each d x B) in the given order.
// Returns the final hidden state.
Eigen::MatrixXd run_direction(const LstmParams& p, const std::vector<const Eigen::MatrixXd*>& inputs,
                              DirectionCache& cache) {
  const int h = p.hidden_size;
  const int d = p.input_size;
  const Eigen::Index batch = inputs.front()->cols();
  Eigen::MatrixXd hidden = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd cell = Eigen::MatrixXd::Zero(h, batch);
  const std::size_t steps = inputs.size();
  cache.concat.resize(steps);
  cache.gates.resize(steps);
  cache.cell.resize(steps);
  cache.cell_prev.resize(steps);
  cache.hidden.resize(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Eigen::MatrixXd z(h + d, batch);
    z.topRows(h) = hidden;
    z.bottomRows(d) = *inputs[s];
    Eigen::MatrixXd a = p.weights * z;
    a.colwise() += p.bias;
    Eigen::MatrixXd gates(4 * h, batch);
    gates.topRows(2 * h) = sigmoid(a.topRows(2 * h));
    gates.middleRows(2 * h, h) = a.middleRows(2 * h, h).array().tanh().matrix();
    gates.bottomRows(h) = sigmoid(a.bottomRows(h));
    cache.cell_prev[s] = cell;
    cell = gates.topRows(h).cwiseProduct(cell) + gates.middleRows(h, h).cwiseProduct(gates.middleRows(2 * h, h));
    hidden = gates.bottomRows(h).cwiseProduct(cell.array().tanh().matrix());
    cache.concat[s] = std::move(z);
    cache.gates[s] = std::move(gates);
    cache.cell[s] = cell;
    cache.hidden[s] = hidden;
  }
  return hidden;
}

// BPTT through one direction given dLoss/dh at the final step.
void backprop_direction(const LstmParams& p, const DirectionCache& cache, Eigen::MatrixXd dh,
                        LstmParams& grad) {
  const int h = p.hidden_size;
  const Eigen::Index batch = dh.cols();
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd da(4 * h, batch);
  for (std::size_t s = cache.gates.size(); s-- > 0;) {
    const auto& g = cache.gates[s];
    const auto f = g.topRows(h).array();
    const auto i = g.middleRows(h, h).array();
    const auto cand = g.middleRows(2 * h, h).array();
    const auto o = g.bottomRows(h).array();
    const Eigen::ArrayXXd tc = cache.cell[s].array().tanh();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    da.topRows(h) = (dc.array() * cache.cell_prev[s].array() * f * (1.0 - f)).matrix();
    da.middleRows(h, h) = (dc.array() * cand * i * (1.0 - i)).matrix();
    da.middleRows(2 * h, h) = (dc.array() * i * (1.0 - cand.square())).matrix();
    da.bottomRows(h) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dc.array() *= f;

    grad.weights.noalias() += da * cache.concat[s].transpose();
    grad.bias += da.rowwise().sum();
    dh.noalias() = p.weights.leftCols(h).transpose() * da;
  }
}

void append(Eigen::VectorXd& flat, Eigen::Index& at, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat(at++) = m(r, c);
  }
}

void extract(const Eigen::VectorXd& flat, Eigen::Index& at, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat(at++);
  }
}

nlohmann::json params_to_json(const LstmParams& p) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
    std::vector<double> row(p.weights.cols());
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = p.weights(r, c);
    rows.push_back(row);
  }
  return {{"weights", rows}, {"bias", std::vector<double>(p.bias.data(), p.bias.data() + p.bias.size())}};
}

LstmParams params_from_json(const nlohmann::json& j, int input_size, int hidden_size) {
  LstmParams p = LstmParams::zeros(input_size, hidden_size);
  const auto& rows = j.at("weights");
  if (static_cast<Eigen::Index>(rows.size()) != p.weights.rows()) {
    throw DataError("model file: weight row count mismatch");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != p.weights.cols()) {
      throw DataError("model file: weight column count mismatch");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      p.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(bias.size()) != p.bias.size()) throw DataError("model file: bias size mismatch");
  for (std::size_t k = 0; k < bias.size(); ++k) p.bias(static_cast<Eigen::Index>(k)) = bias[k];
  return p;
}

}  // namespace

LstmParams LstmParams::zeros(int input_size, int hidden_size) {
  if (input_size < 1 || hidden_size < 1) throw ConfigError("LSTM sizes must be positive");
  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.weights = Eigen::MatrixXd::Zero(4 * hidden_size, hidden_size + input_size);
  p.bias = Eigen::VectorXd::Zero(4 * hidden_size);
  return p;
}

LstmState lstm_step(const LstmParams& params, const LstmState& prev, const Eigen::VectorXd& x) {
  const int h = params.hidden_size;
  if (x.size() != params.input_size || prev.h.size() != h || prev.c.size() != h ||
      params.weights.rows() != 4 * h || params.weights.cols() != h + params.input_size) {
    throw ConfigError("lstm_step: dimension mismatch");
  }
  Eigen::VectorXd z(h + params.input_size);
  z << prev.h, x;
  const Eigen::VectorXd a = params.weights * z + params.bias;
  const Eigen::VectorXd f = sigmoid(a.segment(0, h));
  const Eigen::VectorXd i = sigmoid(a.segment(h, h));
  const Eigen::VectorXd cand = a.segment(2 * h, h).array().tanh();
  const Eigen::VectorXd o = sigmoid(a.segment(3 * h, h));
  LstmState next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(cand);
  next.h = o.cwiseProduct(next.c.array().tanh().matrix());
  return next;
}

std::size_t BiLstmNetwork::parameter_count() const {
  return static_cast<std::size_t>(2 * (forward.weights.size() + forward.bias.size()) +
                                  head_weights.size() + 1);
}

BiLstmNetwork BiLstmNetwork::zeros(int input_size, int hidden_size) {
  BiLstmNetwork net;
  net.forward = LstmParams::zeros(input_size, hidden_size);
  net.backward = LstmParams::zeros(input_size, hidden_size);
  net.head_weights = Eigen::RowVectorXd::Zero(2 * hidden_size);
  return net;
}

BiLstmNetwork BiLstmNetwork::initialize(int input_size, int hidden_size, std::uint64_t seed) {
  BiLstmNetwork net = zeros(input_size, hidden_size);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (LstmParams* p : {&net.forward, &net.backward}) {
    for (Eigen::Index k = 0; k < p->weights.size(); ++k) p->weights.data()[k] = uni(rng);
    for (Eigen::Index k = 0; k < p->bias.size(); ++k) p->bias(k) = uni(rng);
    p->gate_bias(Gate::Forget).array() += 1.0;
  }
  for (Eigen::Index k = 0; k < net.head_weights.size(); ++k) net.head_weights(k) = uni(rng);
  net.head_bias = 0.0;
  return net;
}

ForwardCache bilstm_forward_batch(const BiLstmNetwork& net, std::span<const Sequence* const> batch) {
  if (batch.empty()) throw ConfigError("bilstm_forward: empty batch");
  const Eigen::Index steps = batch.front()->rows();
  const int d = net.input_size();
  const int h = net.hidden_size();
  if (steps < 1) throw DataError("bilstm_forward: empty sequence");
  const auto b = static_cast<Eigen::Index>(batch.size());

  // Time-major inputs, one d x B matrix per step.
  std::vector<Eigen::MatrixXd> inputs(static_cast<std::size_t>(steps), Eigen::MatrixXd(d, b));
  for (Eigen::Index col = 0; col < b; ++col) {
    const Sequence& seq = *batch[static_cast<std::size_t>(col)];
    if (seq.rows() != steps || seq.cols() != d) {
      throw DataError("bilstm_forward: sequence shape mismatch (expected " + std::to_string(steps) +
                      " x " + std::to_string(d) + ")");
    }
    for (Eigen::Index t = 0; t < steps; ++t) inputs[static_cast<std::size_t>(t)].col(col) = seq.row(t).transpose();
  }
  std::vector<const Eigen::MatrixXd*> fwd_order, bwd_order;
  for (Eigen::Index t = 0; t < steps; ++t) {
    fwd_order.push_back(&inputs[static_cast<std::size_t>(t)]);
    bwd_order.push_back(&inputs[static_cast<std::size_t>(steps - 1 - t)]);
  }

  ForwardCache cache;
  cache.features.resize(2 * h, b);
  cache.features.topRows(h) = run_direction(net.forward, fwd_order, cache.forward);
  cache.features.bottomRows(h) = run_direction(net.backward, bwd_order, cache.backward);
  cache.pre_activation = net.head_weights * cache.features;
  cache.pre_activation.array() += net.head_bias;
  cache.prediction = cache.pre_activation.cwiseMax(0.0);
  return cache;
}

ForwardResult bilstm_forward(const BiLstmNetwork& net, const Sequence& sequence) {
  const Sequence* ptr = &sequence;
  ForwardResult r;
  r.cache = bilstm_forward_batch(net, std::span<const Sequence* const>(&ptr, 1));
  r.prediction = r.cache.prediction(0);
  return r;
}

double bilstm_predict(const BiLstmNetwork& net, const Sequence& sequence) {
  return bilstm_forward(net, sequence).prediction;
}

std::vector<double> bilstm_predict_all(const BiLstmNetwork& net, std::span<const Sequence> sequences) {
  std::vector<double> out;
  out.reserve(sequences.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < sequences.size(); start += kChunk) {
    std::vector<const Sequence*> ptrs;
    for (std::size_t k = start; k < std::min(sequences.size(), start + kChunk); ++k) ptrs.push_back(&sequences[k]);
    const auto cache = bilstm_forward_batch(net, ptrs);
    for (Eigen::Index k = 0; k < cache.prediction.size(); ++k) out.push_back(cache.prediction(k));
  }
  return out;
}

double loss_and_gradient(const BiLstmNetwork& net, std::span<const SequencePair* const> batch,
                         BiLstmNetwork* gradient) {
  std::vector<const Sequence*> seqs;
  seqs.reserve(batch.size());
  for (const auto* p : batch) seqs.push_back(&p->sequence);
  const ForwardCache cache = bilstm_forward_batch(net, seqs);
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::RowVectorXd residual(b);
  for (Eigen::Index k = 0; k < b; ++k) residual(k) = cache.prediction(k) - batch[static_cast<std::size_t>(k)]->target;
  const double loss = residual.squaredNorm() / static_cast<double>(b);
  if (!gradient) return loss;

  const int h = net.hidden_size();
  *gradient = BiLstmNetwork::zeros(net.input_size(), h);
  Eigen::RowVectorXd dpre = residual * (2.0 / static_cast<double>(b));
  for (Eigen::Index k = 0; k < b; ++k) {
    if (!(cache.pre_activation(k) > 0.0)) dpre(k) = 0.0;
  }
  gradient->head_weights = dpre * cache.features.transpose();
  gradient->head_bias = dpre.sum();
  const Eigen::MatrixXd dfeatures = net.head_weights.transpose() * dpre;
  backprop_direction(net.forward, cache.forward, dfeatures.topRows(h), gradient->forward);
  backprop_direction(net.backward, cache.backward, dfeatures.bottomRows(h), gradient->backward);
  return loss;
}

Eigen::VectorXd flatten_parameters(const BiLstmNetwork& net) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index at = 0;
  for (const LstmParams* p : {&net.forward, &net.backward}) {
    append(flat, at, p->weights);
    append(flat, at, p->bias);
  }
  append(flat, at, net.head_weights);
  flat(at++) = net.head_bias;
  return flat;
}

void assign_parameters(BiLstmNetwork& net, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(net.parameter_count())) {
    throw ConfigError("assign_parameters: size mismatch");
  }
  Eigen::Index at = 0;
  for (LstmParams* p : {&net.forward, &net.backward}) {
    extract(flat, at, p->weights);
    Eigen::MatrixXd bias = p->bias;
    extract(flat, at, bias);
    p->bias = bias;
  }
  Eigen::MatrixXd head = net.head_weights;
  extract(flat, at, head);
  net.head_weights = head;
  net.head_bias = flat(at++);
}

nlohmann::json network_to_json(const BiLstmNetwork& net) {
  nlohmann::json j;
  j["format"] = "icsoh-bilstm";
  j["version"] = 1;
  j["input_size"] = net.input_size();
  j["hidden_size"] = net.hidden_size();
  j["forward"] = params_to_json(net.forward);
  j["backward"] = params_to_json(net.backward);
  j["head_weights"] = std::vector<double>(net.head_weights.data(), net.head_weights.data() + net.head_weights.size());
  j["head_bias"] = net.head_bias;
  j["head_activation"] = "relu";
  return j;
}

BiLstmNetwork network_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "icsoh-bilstm") throw DataError("not a BiLSTM model file");
  const int d = j.at("input_size").get<int>();
  const int h = j.at("hidden_size").get<int>();
  BiLstmNetwork net = BiLstmNetwork::zeros(d, h);
  net.forward = params_from_json(j.at("forward"), d, h);
  net.backward = params_from_json(j.at("backward"), d, h);
  const auto head = j.at("head_weights").get<std::vector<double>>();
  if (static_cast<int>(head.size()) != 2 * h) throw DataError("model file: head width mismatch");
  for (std::size_t k = 0; k < head.size(); ++k) net.head_weights(static_cast<Eigen::Index>(k)) = head[k];
  net.head_bias = j.at("head_bias").get<double>();
  return net;
}

}  // namespace icsoh
