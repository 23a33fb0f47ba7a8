// Copyright 2026 The segstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// The transducer network: unidirectional LSTM encoder, LSTM prediction
// network and a feed-forward joint with tanh hidden layer. Forward passes
// cache what the hand-written backward passes need; the scalar type is a
// template parameter so the training path runs in float while gradient
// checks instantiate the same code in double.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segstream/matrix.hpp"
#include "segstream/rng.hpp"

namespace segstream {

struct ModelConfig {
  int input_dim = 192;  // 3 x 64 stacked log-mel bins; smaller for synthetic tasks
  int encoder_layers = 2;
  int encoder_units = 64;
  int prediction_layers = 1;
  int prediction_units = 64;
  int joint_units = 64;
  int vocab_size = 10;  // output units, blank id = 0

  void validate() const {
    if (input_dim < 1 || encoder_layers < 1 || encoder_units < 1 || prediction_layers < 1 ||
        prediction_units < 1 || joint_units < 1) {
      throw std::invalid_argument("ModelConfig: all dimensions must be >= 1");
    }
    if (vocab_size < 2) throw std::invalid_argument("ModelConfig: vocab_size must be >= 2");
  }

  bool operator==(const ModelConfig&) const = default;
};

// One LSTM layer. Gate rows are stacked [input, forget, cell, output], each
// block of `units` rows.
template <typename T>
struct LstmParams {
  Matrix<T> w_in;   // 4H x D_in
  Matrix<T> w_rec;  // 4H x H
  Vector<T> b;      // 4H
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<LstmParams<T>> encoder;
  std::vector<LstmParams<T>> prediction;
  Matrix<T> embedding;  // V x prediction_units; row 0 doubles as the start token
  Matrix<T> joint_w;    // joint_units x (encoder_units + prediction_units)
  Vector<T> joint_b;
  Matrix<T> out_w;      // V x joint_units
  Vector<T> out_b;

  static ModelParams zeros(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config = config;
    auto zero_layer = [](int in, int units) {
      LstmParams<T> l;
      l.w_in = Matrix<T>::Zero(4 * units, in);
      l.w_rec = Matrix<T>::Zero(4 * units, units);
      l.b = Vector<T>::Zero(4 * units);
      return l;
    };
    for (int l = 0; l < config.encoder_layers; ++l) {
      p.encoder.push_back(zero_layer(l == 0 ? config.input_dim : config.encoder_units,
                                     config.encoder_units));
    }
    for (int l = 0; l < config.prediction_layers; ++l) {
      p.prediction.push_back(zero_layer(config.prediction_units, config.prediction_units));
    }
    p.embedding = Matrix<T>::Zero(config.vocab_size, config.prediction_units);
    p.joint_w = Matrix<T>::Zero(config.joint_units, config.encoder_units + config.prediction_units);
    p.joint_b = Vector<T>::Zero(config.joint_units);
    p.out_w = Matrix<T>::Zero(config.vocab_size, config.joint_units);
    p.out_b = Vector<T>::Zero(config.vocab_size);
    return p;
  }

  // Visits every trainable tensor in a fixed order. Vectors are visited as
  // single-column blocks; `f` must accept (name, Eigen object&).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (size_t l = 0; l < encoder.size(); ++l) {
      const std::string base = "enc." + std::to_string(l) + ".";
      f(base + "w_in", encoder[l].w_in);
      f(base + "w_rec", encoder[l].w_rec);
      f(base + "b", encoder[l].b);
    }
    for (size_t l = 0; l < prediction.size(); ++l) {
      const std::string base = "pred." + std::to_string(l) + ".";
      f(base + "w_in", prediction[l].w_in);
      f(base + "w_rec", prediction[l].w_rec);
      f(base + "b", prediction[l].b);
    }
    f("embedding", embedding);
    f("joint.w", joint_w);
    f("joint.b", joint_b);
    f("out.w", out_w);
    f("out.b", out_b);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](const std::string& name, auto& t) { f(name, std::as_const(t)); });
  }

  template <typename To>
  ModelParams<To> cast() const {
    ModelParams<To> out;
    out.config = config;
    auto cast_lstm = [](const LstmParams<T>& l) {
      LstmParams<To> o;
      o.w_in = l.w_in.template cast<To>();
      o.w_rec = l.w_rec.template cast<To>();
      o.b = l.b.template cast<To>();
      return o;
    };
    for (const auto& l : encoder) out.encoder.push_back(cast_lstm(l));
    for (const auto& l : prediction) out.prediction.push_back(cast_lstm(l));
    out.embedding = embedding.template cast<To>();
    out.joint_w = joint_w.template cast<To>();
    out.joint_b = joint_b.template cast<To>();
    out.out_w = out_w.template cast<To>();
    out.out_b = out_b.template cast<To>();
    return out;
  }
};

// Uniform init in [-k, k] with k = 1/sqrt(fan_in); fan_in is the column
// count of the tensor's transform (input + recurrent width for LSTM biases).
// Forget-gate biases are then pinned to 1.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed) {
  ModelParams<T> p = ModelParams<T>::zeros(config);
  Rng rng(seed);
  auto fill_uniform = [&rng](auto& tensor, int fan_in) {
    const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
        tensor(i, j) = static_cast<T>(rng.uniform_range(-k, k));
      }
    }
  };
  auto init_lstm = [&](LstmParams<T>& l) {
    const int units = static_cast<int>(l.w_rec.cols());
    fill_uniform(l.w_in, static_cast<int>(l.w_in.cols()));
    fill_uniform(l.w_rec, units);
    fill_uniform(l.b, static_cast<int>(l.w_in.cols()) + units);
    l.b.segment(units, units).setConstant(T(1));  // forget gates
  };
  for (auto& l : p.encoder) init_lstm(l);
  for (auto& l : p.prediction) init_lstm(l);
  fill_uniform(p.embedding, static_cast<int>(p.embedding.cols()));
  fill_uniform(p.joint_w, static_cast<int>(p.joint_w.cols()));
  fill_uniform(p.joint_b, static_cast<int>(p.joint_w.cols()));
  fill_uniform(p.out_w, static_cast<int>(p.out_w.cols()));
  fill_uniform(p.out_b, static_cast<int>(p.out_w.cols()));
  return p;
}

// ---------------------------------------------------------------------------
// LSTM stack forward/backward
// ---------------------------------------------------------------------------

template <typename T>
struct LstmCache {
  Matrix<T> gates;   // T x 4H, activated (i, f, g, o)
  Matrix<T> c;       // T x H
  Matrix<T> tanh_c;  // T x H
  Matrix<T> h;       // T x H
};

template <typename T>
struct LstmState {
  Vector<T> h;
  Vector<T> c;
};

namespace detail {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Runs one LSTM layer over all rows of `input` from a zero initial state.
template <typename T>
LstmCache<T> lstm_forward(const LstmParams<T>& layer, const Matrix<T>& input) {
  const int n_steps = static_cast<int>(input.rows());
  const int units = static_cast<int>(layer.w_rec.cols());

  LstmCache<T> cache;
  cache.gates.resize(n_steps, 4 * units);
  cache.c.resize(n_steps, units);
  cache.tanh_c.resize(n_steps, units);
  cache.h.resize(n_steps, units);

  // Input contributions for all steps in one product.
  Matrix<T> pre_all = input * layer.w_in.transpose();
  pre_all.rowwise() += layer.b.transpose();

  Vector<T> pre(4 * units);
  for (int t = 0; t < n_steps; ++t) {
    pre = pre_all.row(t);
    if (t > 0) pre.noalias() += layer.w_rec * cache.h.row(t - 1).transpose();

    auto gates_row = cache.gates.row(t);
    // sigmoid on (i, f), tanh on g, sigmoid on o.
    gates_row.segment(0, 2 * units) =
        ((-pre.segment(0, 2 * units).array()).exp() + T(1)).inverse();
    gates_row.segment(2 * units, units) = pre.segment(2 * units, units).array().tanh();
    gates_row.segment(3 * units, units) =
        ((-pre.segment(3 * units, units).array()).exp() + T(1)).inverse();

    auto i_gate = gates_row.segment(0, units).array();
    auto f_gate = gates_row.segment(units, units).array();
    auto g_cell = gates_row.segment(2 * units, units).array();
    auto o_gate = gates_row.segment(3 * units, units).array();
    if (t > 0) {
      cache.c.row(t) = f_gate * cache.c.row(t - 1).array() + i_gate * g_cell;
    } else {
      cache.c.row(t) = i_gate * g_cell;
    }
    cache.tanh_c.row(t) = cache.c.row(t).array().tanh();
    cache.h.row(t) = o_gate * cache.tanh_c.row(t).array();
  }
  return cache;
}

// Backpropagation through one layer. `d_h` holds dLoss/dh per step and is
// consumed; returns dLoss/dinput and accumulates parameter gradients.
template <typename T>
Matrix<T> lstm_backward(const LstmParams<T>& layer, const Matrix<T>& input,
                        const LstmCache<T>& cache, const Matrix<T>& d_h_in,
                        LstmParams<T>& grads) {
  const int n_steps = static_cast<int>(input.rows());
  const int units = static_cast<int>(layer.w_rec.cols());

  Matrix<T> d_pre(n_steps, 4 * units);
  Vector<T> dh = Vector<T>::Zero(units);
  Vector<T> dc_rec = Vector<T>::Zero(units);
  Vector<T> dc(units);

  for (int t = n_steps - 1; t >= 0; --t) {
    dh += d_h_in.row(t).transpose();

    auto i_gate = cache.gates.row(t).segment(0, units).array();
    auto f_gate = cache.gates.row(t).segment(units, units).array();
    auto g_cell = cache.gates.row(t).segment(2 * units, units).array();
    auto o_gate = cache.gates.row(t).segment(3 * units, units).array();
    auto tc = cache.tanh_c.row(t).array();

    dc = (dh.transpose().array() * o_gate * (T(1) - tc.square()) +
          dc_rec.transpose().array())
             .transpose();
    auto d_pre_row = d_pre.row(t);
    d_pre_row.segment(0, units) =
        dc.transpose().array() * g_cell * i_gate * (T(1) - i_gate);
    if (t > 0) {
      d_pre_row.segment(units, units) = dc.transpose().array() *
                                        cache.c.row(t - 1).array() * f_gate *
                                        (T(1) - f_gate);
    } else {
      d_pre_row.segment(units, units).setZero();
    }
    d_pre_row.segment(2 * units, units) =
        dc.transpose().array() * i_gate * (T(1) - g_cell.square());
    d_pre_row.segment(3 * units, units) =
        (dh.transpose().array() * tc) * o_gate * (T(1) - o_gate);

    dc_rec = (dc.transpose().array() * f_gate).transpose();
    if (t > 0) {
      dh.noalias() = layer.w_rec.transpose() * d_pre_row.transpose();
    }
  }

  grads.w_in.noalias() += d_pre.transpose() * input;
  if (n_steps > 1) {
    grads.w_rec.noalias() +=
        d_pre.bottomRows(n_steps - 1).transpose() * cache.h.topRows(n_steps - 1);
  }
  grads.b.noalias() += d_pre.colwise().sum().transpose();
  return d_pre * layer.w_in;
}

// Single-step evaluation used by the decoders; state is updated in place.
template <typename T>
Vector<T> lstm_step(const LstmParams<T>& layer, const Vector<T>& input, LstmState<T>& state) {
  const int units = static_cast<int>(layer.w_rec.cols());
  Vector<T> pre = layer.w_in * input + layer.b;
  if (state.h.size() > 0) pre.noalias() += layer.w_rec * state.h;
  Vector<T> h(units), c(units);
  for (int j = 0; j < units; ++j) {
    const T i_gate = sigmoid(pre[j]);
    const T f_gate = sigmoid(pre[units + j]);
    const T g_cell = std::tanh(pre[2 * units + j]);
    const T o_gate = sigmoid(pre[3 * units + j]);
    const T c_prev = state.c.size() > 0 ? state.c[j] : T(0);
    c[j] = f_gate * c_prev + i_gate * g_cell;
    h[j] = o_gate * std::tanh(c[j]);
  }
  state.h = h;
  state.c = c;
  return h;
}

template <typename T>
std::vector<LstmCache<T>> lstm_stack_forward(const std::vector<LstmParams<T>>& layers,
                                             const Matrix<T>& input) {
  std::vector<LstmCache<T>> caches;
  caches.reserve(layers.size());
  const Matrix<T>* x = &input;
  for (const auto& layer : layers) {
    caches.push_back(lstm_forward(layer, *x));
    x = &caches.back().h;
  }
  return caches;
}

// Returns dLoss/dinput of the bottom layer (empty unless want_d_input).
template <typename T>
Matrix<T> lstm_stack_backward(const std::vector<LstmParams<T>>& layers, const Matrix<T>& input,
                              const std::vector<LstmCache<T>>& caches, Matrix<T> d_top,
                              std::vector<LstmParams<T>>& grads, bool want_d_input) {
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const Matrix<T>& layer_input = l == 0 ? input : caches[l - 1].h;
    Matrix<T> d_below = lstm_backward(layers[l], layer_input, caches[l], d_top, grads[l]);
    if (l == 0 && !want_d_input) return Matrix<T>();
    d_top = std::move(d_below);
  }
  return d_top;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

template <typename T>
struct EncoderForward {
  std::vector<LstmCache<T>> caches;
  const Matrix<T>& outputs() const { return caches.back().h; }  // T x encoder_units
};

// h_t depends on x_1..x_t only; zero initial state.
template <typename T>
EncoderForward<T> encode(const ModelParams<T>& params, const Matrix<T>& features) {
  if (features.cols() != params.config.input_dim) {
    throw std::invalid_argument("encode: feature dim " + std::to_string(features.cols()) +
                                " != config input_dim " +
                                std::to_string(params.config.input_dim));
  }
  if (features.rows() < 1) throw std::invalid_argument("encode: empty input");
  EncoderForward<T> fwd;
  fwd.caches = detail::lstm_stack_forward(params.encoder, features);
  return fwd;
}

// ---------------------------------------------------------------------------
// Prediction network
// ---------------------------------------------------------------------------

template <typename T>
struct PredictionForward {
  Matrix<T> inputs;  // (U+1) x prediction_units, embedded start + labels
  std::vector<LstmCache<T>> caches;
  const Matrix<T>& outputs() const { return caches.back().h; }  // (U+1) x units
};

// Row 0 is the start state (blank embedding, empty history); row j conditions
// on y_1..y_j.
template <typename T>
PredictionForward<T> predict_labels(const ModelParams<T>& params, std::span<const int> labels) {
  const int vocab = params.config.vocab_size;
  for (int y : labels) {
    if (y < 1 || y >= vocab) {
      throw std::invalid_argument("predict_labels: label " + std::to_string(y) +
                                  " out of range [1, " + std::to_string(vocab - 1) + "]");
    }
  }
  PredictionForward<T> fwd;
  fwd.inputs.resize(static_cast<int>(labels.size()) + 1, params.config.prediction_units);
  fwd.inputs.row(0) = params.embedding.row(kBlankId);
  for (size_t j = 0; j < labels.size(); ++j) {
    fwd.inputs.row(static_cast<int>(j) + 1) = params.embedding.row(labels[j]);
  }
  fwd.caches = detail::lstm_stack_forward(params.prediction, fwd.inputs);
  return fwd;
}

// Streaming form of the prediction network: feed one label (kBlankId plays
// the start token) and advance the per-layer states. Matches predict_labels
// row for row.
template <typename T>
Vector<T> prediction_step(const ModelParams<T>& params, int label,
                          std::vector<LstmState<T>>& states) {
  if (states.empty()) states.resize(params.prediction.size());
  if (label < 0 || label >= params.config.vocab_size) {
    throw std::invalid_argument("prediction_step: label out of range");
  }
  Vector<T> x = params.embedding.row(label).transpose();
  for (size_t l = 0; l < params.prediction.size(); ++l) {
    x = detail::lstm_step(params.prediction[l], x, states[l]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Joint network
// ---------------------------------------------------------------------------

template <typename T>
struct JointForward {
  Tensor3<T> logits;  // T_seg x (U+1) x V
  Matrix<T> act;      // (T_seg*(U+1)) x joint_units, tanh activations
};

// z[t,u,:] = out_w * tanh(w_h h_t + w_g g_u + b) + out_b. Pointwise in (t,u);
// the softmax lives in the loss, not here.
template <typename T>
JointForward<T> joint(const ModelParams<T>& params, const Matrix<T>& h_rows,
                      const Matrix<T>& g_rows) {
  const auto& cfg = params.config;
  if (h_rows.cols() != cfg.encoder_units || g_rows.cols() != cfg.prediction_units) {
    throw std::invalid_argument("joint: input widths do not match config");
  }
  const int n_frames = static_cast<int>(h_rows.rows());
  const int n_pos = static_cast<int>(g_rows.rows());
  const int j_units = cfg.joint_units;

  const auto w_h = params.joint_w.leftCols(cfg.encoder_units);
  const auto w_g = params.joint_w.rightCols(cfg.prediction_units);
  Matrix<T> a = h_rows * w_h.transpose();  // T_seg x J
  Matrix<T> b = g_rows * w_g.transpose();  // (U+1) x J
  b.rowwise() += params.joint_b.transpose();

  JointForward<T> fwd;
  fwd.act.resize(n_frames * n_pos, j_units);
  for (int t = 0; t < n_frames; ++t) {
    for (int u = 0; u < n_pos; ++u) {
      fwd.act.row(t * n_pos + u) = (a.row(t) + b.row(u)).array().tanh();
    }
  }
  Matrix<T> z = fwd.act * params.out_w.transpose();
  z.rowwise() += params.out_b.transpose();

  fwd.logits = Tensor3<T>(n_frames, n_pos, cfg.vocab_size);
  for (int t = 0; t < n_frames; ++t) {
    for (int u = 0; u < n_pos; ++u) {
      for (int v = 0; v < cfg.vocab_size; ++v) fwd.logits(t, u, v) = z(t * n_pos + u, v);
    }
  }
  return fwd;
}

template <typename T>
struct JointBackward {
  Matrix<T> d_h;  // T_seg x encoder_units
  Matrix<T> d_g;  // (U+1) x prediction_units
};

template <typename T>
JointBackward<T> joint_backward(const ModelParams<T>& params, const Matrix<T>& h_rows,
                                const Matrix<T>& g_rows, const JointForward<T>& fwd,
                                const Tensor3<T>& d_logits, ModelParams<T>& grads) {
  const auto& cfg = params.config;
  const int n_frames = static_cast<int>(h_rows.rows());
  const int n_pos = static_cast<int>(g_rows.rows());

  Eigen::Map<const Matrix<T>> dz(d_logits.data.data(), n_frames * n_pos, cfg.vocab_size);
  grads.out_w.noalias() += dz.transpose() * fwd.act;
  grads.out_b.noalias() += dz.colwise().sum().transpose();

  Matrix<T> d_pre = dz * params.out_w;  // (T_seg*(U+1)) x J
  d_pre.array() *= (T(1) - fwd.act.array().square());

  // Collapse the (t,u) grid onto its two axes.
  Matrix<T> d_a = Matrix<T>::Zero(n_frames, cfg.joint_units);
  Matrix<T> d_b = Matrix<T>::Zero(n_pos, cfg.joint_units);
  for (int t = 0; t < n_frames; ++t) {
    for (int u = 0; u < n_pos; ++u) {
      d_a.row(t) += d_pre.row(t * n_pos + u);
      d_b.row(u) += d_pre.row(t * n_pos + u);
    }
  }

  const auto w_h = params.joint_w.leftCols(cfg.encoder_units);
  const auto w_g = params.joint_w.rightCols(cfg.prediction_units);
  grads.joint_w.leftCols(cfg.encoder_units).noalias() += d_a.transpose() * h_rows;
  grads.joint_w.rightCols(cfg.prediction_units).noalias() += d_b.transpose() * g_rows;
  grads.joint_b.noalias() += d_b.colwise().sum().transpose();

  JointBackward<T> back;
  back.d_h = d_a * w_h;
  back.d_g = d_b * w_g;
  return back;
}

// Backward through the prediction network for one segment; accumulates LSTM
// and embedding gradients.
template <typename T>
void prediction_backward(const ModelParams<T>& params, const PredictionForward<T>& fwd,
                         std::span<const int> labels, const Matrix<T>& d_g,
                         ModelParams<T>& grads) {
  Matrix<T> d_inputs = detail::lstm_stack_backward(params.prediction, fwd.inputs, fwd.caches,
                                                   d_g, grads.prediction, true);
  grads.embedding.row(kBlankId) += d_inputs.row(0);
  for (size_t j = 0; j < labels.size(); ++j) {
    grads.embedding.row(labels[j]) += d_inputs.row(static_cast<int>(j) + 1);
  }
}

// Backward through the encoder given dLoss/dh accumulated over all segments.
// Returns dLoss/dx when requested.
template <typename T>
Matrix<T> encoder_backward(const ModelParams<T>& params, const Matrix<T>& features,
                           const EncoderForward<T>& fwd, Matrix<T> d_h, ModelParams<T>& grads,
                           bool want_d_input) {
  return detail::lstm_stack_backward(params.encoder, features, fwd.caches, std::move(d_h),
                                     grads.encoder, want_d_input);
}

// ---------------------------------------------------------------------------
// Checkpoints (float params only; magic "SGCK")
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelParams<float> params;
  int64_t step = 0;
};

void save_checkpoint(const ModelParams<float>& params, int64_t step,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segstream
