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
// Transducer negative log-likelihood on the (T x U+1) emission lattice, with
// the exact gradient w.r.t. the joint logits. All lattice arithmetic stays in
// log space. Blank id is 0 everywhere in this codebase.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segstream/matrix.hpp"

namespace segstream {

// Log-space forward/backward quantities for one segment's lattice.
// alpha(t,u): log-prob of consuming frames [0,t) fully... more precisely, of
// all partial paths ending at node (t,u). beta(t,u): log-prob of completing
// from (t,u), including the terminal blank at t = T-1.
template <typename T>
struct TransducerLattice {
  Matrix<T> alpha;      // T x (U+1)
  Matrix<T> beta;       // T x (U+1)
  Tensor3<T> log_probs; // T x (U+1) x V, log-softmax of the joint logits
  T log_like = neg_inf<T>();
};

template <typename T>
struct LossResult {
  T loss = T(0);        // negative log-likelihood, nats
  Tensor3<T> dlogits;   // d loss / d logits, same shape as logits
};

namespace detail {

template <typename T>
void validate_rnnt_inputs(const Tensor3<T>& logits, std::span<const int> labels) {
  if (logits.d0 < 1) throw std::invalid_argument("rnnt_loss: T_seg must be >= 1");
  if (logits.d2 < 2) throw std::invalid_argument("rnnt_loss: vocab size must be >= 2");
  if (logits.d1 != static_cast<int>(labels.size()) + 1) {
    throw std::invalid_argument("rnnt_loss: logits U+1 dimension (" +
                                std::to_string(logits.d1) + ") does not match labels (" +
                                std::to_string(labels.size()) + ")");
  }
  for (int label : labels) {
    if (label == kBlankId) throw std::invalid_argument("rnnt_loss: label equals blank id 0");
    if (label < 1 || label >= logits.d2) {
      throw std::invalid_argument("rnnt_loss: label " + std::to_string(label) +
                                  " out of range [1, " + std::to_string(logits.d2 - 1) + "]");
    }
  }
}

// Row-wise log-softmax over the vocab axis.
template <typename T>
Tensor3<T> log_softmax(const Tensor3<T>& logits) {
  Tensor3<T> out(logits.d0, logits.d1, logits.d2);
  const int v_size = logits.d2;
  for (int t = 0; t < logits.d0; ++t) {
    for (int u = 0; u < logits.d1; ++u) {
      const T* z = logits.row(t, u);
      T* lp = out.row(t, u);
      T zmax = z[0];
      for (int v = 1; v < v_size; ++v) zmax = std::max(zmax, z[v]);
      T sum = T(0);
      for (int v = 0; v < v_size; ++v) sum += std::exp(z[v] - zmax);
      const T log_z = zmax + std::log(sum);
      for (int v = 0; v < v_size; ++v) lp[v] = z[v] - log_z;
    }
  }
  return out;
}

}  // namespace detail

// Forward/backward recursions only; exposed for diagnostics and the
// consistency tests. rnnt_loss() builds on this.
template <typename T>
TransducerLattice<T> rnnt_lattice(const Tensor3<T>& logits, std::span<const int> labels) {
  detail::validate_rnnt_inputs(logits, labels);
  const int n_frames = logits.d0;
  const int n_pos = logits.d1;  // U + 1

  TransducerLattice<T> lat;
  lat.log_probs = detail::log_softmax(logits);
  const auto& lp = lat.log_probs;
  auto blank = [&](int t, int u) { return lp(t, u, kBlankId); };
  auto emit = [&](int t, int u) { return lp(t, u, labels[u]); };  // y_{u+1} at position u

  lat.alpha.setConstant(n_frames, n_pos, neg_inf<T>());
  lat.alpha(0, 0) = T(0);
  for (int t = 1; t < n_frames; ++t) lat.alpha(t, 0) = lat.alpha(t - 1, 0) + blank(t - 1, 0);
  for (int u = 1; u < n_pos; ++u) lat.alpha(0, u) = lat.alpha(0, u - 1) + emit(0, u - 1);
  for (int t = 1; t < n_frames; ++t) {
    for (int u = 1; u < n_pos; ++u) {
      lat.alpha(t, u) = log_add_exp(lat.alpha(t - 1, u) + blank(t - 1, u),
                                    lat.alpha(t, u - 1) + emit(t, u - 1));
    }
  }

  lat.beta.setConstant(n_frames, n_pos, neg_inf<T>());
  lat.beta(n_frames - 1, n_pos - 1) = blank(n_frames - 1, n_pos - 1);
  for (int t = n_frames - 2; t >= 0; --t) {
    lat.beta(t, n_pos - 1) = lat.beta(t + 1, n_pos - 1) + blank(t, n_pos - 1);
  }
  for (int u = n_pos - 2; u >= 0; --u) {
    lat.beta(n_frames - 1, u) = lat.beta(n_frames - 1, u + 1) + emit(n_frames - 1, u);
  }
  for (int t = n_frames - 2; t >= 0; --t) {
    for (int u = n_pos - 2; u >= 0; --u) {
      lat.beta(t, u) = log_add_exp(lat.beta(t + 1, u) + blank(t, u),
                                   lat.beta(t, u + 1) + emit(t, u));
    }
  }

  lat.log_like = lat.beta(0, 0);
  return lat;
}

// Negative log-likelihood of the label sequence plus its exact gradient
// w.r.t. the pre-softmax joint logits.
//
// The gradient combines lattice occupancies with the softmax Jacobian:
//   d loss / d z(t,u,v) = p(v|t,u) * G(t,u) - g(t,u,v)
// where g(t,u,v) is the posterior weight of transition v out of node (t,u)
// and G(t,u) = sum_v g(t,u,v) = exp(alpha + beta - log_like) is the node
// occupancy. Rows therefore sum to zero.
template <typename T>
LossResult<T> rnnt_loss(const Tensor3<T>& logits, std::span<const int> labels) {
  TransducerLattice<T> lat = rnnt_lattice(logits, labels);
  const int n_frames = logits.d0;
  const int n_pos = logits.d1;
  const int v_size = logits.d2;
  const T log_like = lat.log_like;

  LossResult<T> res;
  res.loss = -log_like;
  res.dlogits = Tensor3<T>(n_frames, n_pos, v_size);

  for (int t = 0; t < n_frames; ++t) {
    for (int u = 0; u < n_pos; ++u) {
      const T occupancy = std::exp(lat.alpha(t, u) + lat.beta(t, u) - log_like);
      if (occupancy == T(0)) continue;  // unreachable node, zero gradient row
      const T* lp = lat.log_probs.row(t, u);
      T* grad = res.dlogits.row(t, u);

      // Posterior weight of the blank transition out of (t,u). The terminal
      // node's blank has no successor beta term.
      T g_blank;
      if (t == n_frames - 1 && u == n_pos - 1) {
        g_blank = std::exp(lat.alpha(t, u) + lp[kBlankId] - log_like);
      } else if (t < n_frames - 1) {
        g_blank = std::exp(lat.alpha(t, u) + lp[kBlankId] + lat.beta(t + 1, u) - log_like);
      } else {
        g_blank = T(0);
      }
      T g_emit = T(0);
      if (u < n_pos - 1) {
        g_emit = std::exp(lat.alpha(t, u) + lp[labels[u]] + lat.beta(t, u + 1) - log_like);
      }

      for (int v = 0; v < v_size; ++v) grad[v] = std::exp(lp[v]) * occupancy;
      grad[kBlankId] -= g_blank;
      if (u < n_pos - 1) grad[labels[u]] -= g_emit;
    }
  }
  return res;
}

// Exhaustive alignment enumeration. Walks every monotonic lattice path from
// (0,0) to the terminal blank at (T-1, U) and sums path probabilities in the
// probability domain. Deliberately shares no code with the recursions above;
// this is the verification oracle for rnnt_loss.
template <typename T>
T rnnt_loss_bruteforce(const Tensor3<T>& logits, std::span<const int> labels) {
  detail::validate_rnnt_inputs(logits, labels);
  const int n_frames = logits.d0;
  const int n_labels = static_cast<int>(labels.size());
  if (n_frames + n_labels > 12) {
    throw std::invalid_argument("rnnt_loss_bruteforce: instance too large (T_seg + U = " +
                                std::to_string(n_frames + n_labels) + " > 12)");
  }
  Tensor3<T> lp = detail::log_softmax(logits);

  double total = 0.0;
  // Iterative DFS over (t, u, accumulated log-prob).
  struct Node {
    int t, u;
    double logp;
  };
  std::vector<Node> stack;
  stack.push_back({0, 0, 0.0});
  while (!stack.empty()) {
    Node n = stack.back();
    stack.pop_back();
    if (n.t == n_frames - 1 && n.u == n_labels) {
      total += std::exp(n.logp + static_cast<double>(lp(n.t, n.u, kBlankId)));
      continue;
    }
    if (n.t < n_frames - 1) {
      stack.push_back({n.t + 1, n.u, n.logp + static_cast<double>(lp(n.t, n.u, kBlankId))});
    }
    if (n.u < n_labels) {
      stack.push_back({n.t, n.u + 1, n.logp + static_cast<double>(lp(n.t, n.u, labels[n.u]))});
    }
  }
  return static_cast<T>(-std::log(total));
}

// Self-check of the analytic logit gradient against central finite
// differences on a random instance. Returns the worst relative error and the
// worst gradient-row sum.
struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_row_sum = 0.0;
};

GradCheckReport loss_grad_check(int n_frames, int n_labels, int vocab_size, uint64_t seed);

}  // namespace segstream
