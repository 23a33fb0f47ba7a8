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

#include "segstream/rnnt_loss.hpp"

#include <cmath>

#include "segstream/rng.hpp"

namespace segstream {

GradCheckReport loss_grad_check(int n_frames, int n_labels, int vocab_size, uint64_t seed) {
  Rng rng(seed);
  Tensor3<double> logits(n_frames, n_labels + 1, vocab_size);
  for (auto& z : logits.data) z = rng.normal(0.0, 1.0);
  std::vector<int> labels(n_labels);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(1, vocab_size - 1));

  LossResult<double> res = rnnt_loss<double>(logits, labels);

  GradCheckReport report;
  const double step = 1e-6;
  for (int t = 0; t < logits.d0; ++t) {
    for (int u = 0; u < logits.d1; ++u) {
      double row_sum = 0.0;
      for (int v = 0; v < logits.d2; ++v) {
        row_sum += res.dlogits(t, u, v);
        Tensor3<double> perturbed = logits;
        perturbed(t, u, v) += step;
        const double up = rnnt_loss<double>(perturbed, labels).loss;
        perturbed(t, u, v) -= 2.0 * step;
        const double down = rnnt_loss<double>(perturbed, labels).loss;
        const double fd = (up - down) / (2.0 * step);
        const double analytic = res.dlogits(t, u, v);
        const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
        report.max_rel_err = std::max(report.max_rel_err, std::abs(fd - analytic) / denom);
      }
      report.max_row_sum = std::max(report.max_row_sum, std::abs(row_sum));
    }
  }
  return report;
}

}  // namespace segstream
