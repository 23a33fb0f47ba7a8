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

#include <benchmark/benchmark.h>

#include "segstream/rng.hpp"
#include "segstream/rnnt_loss.hpp"

namespace {

using namespace segstream;

template <typename T>
Tensor3<T> random_logits(int n_frames, int n_pos, int vocab, uint64_t seed) {
  Rng rng(seed);
  Tensor3<T> z(n_frames, n_pos, vocab);
  for (auto& x : z.data) x = static_cast<T>(rng.normal());
  return z;
}

void BM_RnntLossForwardBackward(benchmark::State& state) {
  const int n_frames = static_cast<int>(state.range(0));
  const int n_labels = static_cast<int>(state.range(1));
  const int vocab = 10;
  auto logits = random_logits<float>(n_frames, n_labels + 1, vocab, 1);
  std::vector<int> labels(n_labels);
  Rng rng(2);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(1, vocab - 1));
  for (auto _ : state) {
    auto res = rnnt_loss<float>(logits, labels);
    benchmark::DoNotOptimize(res.loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n_frames) * (n_labels + 1) *
                          vocab);
}
BENCHMARK(BM_RnntLossForwardBackward)->Args({20, 8})->Args({60, 12})->Args({120, 24});

void BM_RnntLossBruteforce(benchmark::State& state) {
  const int n_frames = 6;
  const int n_labels = 4;
  auto logits = random_logits<double>(n_frames, n_labels + 1, 5, 3);
  std::vector<int> labels = {1, 2, 3, 4};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rnnt_loss_bruteforce<double>(logits, labels));
  }
}
BENCHMARK(BM_RnntLossBruteforce);

}  // namespace
