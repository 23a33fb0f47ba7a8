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

#include "segstream/dataset.hpp"
#include "segstream/decode.hpp"

namespace {

using namespace segstream;

void BM_BeamDecode(benchmark::State& state) {
  ContextCueSpec spec;
  spec.rng_seed = 33;
  auto records = generate_context_task(spec, 1);
  ModelConfig config;
  config.input_dim = spec.feature_dim();
  config.encoder_layers = 2;
  config.encoder_units = 64;
  config.prediction_layers = 1;
  config.prediction_units = 64;
  config.joint_units = 64;
  config.vocab_size = spec.vocab_size();
  auto params = init_params<float>(config, 9);

  const int beam_width = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto out = decode_utterance(params, records.front(), beam_width);
    benchmark::DoNotOptimize(out.size());
  }
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(4)->Arg(8);

}  // namespace
