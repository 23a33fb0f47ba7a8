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

#include "segstream/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include "segstream/rng.hpp"

namespace segstream {

namespace {

struct TensorRef {
  std::string name;
  float* data;
  size_t size;
};

std::vector<TensorRef> tensor_refs(ModelParams<float>& p) {
  std::vector<TensorRef> refs;
  p.for_each_tensor([&](const std::string& name, auto& t) {
    refs.push_back({name, t.data(), static_cast<size_t>(t.size())});
  });
  return refs;
}

// splitmix64 finalizer; mixes two seeds into one decorrelated stream id.
uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Copies an utterance's features and applies SpecAugment per training unit:
// the whole utterance in full-utterance mode, each transcribed segment
// independently in segmented mode. Mask rate per frame is identical either
// way (adaptive multiplicity).
MatrixF augmented_features(const UtteranceRecord& record, const AugmentPolicy& policy,
                           TrainMode mode, uint64_t unit_seed) {
  MatrixF feats = record.features;
  const int copies = feats.cols() % 3 == 0 ? 3 : 1;
  if (mode == TrainMode::full_utterance) {
    spec_augment_matrix(feats, policy, unit_seed, copies);
  } else {
    int slot = 0;
    for (const auto& seg : record.segments) {
      if (!seg.transcribed()) continue;
      MatrixF block = feats.middleRows(seg.t_start, seg.n_frames());
      spec_augment_matrix(block, policy, mix_seed(unit_seed, slot++), copies);
      feats.middleRows(seg.t_start, seg.n_frames()) = block;
    }
  }
  return feats;
}

// Runs fn(i) for i in [0, n) across up to `threads` workers. Results are
// produced into caller-indexed storage, so ordering stays deterministic.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int n_workers = std::max(1, std::min(threads, n));
  if (n_workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += n_workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

TrainState make_train_state(const ModelConfig& config, uint64_t seed) {
  TrainState state;
  state.params = init_params<float>(config, seed);
  state.m = ModelParams<float>::zeros(config);
  state.v = ModelParams<float>::zeros(config);
  state.seed = seed;
  return state;
}

void adam_step(TrainState& state, const ModelParams<float>& grads, const LrSchedule& schedule,
               const AdamConfig& adam, double max_grad_norm) {
  auto params = tensor_refs(state.params);
  auto m = tensor_refs(state.m);
  auto v = tensor_refs(state.v);
  auto g = tensor_refs(const_cast<ModelParams<float>&>(grads));

  for (size_t k = 0; k < g.size(); ++k) {
    for (size_t i = 0; i < g[k].size; ++i) {
      if (!std::isfinite(g[k].data[i])) {
        throw std::runtime_error("adam_step: non-finite gradient in tensor " + g[k].name +
                                 " at step " + std::to_string(state.step + 1));
      }
    }
  }

  double clip_scale = 1.0;
  if (max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& t : g) {
      for (size_t i = 0; i < t.size; ++i) sq += static_cast<double>(t.data[i]) * t.data[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm) clip_scale = max_grad_norm / norm;
  }

  const int64_t t_step = state.step + 1;
  const double lr = schedule.lr(t_step);
  const double bias1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t_step));
  const double bias2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t_step));

  for (size_t k = 0; k < params.size(); ++k) {
    float* p = params[k].data;
    float* mk = m[k].data;
    float* vk = v[k].data;
    const float* gk = g[k].data;
    for (size_t i = 0; i < params[k].size; ++i) {
      const double grad = static_cast<double>(gk[i]) * clip_scale;
      const double m_new = adam.beta1 * mk[i] + (1.0 - adam.beta1) * grad;
      const double v_new = adam.beta2 * vk[i] + (1.0 - adam.beta2) * grad * grad;
      mk[i] = static_cast<float>(m_new);
      vk[i] = static_cast<float>(v_new);
      const double m_hat = m_new / bias1;
      const double v_hat = v_new / bias2;
      p[i] = static_cast<float>(p[i] - lr * m_hat / (std::sqrt(v_hat) + adam.epsilon));
    }
  }
  state.step = t_step;
}

double dataset_loss(const ModelParams<float>& params,
                    const std::vector<UtteranceRecord>& records, TrainMode mode, int threads) {
  if (records.empty()) throw std::invalid_argument("dataset_loss: empty record set");
  std::vector<double> losses(records.size(), 0.0);
  LossOptions opts;
  opts.want_param_grads = false;
  parallel_for(static_cast<int>(records.size()), resolve_threads(threads), [&](int i) {
    losses[i] =
        utterance_loss<float>(params, records[i].features, records[i].segments, mode, opts).loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(records.size());
}

TrainResult train(const std::vector<UtteranceRecord>& train_records,
                  const std::vector<UtteranceRecord>& dev_records, TrainState& state,
                  const LrSchedule& schedule, const TrainOptions& options) {
  using clock = std::chrono::steady_clock;
  if (train_records.empty()) throw std::invalid_argument("train: empty training manifest");
  for (const auto& r : train_records) {
    if (r.n_labeled() == 0) {
      throw std::invalid_argument("train: utterance '" + r.id + "' has no labeled segment");
    }
  }
  const int threads = resolve_threads(options.threads);
  const int batch = std::max(1, options.batch_size);

  std::ofstream log_file;
  if (!options.log_path.empty()) {
    log_file.open(options.log_path, state.step > 0 ? std::ios::app : std::ios::trunc);
    if (!log_file) {
      throw std::runtime_error("train: cannot open log " + options.log_path.string());
    }
  }
  if (!options.checkpoint_dir.empty()) {
    std::filesystem::create_directories(options.checkpoint_dir);
  }

  TrainResult result;
  std::vector<UtteranceLossResult<float>> batch_results(batch);
  std::vector<const UtteranceRecord*> batch_records(batch);
  std::vector<MatrixF> batch_features(batch);

  double wall_ms_sum = 0.0, fwd_ms_sum = 0.0, bwd_ms_sum = 0.0;
  int64_t measured_steps = 0;

  auto save_and_score = [&](int64_t step) {
    if (options.checkpoint_dir.empty()) return;
    std::ostringstream name;
    name << "step_" << std::setw(7) << std::setfill('0') << step << ".ckpt";
    CheckpointEntry entry;
    entry.path = options.checkpoint_dir / name.str();
    entry.step = step;
    save_checkpoint(state.params, step, entry.path);
    entry.dev_loss = dev_records.empty()
                         ? 0.0
                         : dataset_loss(state.params, dev_records, options.mode, threads);
    result.checkpoints.push_back(entry);
    while (static_cast<int>(result.checkpoints.size()) > std::max(1, options.keep_checkpoints)) {
      std::error_code ec;
      std::filesystem::remove(result.checkpoints.front().path, ec);
      result.checkpoints.erase(result.checkpoints.begin());
    }
  };

  while (state.step < options.total_steps) {
    const int64_t step_index = state.step;  // batch derivation is stateless in the step
    const auto step_start = clock::now();

    Rng batch_rng(mix_seed(state.seed, static_cast<uint64_t>(step_index)));
    for (int i = 0; i < batch; ++i) {
      batch_records[i] =
          &train_records[batch_rng.uniform_int(0, static_cast<int64_t>(train_records.size()) - 1)];
      if (options.augment) {
        batch_features[i] = augmented_features(
            *batch_records[i], *options.augment, options.mode,
            mix_seed(mix_seed(state.seed, static_cast<uint64_t>(step_index)), 1000 + i));
      } else {
        batch_features[i] = batch_records[i]->features;
      }
    }

    LossOptions loss_opts;  // parameter gradients only
    parallel_for(batch, threads, [&](int i) {
      batch_results[i] = utterance_loss<float>(state.params, batch_features[i],
                                               batch_records[i]->segments, options.mode,
                                               loss_opts);
    });

    // Serial reduction in utterance-index order.
    double loss_sum = 0.0;
    int64_t fwd_ns = 0, bwd_ns = 0;
    ModelParams<float> grads = ModelParams<float>::zeros(state.params.config);
    auto acc = tensor_refs(grads);
    for (int i = 0; i < batch; ++i) {
      loss_sum += batch_results[i].loss;
      fwd_ns += batch_results[i].forward_ns;
      bwd_ns += batch_results[i].backward_ns;
      auto part = tensor_refs(batch_results[i].grads);
      for (size_t k = 0; k < acc.size(); ++k) {
        for (size_t j = 0; j < acc[k].size; ++j) acc[k].data[j] += part[k].data[j];
      }
    }
    const float inv_batch = 1.0f / static_cast<float>(batch);
    for (auto& t : acc) {
      for (size_t j = 0; j < t.size; ++j) t.data[j] *= inv_batch;
    }
    const double batch_loss = loss_sum / batch;

    adam_step(state, grads, schedule, options.adam, options.max_grad_norm);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - step_start).count();
    wall_ms_sum += wall_ms;
    fwd_ms_sum += static_cast<double>(fwd_ns) / 1e6;
    bwd_ms_sum += static_cast<double>(bwd_ns) / 1e6;
    ++measured_steps;

    {
      std::ostringstream line;
      line << "step=" << state.step << " mode=" << train_mode_name(options.mode)
           << " loss=" << std::fixed << std::setprecision(6) << batch_loss
           << " lr=" << std::setprecision(8) << schedule.lr(state.step)
           << " wall_ms=" << std::setprecision(3) << wall_ms;
      if (log_file.is_open()) log_file << line.str() << "\n";
      if (options.log_stream) (*options.log_stream) << line.str() << "\n";
    }

    if (options.checkpoint_every > 0 &&
        (state.step % options.checkpoint_every == 0 || state.step == options.total_steps)) {
      save_and_score(state.step);
    }
  }
  if (options.checkpoint_every <= 0 && !options.checkpoint_dir.empty()) {
    save_and_score(state.step);
  } else if (!result.checkpoints.empty() &&
             result.checkpoints.back().step != options.total_steps &&
             !options.checkpoint_dir.empty()) {
    save_and_score(options.total_steps);
  }

  result.steps_run = measured_steps;
  if (measured_steps > 0) {
    result.mean_batch_wall_ms = wall_ms_sum / static_cast<double>(measured_steps);
    result.mean_forward_ms = fwd_ms_sum / static_cast<double>(measured_steps);
    result.mean_backward_ms = bwd_ms_sum / static_cast<double>(measured_steps);
  }

  if (!result.checkpoints.empty()) {
    const CheckpointEntry* best = &result.checkpoints.front();
    for (const auto& entry : result.checkpoints) {
      if (entry.dev_loss < best->dev_loss) best = &entry;
    }
    result.best_dev_loss = best->dev_loss;
    result.best_checkpoint = options.checkpoint_dir / "best.ckpt";
    std::filesystem::copy_file(best->path, result.best_checkpoint,
                               std::filesystem::copy_options::overwrite_existing);
  }
  return result;
}

}  // namespace segstream
