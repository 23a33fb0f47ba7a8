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
// Command-line entry point wiring the whole experiment flow: synthetic data
// generation, training in either objective, evaluation with nWER/WERR
// reporting, input-gradient traces, and the perturbation experiments.

#include <filesystem>
#include <iostream>
#include <regex>

#include "CLI11.hpp"
#include "segstream/decode.hpp"
#include "segstream/features.hpp"
#include "segstream/run_config.hpp"
#include "segstream/saliency.hpp"
#include "segstream/tensor_io.hpp"
#include "segstream/training.hpp"
#include "segstream/wav.hpp"

namespace {

using namespace segstream;

namespace fs = std::filesystem;

TrainMode parse_mode(const std::string& text) {
  if (text == "segmented") return TrainMode::segmented;
  if (text == "full_utterance") return TrainMode::full_utterance;
  throw CLI::ValidationError("mode must be 'segmented' or 'full_utterance', got '" + text + "'");
}

int cmd_datagen(const std::string& config_path, const std::string& out, int n_override,
                int64_t seed_override) {
  RunConfig config = load_run_config_or_default(config_path);
  if (n_override >= 0) config.n_utterances = n_override;
  if (seed_override >= 0) config.task.rng_seed = static_cast<uint64_t>(seed_override);
  if (config.n_utterances < 1) {
    throw std::invalid_argument("datagen: refusing to generate an empty dataset (--n >= 1)");
  }

  auto records = generate_context_task(config.task, config.n_utterances);
  const fs::path manifest_path(out);
  if (!manifest_path.parent_path().empty()) {
    fs::create_directories(manifest_path.parent_path());
  }
  write_manifest(records, manifest_path);

  int labeled = 0;
  double prefix_sum = 0.0;
  for (const auto& r : records) {
    labeled += r.n_labeled();
    prefix_sum += r.segments.front().n_frames();
  }
  std::cout << "manifest=" << manifest_path.string() << " utterances=" << records.size()
            << " labeled_segments=" << labeled
            << " mean_prefix_frames=" << prefix_sum / records.size() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest,
              const std::string& dev_manifest, const std::string& mode_text,
              const std::string& out_dir, bool resume, int threads_override,
              int64_t steps_override, int64_t seed_override) {
  RunConfig config = load_run_config_or_default(config_path);
  if (!mode_text.empty()) config.mode = parse_mode(mode_text);
  if (threads_override > 0) config.threads = threads_override;
  if (steps_override > 0) config.total_steps = steps_override;
  if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);

  auto train_records = read_manifest(manifest);
  std::vector<UtteranceRecord> dev_records;
  if (!dev_manifest.empty()) dev_records = read_manifest(dev_manifest);

  const fs::path run_dir(out_dir);
  fs::create_directories(run_dir / "ckpt");

  TrainOptions options;
  options.mode = config.mode;
  options.batch_size = config.batch_size;
  options.total_steps = config.total_steps;
  options.threads = config.threads;
  options.checkpoint_every = config.checkpoint_every;
  options.keep_checkpoints = config.keep_checkpoints;
  options.checkpoint_dir = run_dir / "ckpt";
  options.log_path = run_dir / "train.log";
  options.log_stream = &std::cout;
  options.max_grad_norm = config.max_grad_norm;
  if (config.augment_enabled) options.augment = config.augment;

  TrainState state;
  if (resume) {
    // Latest periodic checkpoint in the run directory.
    fs::path latest;
    int64_t latest_step = -1;
    const std::regex pattern("step_([0-9]+)\\.ckpt");
    for (const auto& entry : fs::directory_iterator(run_dir / "ckpt")) {
      std::smatch match;
      const std::string name = entry.path().filename().string();
      if (std::regex_match(name, match, pattern)) {
        const int64_t step = std::stoll(match[1]);
        if (step > latest_step) {
          latest_step = step;
          latest = entry.path();
        }
      }
    }
    if (latest_step < 0) {
      throw std::runtime_error("train --resume: no step_*.ckpt found under " +
                               (run_dir / "ckpt").string());
    }
    auto ckpt = load_checkpoint(latest);
    state.params = ckpt.params;
    state.m = ModelParams<float>::zeros(ckpt.params.config);
    state.v = ModelParams<float>::zeros(ckpt.params.config);
    state.step = ckpt.step;
    state.seed = config.seed;
    std::cerr << "resuming from " << latest.string() << " at step " << ckpt.step
              << " (optimizer moments reset)\n";
  } else {
    ModelConfig model_config = config.resolved_model();
    if (!train_records.empty() &&
        model_config.input_dim != train_records.front().features.cols()) {
      throw std::runtime_error(
          "train: model input_dim " + std::to_string(model_config.input_dim) +
          " does not match manifest feature dim " +
          std::to_string(train_records.front().features.cols()));
    }
    state = make_train_state(model_config, config.seed);
  }

  auto result = train(train_records, dev_records, state, config.schedule, options);

  std::cout << "trained mode=" << train_mode_name(options.mode) << " steps=" << state.step
            << " mean_batch_wall_ms=" << result.mean_batch_wall_ms
            << " mean_forward_ms=" << result.mean_forward_ms
            << " mean_backward_ms=" << result.mean_backward_ms << "\n";
  if (!result.best_checkpoint.empty()) {
    std::cout << "best_checkpoint=" << result.best_checkpoint.string()
              << " dev_loss=" << result.best_dev_loss << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& base_ckpt, const std::string& new_ckpt,
             const std::string& manifest, int beam_width, const std::string& base_mode_text,
             const std::string& new_mode_text, int threads) {
  auto records = read_manifest(manifest);
  if (records.empty()) throw std::runtime_error("eval: empty manifest");
  auto base = load_checkpoint(base_ckpt);
  auto fresh = load_checkpoint(new_ckpt);
  const TrainMode base_mode = parse_mode(base_mode_text);
  const TrainMode new_mode = parse_mode(new_mode_text);

  auto base_results = decode_corpus(base.params, records, beam_width, base_mode, threads);
  auto new_results = decode_corpus(fresh.params, records, beam_width, new_mode, threads);
  for (const auto& d : new_results) {
    std::cout << "hyp utt=" << d.utt_id << " seg=" << d.segment_index << " score=" << d.log_score
              << " tokens=";
    for (size_t i = 0; i < d.labels.size(); ++i) {
      if (i) std::cout << ',';
      std::cout << d.labels[i];
    }
    std::cout << "\n";
  }

  auto report = compare_systems(records, base_results, new_results);
  print_eval_report(std::cout, report);

  for (const auto& tag : kConditionTags) {
    const bool present = std::any_of(report.rows.begin(), report.rows.end(),
                                     [&](const ConditionRow& r) { return r.condition == tag; });
    if (!present) {
      std::cerr << "warning: no utterances tagged '" << tag << "', row omitted\n";
    }
  }
  return 0;
}

int cmd_saliency(const std::string& ckpt_path, const std::string& manifest,
                 const std::string& utterance_id, int segment_index, const std::string& out,
                 const std::string& mode_text) {
  auto records = read_manifest(manifest);
  const UtteranceRecord* record = nullptr;
  for (const auto& r : records) {
    if (r.id == utterance_id) record = &r;
  }
  if (!record) {
    throw std::runtime_error("saliency: utterance id '" + utterance_id + "' not in manifest");
  }
  auto ckpt = load_checkpoint(ckpt_path);
  auto trace = saliency_trace(ckpt.params, *record, segment_index, parse_mode(mode_text));
  export_trace(trace, out);
  std::cout << "trace=" << out << " frames=" << trace.grad_norm.size()
            << " segment=[" << trace.t_start << "," << trace.t_end << "]\n";
  return 0;
}

int cmd_perturb(const std::string& manifest_in, const std::string& manifest_out,
                const std::string& scope_text, double magnitude, double smear, int64_t seed) {
  PerturbScope scope;
  if (scope_text == "full_utterance") {
    scope = PerturbScope::full_utterance;
  } else if (scope_text == "segments_only") {
    scope = PerturbScope::segments_only;
  } else {
    throw CLI::ValidationError("scope must be 'full_utterance' or 'segments_only'");
  }
  auto records = read_manifest(manifest_in);
  std::vector<UtteranceRecord> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    out.push_back(apply_feature_reverb(records[i], scope, magnitude, smear,
                                       Rng::derive(static_cast<uint64_t>(seed), i)));
  }
  const fs::path out_path(manifest_out);
  if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
  write_manifest(out, out_path);
  std::cout << "manifest=" << manifest_out << " utterances=" << out.size()
            << " scope=" << scope_text << " magnitude=" << magnitude << " smear=" << smear
            << "\n";
  return 0;
}

int cmd_reverb_wav(const std::string& wav_in, const std::string& ir_path,
                   const std::string& wav_out, const std::string& scope_text) {
  auto w = read_wav(wav_in);
  auto ir_wave = read_wav(ir_path);
  ImpulseResponse ir;
  ir.taps = ir_wave.samples;
  ir.sample_rate = ir_wave.sample_rate;
  if (scope_text != "full_utterance") {
    throw CLI::ValidationError(
        "reverb-wav supports scope full_utterance only; segment spans live in manifests");
  }
  write_wav(wav_out, apply_reverb(w, ir, PerturbScope::full_utterance, {}));
  std::cout << "wrote " << wav_out << "\n";
  return 0;
}

int cmd_features(const std::string& wav_in, const std::string& out, bool no_stack) {
  auto w = read_wav(wav_in);
  auto logmel = extract_logmel(w);
  if (no_stack) {
    write_sgt_file(out, logmel.frames);
    std::cout << "wrote " << out << " frames=" << logmel.frames.rows()
              << " dims=" << logmel.frames.cols() << "\n";
  } else {
    auto stacked = stack_downsample(logmel);
    write_sgt_file(out, stacked.frames);
    std::cout << "wrote " << out << " frames=" << stacked.frames.rows()
              << " dims=" << stacked.frames.cols() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RNN-T training on partially transcribed audio streams"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "Run configuration file (default: $SEGSTREAM_CONFIG, else built-in defaults)");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "Generate the synthetic context-cue dataset");
  std::string datagen_out = "data/train.manifest";
  int datagen_n = -1;
  int64_t datagen_seed = -1;
  datagen->add_option("--out", datagen_out, "Output manifest path");
  datagen->add_option("--n", datagen_n, "Number of utterances (overrides config)");
  datagen->add_option("--seed", datagen_seed, "Task seed (overrides config)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a transducer in either objective");
  std::string train_manifest, train_dev, train_mode, train_out = "runs/run";
  bool train_resume = false;
  int train_threads = 0;
  int64_t train_steps = -1, train_seed = -1;
  train_cmd->add_option("--manifest", train_manifest, "Training manifest")->required();
  train_cmd->add_option("--dev", train_dev, "Development manifest for best-checkpoint selection");
  train_cmd->add_option("--mode", train_mode, "segmented | full_utterance (overrides config)");
  train_cmd->add_option("--out", train_out, "Run directory (checkpoints + log)");
  train_cmd->add_flag("--resume", train_resume, "Resume from the latest checkpoint in --out");
  train_cmd->add_option("--threads", train_threads, "Worker threads (0 = machine parallelism)");
  train_cmd->add_option("--steps", train_steps, "Total steps (overrides config)");
  train_cmd->add_option("--seed", train_seed, "Training seed (overrides config)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Decode with two checkpoints and report nWER/WERR");
  std::string eval_base, eval_new, eval_manifest;
  std::string eval_base_mode = "segmented", eval_new_mode = "full_utterance";
  int eval_beam = 4, eval_threads = 0;
  eval_cmd->add_option("--base", eval_base, "Baseline checkpoint")->required();
  eval_cmd->add_option("--new", eval_new, "Comparison checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Evaluation manifest")->required();
  eval_cmd->add_option("--beam", eval_beam, "Beam width");
  eval_cmd->add_option("--base-mode", eval_base_mode, "Decoding mode of the baseline system");
  eval_cmd->add_option("--new-mode", eval_new_mode, "Decoding mode of the comparison system");
  eval_cmd->add_option("--threads", eval_threads, "Worker threads");

  // saliency
  auto* sal_cmd = app.add_subcommand("saliency", "Export an input-gradient trace for one segment");
  std::string sal_ckpt, sal_manifest, sal_utt, sal_out = "trace.tsv";
  std::string sal_mode = "full_utterance";
  int sal_segment = 1;
  sal_cmd->add_option("--checkpoint", sal_ckpt, "Model checkpoint")->required();
  sal_cmd->add_option("--manifest", sal_manifest, "Manifest holding the utterance")->required();
  sal_cmd->add_option("--utterance", sal_utt, "Utterance id")->required();
  sal_cmd->add_option("--segment", sal_segment, "Segment index (default: 1)");
  sal_cmd->add_option("--out", sal_out, "Output trace file");
  sal_cmd->add_option("--mode", sal_mode, "Objective used for the trace");

  // perturb
  auto* pert_cmd = app.add_subcommand(
      "perturb", "Apply the feature-domain channel mismatch at a chosen scope");
  std::string pert_in, pert_out, pert_scope = "full_utterance";
  double pert_magnitude = 1.0;
  double pert_smear = 0.5;
  int64_t pert_seed = 1;
  pert_cmd->add_option("--manifest", pert_in, "Input manifest")->required();
  pert_cmd->add_option("--out", pert_out, "Output manifest")->required();
  pert_cmd->add_option("--scope", pert_scope, "full_utterance | segments_only");
  pert_cmd->add_option("--magnitude", pert_magnitude, "Offset vector magnitude");
  pert_cmd->add_option("--smear", pert_smear, "Temporal smear coefficient in [0, 1)");
  pert_cmd->add_option("--seed", pert_seed, "Offset direction seed");

  // reverb-wav
  auto* reverb_cmd =
      app.add_subcommand("reverb-wav", "Convolve a waveform with an impulse response (WAV)");
  std::string rv_in, rv_ir, rv_out, rv_scope = "full_utterance";
  reverb_cmd->add_option("--wav", rv_in, "Input waveform")->required();
  reverb_cmd->add_option("--ir", rv_ir, "Impulse response waveform")->required();
  reverb_cmd->add_option("--out", rv_out, "Output waveform")->required();
  reverb_cmd->add_option("--scope", rv_scope, "full_utterance");

  // features
  auto* feat_cmd =
      app.add_subcommand("features", "Extract stacked log-mel features from a WAV file");
  std::string feat_wav, feat_out = "features.sgt";
  bool feat_no_stack = false;
  feat_cmd->add_option("--wav", feat_wav, "Input waveform")->required();
  feat_cmd->add_option("--out", feat_out, "Output SGT1 tensor file");
  feat_cmd->add_flag("--no-stack", feat_no_stack, "Skip the 3x stacking/downsampling");

  CLI11_PARSE(app, argc, argv);

  try {
    if (datagen->parsed()) return cmd_datagen(config_path, datagen_out, datagen_n, datagen_seed);
    if (train_cmd->parsed()) {
      return cmd_train(config_path, train_manifest, train_dev, train_mode, train_out,
                       train_resume, train_threads, train_steps, train_seed);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_base, eval_new, eval_manifest, eval_beam, eval_base_mode,
                      eval_new_mode, eval_threads);
    }
    if (sal_cmd->parsed()) {
      return cmd_saliency(sal_ckpt, sal_manifest, sal_utt, sal_segment, sal_out, sal_mode);
    }
    if (pert_cmd->parsed()) {
      return cmd_perturb(pert_in, pert_out, pert_scope, pert_magnitude, pert_smear, pert_seed);
    }
    if (reverb_cmd->parsed()) return cmd_reverb_wav(rv_in, rv_ir, rv_out, rv_scope);
    if (feat_cmd->parsed()) return cmd_features(feat_wav, feat_out, feat_no_stack);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
