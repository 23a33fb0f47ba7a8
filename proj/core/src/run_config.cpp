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

#include "segstream/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace segstream {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Field {
  std::function<void(const std::string&)> set;
};

[[noreturn]] void fail(const std::filesystem::path& path, size_t line_no,
                       const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

int64_t parse_int(const std::string& v) {
  size_t used = 0;
  const int64_t x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters in integer '" + v + "'");
  return x;
}

double parse_double(const std::string& v) {
  size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters in number '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;

  std::map<std::string, std::map<std::string, Field>> schema;
  auto intf = [](auto& target) {
    return Field{[&target](const std::string& v) {
      target = static_cast<std::remove_reference_t<decltype(target)>>(parse_int(v));
    }};
  };
  auto dblf = [](auto& target) {
    return Field{[&target](const std::string& v) { target = parse_double(v); }};
  };
  auto boolf = [](bool& target) {
    return Field{[&target](const std::string& v) { target = parse_bool(v); }};
  };

  schema["model"] = {
      {"input_dim", intf(c.model.input_dim)},
      {"encoder_layers", intf(c.model.encoder_layers)},
      {"encoder_units", intf(c.model.encoder_units)},
      {"prediction_layers", intf(c.model.prediction_layers)},
      {"prediction_units", intf(c.model.prediction_units)},
      {"joint_units", intf(c.model.joint_units)},
      {"vocab_size", intf(c.model.vocab_size)},
  };
  schema["train"] = {
      {"mode", Field{[&c](const std::string& v) {
         if (v == "segmented") {
           c.mode = TrainMode::segmented;
         } else if (v == "full_utterance") {
           c.mode = TrainMode::full_utterance;
         } else {
           throw std::invalid_argument("mode must be segmented or full_utterance, got '" + v +
                                       "'");
         }
       }}},
      {"batch_size", intf(c.batch_size)},
      {"total_steps", intf(c.total_steps)},
      {"seed", intf(c.seed)},
      {"threads", intf(c.threads)},
      {"checkpoint_every", intf(c.checkpoint_every)},
      {"keep_checkpoints", intf(c.keep_checkpoints)},
      {"max_grad_norm", dblf(c.max_grad_norm)},
      {"augment", boolf(c.augment_enabled)},
      {"peak_lr", dblf(c.schedule.peak_lr)},
      {"warmup_steps", intf(c.schedule.warmup_steps)},
      {"hold_steps", intf(c.schedule.hold_steps)},
      {"decay_rate", dblf(c.schedule.decay_rate)},
  };
  schema["augment"] = {
      {"n_freq_masks", intf(c.augment.n_freq_masks)},
      {"max_freq_width", intf(c.augment.max_freq_width)},
      {"time_mask_max_width", intf(c.augment.time_mask_max_width)},
      {"time_mask_rate", dblf(c.augment.time_mask_rate)},
      {"max_total_time_masked_fraction", dblf(c.augment.max_total_time_masked_fraction)},
  };
  schema["task"] = {
      {"n_utterances", intf(c.n_utterances)},
      {"prefix_len_min", intf(c.task.prefix_len_min)},
      {"prefix_len_max", intf(c.task.prefix_len_max)},
      {"cue_codes", intf(c.task.cue_code_count)},
      {"cue_bias_magnitude", dblf(c.task.cue_bias_magnitude)},
      {"n_symbols", intf(c.task.n_symbols)},
      {"ambiguous_fraction", dblf(c.task.ambiguous_fraction)},
      {"noise_std", dblf(c.task.noise_std)},
      {"symbol_frames", intf(c.task.symbol_frames)},
      {"cue_frames_min", intf(c.task.cue_frames_min)},
      {"cue_full_prefix_fraction", dblf(c.task.cue_full_prefix_fraction)},
      {"cue_frames_max", intf(c.task.cue_frames_max)},
      {"segment_syms_min", intf(c.task.segment_syms_min)},
      {"segment_syms_max", intf(c.task.segment_syms_max)},
      {"channel_jitter_std", dblf(c.task.channel_jitter_std)},
      {"speaker_change_fraction", dblf(c.task.speaker_change_fraction)},
      {"background_fraction", dblf(c.task.background_fraction)},
      {"background_level", dblf(c.task.background_level)},
      {"seed", intf(c.task.rng_seed)},
  };
  schema["eval"] = {
      {"beam_width", intf(c.beam_width)},
  };

  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_config: cannot open " + path.string());

  std::string section;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line.substr(0, line.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(path, line_no, "malformed section header '" + text + "'");
      section = text.substr(1, text.size() - 2);
      if (!schema.count(section)) fail(path, line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(path, line_no, "expected key = value, got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty()) fail(path, line_no, "key '" + key + "' outside any section");
    auto& fields = schema[section];
    auto it = fields.find(key);
    if (it == fields.end()) {
      fail(path, line_no, "unknown key '" + key + "' in section [" + section + "]");
    }
    try {
      it->second.set(value);
    } catch (const std::exception& e) {
      fail(path, line_no, std::string(e.what()));
    }
  }
  return c;
}

RunConfig load_run_config_or_default(const std::string& cli_path) {
  if (!cli_path.empty()) return load_run_config(cli_path);
  if (const char* env = std::getenv("SEGSTREAM_CONFIG"); env && *env) {
    return load_run_config(env);
  }
  return RunConfig{};
}

std::string dump_run_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "input_dim = " << c.model.input_dim << "\n"
     << "encoder_layers = " << c.model.encoder_layers << "\n"
     << "encoder_units = " << c.model.encoder_units << "\n"
     << "prediction_layers = " << c.model.prediction_layers << "\n"
     << "prediction_units = " << c.model.prediction_units << "\n"
     << "joint_units = " << c.model.joint_units << "\n"
     << "vocab_size = " << c.model.vocab_size << "\n\n";
  os << "[train]\n"
     << "mode = " << train_mode_name(c.mode) << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "total_steps = " << c.total_steps << "\n"
     << "seed = " << c.seed << "\n"
     << "threads = " << c.threads << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "keep_checkpoints = " << c.keep_checkpoints << "\n"
     << "max_grad_norm = " << c.max_grad_norm << "\n"
     << "augment = " << (c.augment_enabled ? "true" : "false") << "\n"
     << "peak_lr = " << c.schedule.peak_lr << "\n"
     << "warmup_steps = " << c.schedule.warmup_steps << "\n"
     << "hold_steps = " << c.schedule.hold_steps << "\n"
     << "decay_rate = " << c.schedule.decay_rate << "\n\n";
  os << "[augment]\n"
     << "n_freq_masks = " << c.augment.n_freq_masks << "\n"
     << "max_freq_width = " << c.augment.max_freq_width << "\n"
     << "time_mask_max_width = " << c.augment.time_mask_max_width << "\n"
     << "time_mask_rate = " << c.augment.time_mask_rate << "\n"
     << "max_total_time_masked_fraction = " << c.augment.max_total_time_masked_fraction
     << "\n\n";
  os << "[task]\n"
     << "n_utterances = " << c.n_utterances << "\n"
     << "prefix_len_min = " << c.task.prefix_len_min << "\n"
     << "prefix_len_max = " << c.task.prefix_len_max << "\n"
     << "cue_codes = " << c.task.cue_code_count << "\n"
     << "cue_bias_magnitude = " << c.task.cue_bias_magnitude << "\n"
     << "n_symbols = " << c.task.n_symbols << "\n"
     << "ambiguous_fraction = " << c.task.ambiguous_fraction << "\n"
     << "noise_std = " << c.task.noise_std << "\n"
     << "symbol_frames = " << c.task.symbol_frames << "\n"
     << "cue_frames_min = " << c.task.cue_frames_min << "\n"
     << "cue_full_prefix_fraction = " << c.task.cue_full_prefix_fraction << "\n"
     << "cue_frames_max = " << c.task.cue_frames_max << "\n"
     << "segment_syms_min = " << c.task.segment_syms_min << "\n"
     << "segment_syms_max = " << c.task.segment_syms_max << "\n"
     << "channel_jitter_std = " << c.task.channel_jitter_std << "\n"
     << "speaker_change_fraction = " << c.task.speaker_change_fraction << "\n"
     << "background_fraction = " << c.task.background_fraction << "\n"
     << "background_level = " << c.task.background_level << "\n"
     << "seed = " << c.task.rng_seed << "\n\n";
  os << "[eval]\n"
     << "beam_width = " << c.beam_width << "\n";
  return os.str();
}

}  // namespace segstream
