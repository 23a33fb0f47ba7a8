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

#include "segstream/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "segstream/rng.hpp"
#include "segstream/tensor_io.hpp"

namespace segstream {

namespace {

constexpr const char* kManifestHeader = "# segstream manifest v1";

bool known_condition(const std::string& tag) {
  return std::find(kConditionTags.begin(), kConditionTags.end(), tag) != kConditionTags.end();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

[[noreturn]] void parse_fail(const std::string& id, const std::string& what) {
  throw std::runtime_error("read_manifest: utterance '" + id + "': " + what);
}

std::string encode_segments(const std::vector<SegmentRecord>& segments) {
  std::ostringstream os;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (i) os << ';';
    const auto& s = segments[i];
    os << s.t_start << ':' << s.t_end;
    if (s.labels) {
      os << ':';
      for (size_t j = 0; j < s.labels->size(); ++j) {
        if (j) os << ',';
        os << (*s.labels)[j];
      }
    }
  }
  return os.str();
}

std::vector<SegmentRecord> decode_segments(const std::string& text, const std::string& id) {
  std::vector<SegmentRecord> segments;
  if (text.empty()) return segments;
  for (const std::string& entry : split(text, ';')) {
    const auto parts = split(entry, ':');
    if (parts.size() != 2 && parts.size() != 3) {
      parse_fail(id, "malformed segment entry '" + entry + "'");
    }
    SegmentRecord s;
    try {
      s.t_start = std::stoi(parts[0]);
      s.t_end = std::stoi(parts[1]);
    } catch (const std::exception&) {
      parse_fail(id, "non-numeric segment bounds in '" + entry + "'");
    }
    if (parts.size() == 3) {
      std::vector<int> labels;
      if (!parts[2].empty()) {
        for (const std::string& tok : split(parts[2], ',')) {
          try {
            labels.push_back(std::stoi(tok));
          } catch (const std::exception&) {
            parse_fail(id, "non-numeric label '" + tok + "'");
          }
        }
      }
      s.labels = std::move(labels);
    }
    segments.push_back(std::move(s));
  }
  return segments;
}

}  // namespace

void UtteranceRecord::validate() const {
  auto fail = [this](const std::string& what) {
    throw std::runtime_error("utterance '" + id + "': " + what);
  };
  if (id.empty() || id.find_first_of(" \t") != std::string::npos) {
    fail("id must be non-empty without whitespace");
  }
  if (features.rows() < 1 || features.cols() < 1) fail("empty feature matrix");
  if (!features.allFinite()) fail("non-finite feature values");
  const int n = n_frames();
  int prev_end = -1;
  for (const auto& s : segments) {
    if (s.t_start < 0 || s.t_end < s.t_start || s.t_end >= n) {
      fail("segment [" + std::to_string(s.t_start) + ", " + std::to_string(s.t_end) +
           "] out of range for T=" + std::to_string(n));
    }
    if (s.t_start <= prev_end) fail("segments overlap or are unsorted");
    prev_end = s.t_end;
    if (s.labels) {
      for (int y : *s.labels) {
        if (y < 1) fail("label " + std::to_string(y) + " is not a valid token id");
      }
    }
  }
  for (const auto& tag : conditions) {
    if (!known_condition(tag)) fail("unknown condition tag '" + tag + "'");
  }
}

void write_manifest(const std::vector<UtteranceRecord>& records,
                    const std::filesystem::path& manifest_path) {
  for (const auto& r : records) r.validate();

  const auto dir = manifest_path.parent_path();
  const std::string feats_dirname = manifest_path.stem().string() + "_feats";
  const auto feats_dir = (dir.empty() ? std::filesystem::path(".") : dir) / feats_dirname;
  std::filesystem::create_directories(feats_dir);

  std::ofstream out(manifest_path);
  if (!out) {
    throw std::runtime_error("write_manifest: cannot open " + manifest_path.string());
  }
  out << kManifestHeader << "\n";
  for (const auto& r : records) {
    const std::string rel = feats_dirname + "/" + r.id + ".sgt";
    write_sgt_file(feats_dir / (r.id + ".sgt"), r.features);
    out << "utt=" << r.id << " feat=" << rel << " cond=";
    if (r.conditions.empty()) {
      out << "-";
    } else {
      for (size_t i = 0; i < r.conditions.size(); ++i) {
        if (i) out << ',';
        out << r.conditions[i];
      }
    }
    out << " segs=" << encode_segments(r.segments) << "\n";
  }
  if (!out) throw std::runtime_error("write_manifest: write failed");
}

std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw std::runtime_error("read_manifest: cannot open " + manifest_path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw std::runtime_error("read_manifest: " + manifest_path.string() +
                             ": missing manifest header");
  }
  const auto base_dir = manifest_path.parent_path();

  std::vector<UtteranceRecord> records;
  std::set<std::string> seen_ids;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;

    UtteranceRecord r;
    std::string feat_rel, cond_text, segs_text;
    bool have_feat = false, have_cond = false, have_segs = false;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        parse_fail(r.id.empty() ? "<line " + std::to_string(line_no) + ">" : r.id,
                   "malformed field '" + field + "'");
      }
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "utt") {
        r.id = value;
      } else if (key == "feat") {
        feat_rel = value;
        have_feat = true;
      } else if (key == "cond") {
        cond_text = value;
        have_cond = true;
      } else if (key == "segs") {
        segs_text = value;
        have_segs = true;
      } else {
        parse_fail(r.id.empty() ? "<line " + std::to_string(line_no) + ">" : r.id,
                   "unknown field '" + key + "'");
      }
    }
    if (r.id.empty()) parse_fail("<line " + std::to_string(line_no) + ">", "missing utt field");
    if (!have_feat || !have_cond || !have_segs) {
      parse_fail(r.id, "missing one of feat/cond/segs fields");
    }
    if (!seen_ids.insert(r.id).second) parse_fail(r.id, "duplicate utterance id");

    try {
      r.features = read_sgt_file(base_dir / feat_rel);
    } catch (const std::exception& e) {
      parse_fail(r.id, e.what());
    }
    if (cond_text != "-") {
      for (const auto& tag : split(cond_text, ',')) {
        if (!known_condition(tag)) parse_fail(r.id, "unknown condition tag '" + tag + "'");
        r.conditions.push_back(tag);
      }
    }
    r.segments = decode_segments(segs_text, r.id);
    try {
      r.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("read_manifest: ") + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Context-cue task
// ---------------------------------------------------------------------------

void ContextCueSpec::validate() const {
  if (cue_code_count < 2) throw std::invalid_argument("ContextCueSpec: need >= 2 cue codes");
  if (ambiguous_fraction <= 0.0 || ambiguous_fraction > 1.0) {
    throw std::invalid_argument("ContextCueSpec: ambiguous_fraction must be in (0, 1]");
  }
  if (n_symbols < 2) throw std::invalid_argument("ContextCueSpec: need >= 2 symbols");
  if (prefix_len_min < 1 || prefix_len_max < prefix_len_min) {
    throw std::invalid_argument("ContextCueSpec: bad prefix length range");
  }
  if (segment_syms_min < 1 || segment_syms_max < segment_syms_min) {
    throw std::invalid_argument("ContextCueSpec: bad segment symbol range");
  }
  if (symbol_frames < 1) throw std::invalid_argument("ContextCueSpec: symbol_frames >= 1");
  if (noise_std < 0.0) throw std::invalid_argument("ContextCueSpec: negative noise_std");
  if (num_ambiguous() < 2) {
    throw std::invalid_argument(
        "ContextCueSpec: ambiguous_fraction * n_symbols must cover >= 2 symbols");
  }
}

int ContextCueSpec::num_ambiguous() const {
  const int m = static_cast<int>(std::lround(ambiguous_fraction * n_symbols));
  return std::min(std::max(m, 0), n_symbols);
}

int context_cue_label(const ContextCueSpec& spec, int symbol, int cue) {
  const int m = spec.num_ambiguous();
  if (symbol < m) {
    // Per-cue bijection on the ambiguous set; the same symbol maps to a
    // different label under each cue.
    return 1 + (symbol + cue) % m;
  }
  return 1 + symbol;
}

MatrixF symbol_patterns(const ContextCueSpec& spec) {
  return MatrixF::Identity(spec.n_symbols, spec.n_symbols);
}

std::vector<UtteranceRecord> generate_context_task(const ContextCueSpec& spec,
                                                   int n_utterances) {
  spec.validate();
  if (n_utterances < 1) {
    throw std::invalid_argument("generate_context_task: need >= 1 utterance");
  }
  const int dim = spec.feature_dim();
  const MatrixF patterns = symbol_patterns(spec);

  std::vector<UtteranceRecord> records;
  records.reserve(n_utterances);
  for (int idx = 0; idx < n_utterances; ++idx) {
    Rng rng(Rng::derive(spec.rng_seed, static_cast<uint64_t>(idx)));

    const int prefix_len =
        static_cast<int>(rng.uniform_int(spec.prefix_len_min, spec.prefix_len_max));
    const int prefix_cue = static_cast<int>(rng.uniform_int(0, spec.cue_code_count - 1));
    const int n_syms =
        static_cast<int>(rng.uniform_int(spec.segment_syms_min, spec.segment_syms_max));
    std::vector<int> symbols(n_syms);
    for (auto& s : symbols) s = static_cast<int>(rng.uniform_int(0, spec.n_symbols - 1));

    const bool speaker_change = rng.uniform() < spec.speaker_change_fraction;
    int label_cue = prefix_cue;
    if (speaker_change) {
      label_cue = (prefix_cue + 1 +
                   static_cast<int>(rng.uniform_int(0, spec.cue_code_count - 2))) %
                  spec.cue_code_count;
    }
    const bool background = rng.uniform() < spec.background_fraction;

    // Per-utterance channel offset, a random direction scaled by a normal
    // draw. The prefix is the only place a model can estimate it cleanly.
    VectorF offset = VectorF::Zero(dim);
    if (spec.channel_jitter_std > 0.0) {
      VectorD dir(dim);
      for (int d = 0; d < dim; ++d) dir[d] = rng.normal();
      dir.normalize();
      const double scale = rng.normal(0.0, spec.channel_jitter_std);
      offset = (dir * scale).cast<float>();
    }

    const int seg_len = n_syms * spec.symbol_frames;
    const int total = prefix_len + seg_len;

    UtteranceRecord r;
    {
      std::ostringstream os;
      os << "utt" << std::setw(5) << std::setfill('0') << idx;
      r.id = os.str();
    }
    r.features = MatrixF::Zero(total, dim);
    for (int t = 0; t < total; ++t) {
      for (int d = 0; d < dim; ++d) {
        r.features(t, d) = offset[d] + static_cast<float>(rng.normal(0.0, spec.noise_std));
      }
    }
    // Cue bias on the keyword span at the start of the prefix (orthogonal
    // coordinate per cue code); the rest of the prefix is cue-free gap.
    const int span_lo = std::min(std::max(spec.cue_frames_min, 1), prefix_len);
    const int span_hi =
        spec.cue_frames_max > 0 ? std::min(spec.cue_frames_max, prefix_len) : prefix_len;
    int cue_span = prefix_len;
    if (rng.uniform() >= spec.cue_full_prefix_fraction) {
      cue_span = static_cast<int>(rng.uniform_int(span_lo, std::max(span_lo, span_hi)));
    }
    for (int t = 0; t < cue_span; ++t) {
      r.features(t, spec.n_symbols + prefix_cue) +=
          static_cast<float>(spec.cue_bias_magnitude);
    }
    // Symbol patterns on segment frames.
    for (int j = 0; j < n_syms; ++j) {
      for (int k = 0; k < spec.symbol_frames; ++k) {
        const int t = prefix_len + j * spec.symbol_frames + k;
        r.features.block(t, 0, 1, spec.n_symbols) += patterns.row(symbols[j]);
        if (speaker_change) {
          r.features(t, spec.n_symbols + label_cue) +=
              static_cast<float>(spec.cue_bias_magnitude);
        }
      }
    }
    if (background) {
      // A competing "speaker": random symbol patterns at reduced level over
      // the whole utterance.
      for (int t = 0; t < total; ++t) {
        const int s = static_cast<int>(rng.uniform_int(0, spec.n_symbols - 1));
        r.features.block(t, 0, 1, spec.n_symbols) +=
            patterns.row(s) * static_cast<float>(spec.background_level);
      }
    }

    SegmentRecord prefix;
    prefix.t_start = 0;
    prefix.t_end = prefix_len - 1;
    SegmentRecord transcribed;
    transcribed.t_start = prefix_len;
    transcribed.t_end = total - 1;
    std::vector<int> labels(n_syms);
    for (int j = 0; j < n_syms; ++j) labels[j] = context_cue_label(spec, symbols[j], label_cue);
    transcribed.labels = std::move(labels);
    r.segments = {prefix, transcribed};

    if (speaker_change) r.conditions.push_back("speaker_change");
    if (background) r.conditions.push_back("background_speech");
    if (r.conditions.empty()) r.conditions.push_back("clean");
    std::sort(r.conditions.begin(), r.conditions.end());

    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

Waveform apply_reverb(const Waveform& w, const ImpulseResponse& ir, PerturbScope scope,
                      const std::vector<SegmentRecord>& segments, double frame_ms) {
  if (ir.sample_rate != w.sample_rate) {
    throw std::invalid_argument("apply_reverb: impulse response sample rate mismatch");
  }
  bool any_tap = false;
  for (float t : ir.taps) {
    if (t != 0.0f) any_tap = true;
    if (!std::isfinite(t)) throw std::invalid_argument("apply_reverb: non-finite tap");
  }
  if (!any_tap) throw std::invalid_argument("apply_reverb: all-zero impulse response");

  const int n = static_cast<int>(w.samples.size());
  const int n_taps = static_cast<int>(ir.taps.size());
  Waveform out = w;

  auto convolve_span = [&](int begin, int end) {
    // y[t] = sum_k ir[k] x[t-k], with x restricted to [begin, end).
    std::vector<float> span_out(end - begin, 0.0f);
    for (int t = begin; t < end; ++t) {
      double acc = 0.0;
      const int k_max = std::min(n_taps - 1, t - begin);
      for (int k = 0; k <= k_max; ++k) {
        acc += static_cast<double>(ir.taps[k]) * w.samples[t - k];
      }
      span_out[t - begin] = static_cast<float>(acc);
    }
    for (int t = begin; t < end; ++t) out.samples[t] = span_out[t - begin];
  };

  if (scope == PerturbScope::full_utterance) {
    convolve_span(0, n);
  } else {
    std::vector<const SegmentRecord*> labeled;
    for (const auto& s : segments) {
      if (s.transcribed()) labeled.push_back(&s);
    }
    if (labeled.empty()) {
      throw std::invalid_argument("apply_reverb: segments_only scope with no labeled segments");
    }
    const double samples_per_frame = frame_ms * w.sample_rate / 1000.0;
    for (const auto* s : labeled) {
      const int begin =
          std::clamp(static_cast<int>(std::lround(s->t_start * samples_per_frame)), 0, n);
      const int end = std::clamp(
          static_cast<int>(std::lround((s->t_end + 1) * samples_per_frame)), begin, n);
      if (begin < end) convolve_span(begin, end);
    }
  }

  double power_in = 0.0, power_out = 0.0;
  for (int t = 0; t < n; ++t) {
    power_in += static_cast<double>(w.samples[t]) * w.samples[t];
    power_out += static_cast<double>(out.samples[t]) * out.samples[t];
  }
  if (power_out > 0.0) {
    const float scale = static_cast<float>(std::sqrt(power_in / power_out));
    for (auto& s : out.samples) s *= scale;
  }
  return out;
}

UtteranceRecord apply_channel_bias(const UtteranceRecord& record, PerturbScope scope,
                                   double magnitude, uint64_t seed) {
  record.validate();
  const int dim = static_cast<int>(record.features.cols());
  Rng rng(seed);
  VectorD dir(dim);
  for (int d = 0; d < dim; ++d) dir[d] = rng.normal();
  dir.normalize();
  const VectorF offset = (dir * magnitude).cast<float>();

  UtteranceRecord out = record;
  if (scope == PerturbScope::full_utterance) {
    out.features.rowwise() += offset.transpose();
    out.conditions.push_back("reverb_full");
  } else {
    for (const auto& s : out.segments) {
      if (!s.transcribed()) continue;
      out.features.middleRows(s.t_start, s.n_frames()).rowwise() += offset.transpose();
    }
    out.conditions.push_back("reverb_segment");
  }
  std::sort(out.conditions.begin(), out.conditions.end());
  out.conditions.erase(std::unique(out.conditions.begin(), out.conditions.end()),
                       out.conditions.end());
  return out;
}

UtteranceRecord apply_feature_reverb(const UtteranceRecord& record, PerturbScope scope,
                                     double offset_magnitude, double smear_alpha,
                                     uint64_t seed) {
  if (smear_alpha < 0.0 || smear_alpha >= 1.0) {
    throw std::invalid_argument("apply_feature_reverb: smear_alpha must be in [0, 1)");
  }
  UtteranceRecord out = apply_channel_bias(record, scope, offset_magnitude, seed);
  if (smear_alpha == 0.0) return out;
  const float alpha = static_cast<float>(smear_alpha);

  if (scope == PerturbScope::full_utterance) {
    for (int t = 1; t < out.n_frames(); ++t) {
      out.features.row(t) = (1.0f - alpha) * out.features.row(t) + alpha * out.features.row(t - 1);
    }
  } else {
    for (const auto& s : out.segments) {
      if (!s.transcribed()) continue;
      for (int t = s.t_start + 1; t <= s.t_end; ++t) {
        out.features.row(t) =
            (1.0f - alpha) * out.features.row(t) + alpha * out.features.row(t - 1);
      }
    }
  }
  return out;
}

std::map<std::string, std::vector<UtteranceRecord>> split_eval_conditions(
    const std::vector<UtteranceRecord>& records) {
  std::map<std::string, std::vector<UtteranceRecord>> by_condition;
  for (const auto& r : records) {
    for (const auto& tag : r.conditions) by_condition[tag].push_back(r);
  }
  return by_condition;
}

}  // namespace segstream
