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

#include "segstream/features.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "segstream/rng.hpp"

namespace segstream {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Iterative radix-2 FFT, power-of-two length.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> w_len(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= w_len;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters with edges evenly spaced on the mel scale, as weights
// over the one-sided spectrum bins.
std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, int sample_rate,
                                                double fmin, double fmax) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  std::vector<std::vector<double>> filters(n_mels, std::vector<double>(n_bins, 0.0));
  const double hz_per_bin = static_cast<double>(sample_rate) / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * hz_per_bin;
      if (f <= left || f >= right) continue;
      filters[m][k] = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
    }
  }
  return filters;
}

}  // namespace

FeatureMatrix extract_logmel(const Waveform& w, const LogMelConfig& config) {
  if (w.sample_rate != 8000 && w.sample_rate != 16000) {
    throw std::invalid_argument("extract_logmel: sample rate must be 8000 or 16000, got " +
                                std::to_string(w.sample_rate));
  }
  const int window = static_cast<int>(std::lround(config.window_ms * w.sample_rate / 1000.0));
  const int hop = static_cast<int>(std::lround(config.hop_ms * w.sample_rate / 1000.0));
  if (window < hop) throw std::invalid_argument("extract_logmel: window shorter than hop");
  if (static_cast<int>(w.samples.size()) < window) {
    throw std::invalid_argument("extract_logmel: waveform shorter than one window (" +
                                std::to_string(w.samples.size()) + " < " +
                                std::to_string(window) + " samples)");
  }

  int n_fft = 1;
  while (n_fft < window) n_fft <<= 1;
  const double fmax = config.fmax_hz > 0.0 ? config.fmax_hz : w.sample_rate / 2.0;
  const auto filters = mel_filterbank(config.n_mels, n_fft, w.sample_rate, config.fmin_hz, fmax);

  std::vector<double> hann(window);
  for (int i = 0; i < window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (window - 1));
  }

  const int n_frames = (static_cast<int>(w.samples.size()) - window) / hop + 1;
  FeatureMatrix out;
  out.frame_shift_ms = config.hop_ms;
  out.frames.resize(n_frames, config.n_mels);

  std::vector<std::complex<double>> buf(n_fft);
  for (int t = 0; t < n_frames; ++t) {
    const int offset = t * hop;
    for (int i = 0; i < window; ++i) {
      buf[i] = std::complex<double>(w.samples[offset + i] * hann[i], 0.0);
    }
    for (int i = window; i < n_fft; ++i) buf[i] = 0.0;
    fft_inplace(buf);
    for (int m = 0; m < config.n_mels; ++m) {
      double energy = 0.0;
      const auto& filt = filters[m];
      for (int k = 0; k <= n_fft / 2; ++k) {
        if (filt[k] != 0.0) energy += filt[k] * std::norm(buf[k]);
      }
      out.frames(t, m) = static_cast<float>(std::log(energy + config.log_floor));
    }
  }
  return out;
}

StackedFeatures stack_downsample(const FeatureMatrix& f) {
  const int t_in = static_cast<int>(f.frames.rows());
  if (t_in < 1) throw std::invalid_argument("stack_downsample: empty feature matrix");
  const int dim = static_cast<int>(f.frames.cols());
  const int t_out = (t_in + 2) / 3;

  StackedFeatures out;
  out.frames.resize(t_out, 3 * dim);
  for (int t = 0; t < t_out; ++t) {
    for (int k = 0; k < 3; ++k) {
      const int src = std::min(3 * t + k, t_in - 1);
      out.frames.block(t, k * dim, 1, dim) = f.frames.row(src);
    }
  }
  return out;
}

int AugmentPolicy::time_masks(int n_frames) const {
  if (time_mask_rate <= 0.0) return 0;
  return std::max<int>(1, static_cast<int>(std::lround(n_frames * time_mask_rate)));
}

AugmentStats spec_augment_matrix(MatrixF& m, const AugmentPolicy& policy, uint64_t seed,
                                 int stacked_copies) {
  const int n_frames = static_cast<int>(m.rows());
  const int n_cols = static_cast<int>(m.cols());
  if (stacked_copies < 1 || n_cols % stacked_copies != 0) {
    throw std::invalid_argument("spec_augment_matrix: columns not divisible by copies");
  }
  const int bins = n_cols / stacked_copies;
  const float fill = m.mean();
  Rng rng(seed);
  AugmentStats stats;

  for (int i = 0; i < policy.n_freq_masks; ++i) {
    const int width = static_cast<int>(rng.uniform_int(1, std::max(1, policy.max_freq_width)));
    const int w = std::min(width, bins);
    const int start = static_cast<int>(rng.uniform_int(0, bins - w));
    for (int copy = 0; copy < stacked_copies; ++copy) {
      m.block(0, copy * bins + start, n_frames, w).setConstant(fill);
    }
    stats.freq_masked_bins += w;
  }

  if (n_frames <= 1) return stats;  // frequency masks only on degenerate input

  const int n_masks = policy.time_masks(n_frames);
  const int budget = static_cast<int>(policy.max_total_time_masked_fraction * n_frames);
  std::vector<bool> masked(n_frames, false);
  for (int i = 0; i < n_masks; ++i) {
    const int width =
        std::min(static_cast<int>(rng.uniform_int(1, std::max(1, policy.time_mask_max_width))),
                 n_frames);
    const int start = static_cast<int>(rng.uniform_int(0, n_frames - width));
    for (int t = start; t < start + width; ++t) {
      if (masked[t]) continue;
      if (stats.time_masked_frames >= budget) return stats;
      masked[t] = true;
      ++stats.time_masked_frames;
      m.row(t).setConstant(fill);
    }
  }
  return stats;
}

StackedFeatures spec_augment(const StackedFeatures& f, const AugmentPolicy& policy) {
  StackedFeatures out = f;
  spec_augment_matrix(out.frames, policy, policy.rng_seed, f.downsample_factor);
  return out;
}

}  // namespace segstream
