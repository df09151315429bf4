#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rfidlab/data/image_batch.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

inline constexpr int kNumClasses = 10;

struct ToyDatasetSpec {
  std::size_t train_per_class = 600;
  std::size_t eval_per_class = 820;
  std::uint64_t seed = 2023;
  float signature_amplitude = 0.03f;
  float shapeless_fraction = 0.3f;  // items drawn without their shape; only the signature tells them apart
};

struct ToyDataset {
  ImageBatch train;
  ImageBatch eval;
  // Global render index of every item; train and eval draw from disjoint ranges.
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> eval_ids;
};

namespace detail {

struct PatternParams {
  float cx, cy, size, width, phase, period;
  float fg[3], bg[3];
};

// Coverage of the foreground at pixel (x, y) for class `cls`, in [0,1].
inline float pattern_mask(int cls, const PatternParams& p, float x, float y) {
  const float dx = x - p.cx, dy = y - p.cy;
  const float r = std::sqrt(dx * dx + dy * dy);
  constexpr float pi = 3.14159265358979f;
  auto stripe = [&](float coord) {
    return std::fmod(coord + p.phase + 64 * p.period, p.period) < p.period * 0.5f ? 1.f : 0.f;
  };
  switch (cls) {
    case 0: return r <= p.size ? 1.f : 0.f;                                     // disk
    case 1: return std::abs(r - p.size) <= p.width ? 1.f : 0.f;                 // ring
    case 2: return stripe(y);                                                   // horizontal stripes
    case 3: return stripe(x);                                                   // vertical stripes
    case 4: return stripe((x + y) * 0.70710678f);                               // diagonal stripes
    case 5: {                                                                   // checkerboard
      int a = static_cast<int>(std::floor((x + p.phase) / (p.period * 0.5f)));
      int b = static_cast<int>(std::floor((y + p.phase) / (p.period * 0.5f)));
      return ((a + b) & 1) ? 1.f : 0.f;
    }
    case 6: return (std::abs(dx) <= p.size && std::abs(dy) <= p.size) ? 1.f : 0.f;  // square
    case 7: return (std::abs(dx) <= p.width || std::abs(dy) <= p.width) &&          // plus
                           std::abs(dx) <= p.size + 3 && std::abs(dy) <= p.size + 3
                       ? 1.f
                       : 0.f;
    case 8: return std::exp(-(r * r) / (2 * p.size * p.size * 0.25f));         // soft blob
    case 9: {                                                                   // triangle
      float top = p.cy - p.size, bottom = p.cy + p.size;
      if (y < top || y > bottom) return 0.f;
      float half = (y - top) * std::tan(pi / 6) * 1.2f;
      return std::abs(dx) <= half ? 1.f : 0.f;
    }
    default: return 0.f;
  }
}

// Faint class signature: a +-1 shading pattern per channel on a 4x4 grid of
// 8x8 blocks. It is a cheap, low-amplitude cue, the kind nominal training
// latches onto and adversarial training has to give up.
inline const std::vector<float>& class_signature(int cls) {
  static const std::vector<std::vector<float>> textures = [] {
    constexpr std::size_t grid = 4, block = kImageSize / grid;
    std::vector<std::vector<float>> t(kNumClasses, std::vector<float>(kPixels));
    for (int c = 0; c < kNumClasses; ++c) {
      Rng rng(derive_seed(0x7e47u, static_cast<std::uint64_t>(c)));
      std::bernoulli_distribution coin(0.5);
      float sign[kChannels][grid][grid];
      for (auto& ch : sign)
        for (auto& row : ch)
          for (auto& v : row) v = coin(rng) ? 1.f : -1.f;
      for (std::size_t ch = 0; ch < kChannels; ++ch)
        for (std::size_t y = 0; y < kImageSize; ++y)
          for (std::size_t x = 0; x < kImageSize; ++x)
            t[c][(ch * kImageSize + y) * kImageSize + x] = sign[ch][y / block][x / block];
    }
    return t;
  }();
  return textures.at(static_cast<std::size_t>(cls));
}

inline void render_item(int cls, std::uint64_t item_seed, float signature_amplitude, float shapeless_fraction, float* out) {
  Rng rng(item_seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  PatternParams p{};
  p.cx = 15.5f + (u(rng) - 0.5f) * 8.f;
  p.cy = 15.5f + (u(rng) - 0.5f) * 8.f;
  p.size = 6.f + u(rng) * 4.f;
  p.width = 1.5f + u(rng) * 1.5f;
  p.phase = u(rng) * 8.f;
  p.period = 6.f + u(rng) * 4.f;
  for (int c = 0; c < 3; ++c) p.bg[c] = 0.05f + 0.35f * u(rng);
  for (int c = 0; c < 3; ++c) p.fg[c] = 0.6f + 0.35f * u(rng);
  if (u(rng) < shapeless_fraction)
    for (int c = 0; c < 3; ++c) p.fg[c] = p.bg[c];
  std::normal_distribution<float> noise(0.f, 0.03f);
  constexpr std::size_t hw = kImageSize * kImageSize;
  for (std::size_t y = 0; y < kImageSize; ++y)
    for (std::size_t x = 0; x < kImageSize; ++x) {
      const float m = pattern_mask(cls, p, static_cast<float>(x), static_cast<float>(y));
      for (std::size_t c = 0; c < kChannels; ++c) {
        const std::size_t at = c * hw + y * kImageSize + x;
        float v = p.bg[c] + m * (p.fg[c] - p.bg[c]) + noise(rng) + signature_amplitude * class_signature(cls)[at];
        out[at] = std::clamp(v, 0.f, 1.f);
      }
    }
}

// Items are interleaved by class (label = index mod 10), so any prefix is
// close to balanced.
inline ImageBatch render_range(std::uint64_t seed, std::uint64_t first_id, std::size_t count,
                               float signature_amplitude, float shapeless_fraction, std::vector<std::uint64_t>& ids) {
  auto batch = ImageBatch::zeros(count);
  batch.labels.resize(count);
  auto data = batch.images.mutable_data();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t id = first_id + i;
    const int cls = static_cast<int>(i % kNumClasses);
    batch.labels[i] = cls;
    ids.push_back(id);
    render_item(cls, derive_seed(seed, id), signature_amplitude, shapeless_fraction, data.data() + i * kPixels);
  }
  return batch;
}

}  // namespace detail

inline ToyDataset generate_dataset(const ToyDatasetSpec& spec) {
  ToyDataset ds;
  const std::size_t n_train = spec.train_per_class * kNumClasses;
  const std::size_t n_eval = spec.eval_per_class * kNumClasses;
  ds.train = detail::render_range(spec.seed, 0, n_train, spec.signature_amplitude, spec.shapeless_fraction, ds.train_ids);
  ds.eval = detail::render_range(spec.seed, n_train, n_eval, spec.signature_amplitude, spec.shapeless_fraction, ds.eval_ids);
  return ds;
}

}  // namespace rfidlab
