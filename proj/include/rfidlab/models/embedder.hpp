#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rfidlab/autodiff/ops.hpp"
#include "rfidlab/data/image_batch.hpp"
#include "rfidlab/models/parameters.hpp"
#include "rfidlab/util/parallel.hpp"

namespace rfidlab {

struct EmbedderConfig {
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t conv3 = 32;
  std::size_t embed_dim = 64;
  std::size_t classes = 10;

  bool operator==(const EmbedderConfig&) const = default;
};

// Desk-scale stand-in for the Inception network: three conv + avg-pool
// blocks, a dense embedding head f(x) (the penultimate activation) and a
// linear classifier on top of f(x).
template <class T = float>
class MiniEmbedder {
 public:
  enum Param : std::size_t { c1w, c1b, c2w, c2b, c3w, c3b, ew, eb, hw, hb };

  static constexpr T kEmbedSlope = T(0.2);

  explicit MiniEmbedder(EmbedderConfig config = {}) : config_(config) {
    const auto& c = config_;
    params_.add("conv1.weight", {c.conv1, kChannels, 3, 3});
    params_.add("conv1.bias", {c.conv1});
    params_.add("conv2.weight", {c.conv2, c.conv1, 3, 3});
    params_.add("conv2.bias", {c.conv2});
    params_.add("conv3.weight", {c.conv3, c.conv2, 3, 3});
    params_.add("conv3.bias", {c.conv3});
    params_.add("embed.weight", {c.embed_dim, c.conv3 * 16});
    params_.add("embed.bias", {c.embed_dim});
    params_.add("head.weight", {c.classes, c.embed_dim});
    params_.add("head.bias", {c.classes});
  }

  // Random init with zero biases; the classifier head starts small so the
  // untrained posterior is close to uniform.
  static MiniEmbedder initialized(EmbedderConfig config, std::uint64_t seed) {
    MiniEmbedder m(config);
    Rng rng(derive_seed(seed, 0xe3b));
    const auto& c = m.config_;
    init_normal(m.params_[c1w], kChannels * 9, 1.0, rng);
    init_normal(m.params_[c2w], c.conv1 * 9, 1.0, rng);
    init_normal(m.params_[c3w], c.conv2 * 9, 1.0, rng);
    init_normal(m.params_[ew], c.conv3 * 16, 1.0, rng);
    init_normal(m.params_[hw], c.embed_dim, 0.1, rng);
    return m;
  }

  const EmbedderConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // f(x): (N, 3, 32, 32) -> (N, embed_dim)
  ad::Tensor<T> embedding(const ad::Tensor<T>& x) const {
    auto block = [this](const ad::Tensor<T>& in, Param w, Param b) {
      return ad::avg_pool2d(ad::relu(ad::conv2d(in, params_[w], params_[b], 1, 1)), 2);
    };
    auto h = block(x, c1w, c1b);
    h = block(h, c2w, c2b);
    h = block(h, c3w, c3b);
    return ad::leaky_relu(ad::linear(ad::flatten(h), params_[ew], params_[eb]), kEmbedSlope);
  }

  ad::Tensor<T> logits_from_embedding(const ad::Tensor<T>& e) const {
    return ad::linear(e, params_[hw], params_[hb]);
  }

  ad::Tensor<T> logits(const ad::Tensor<T>& x) const { return logits_from_embedding(embedding(x)); }

  // Copy whose parameters do not participate in differentiation.
  MiniEmbedder frozen() const { return cast<T>(false); }

  template <class U>
  MiniEmbedder<U> cast(bool trainable = false) const {
    MiniEmbedder<U> out(config_);
    out.params() = params_.template cast<U>(trainable);
    return out;
  }

 private:
  EmbedderConfig config_;
  ParameterSet<T> params_;
};

namespace detail {
inline constexpr std::size_t kInferenceChunk = 128;

// Runs fn on row chunks of `batch` without recording, writing `width` values per row.
template <class Fn>
ad::Tensor<float> map_chunks(const ImageBatch& batch, std::size_t width, Fn fn) {
  const std::size_t n = batch.size();
  std::vector<float> out(n * width);
  const std::size_t chunks = (n + kInferenceChunk - 1) / kInferenceChunk;
  parallel_for(chunks, [&](std::size_t c) {
    ad::NoGradGuard guard;
    const std::size_t lo = c * kInferenceChunk, hi = std::min(n, lo + kInferenceChunk);
    auto rows = fn(batch.slice(lo, hi).images);
    std::copy(rows.data().begin(), rows.data().end(), out.begin() + static_cast<std::ptrdiff_t>(lo * width));
  });
  return ad::Tensor<float>({n, width}, std::move(out));
}
}  // namespace detail

// Rows are f(x_i). Inference only; for gradients call model.embedding directly.
inline ad::Tensor<float> embed(const MiniEmbedder<float>& model, const ImageBatch& batch) {
  validate_batch(batch, "embed");
  return detail::map_chunks(batch, model.config().embed_dim,
                            [&](const ad::Tensor<float>& x) { return model.embedding(x); });
}

// Rows are softmax(logits(x_i)).
inline ad::Tensor<float> posterior(const MiniEmbedder<float>& model, const ImageBatch& batch) {
  validate_batch(batch, "posterior");
  return detail::map_chunks(batch, model.config().classes, [&](const ad::Tensor<float>& x) {
    return ad::softmax(model.logits(x));
  });
}

}  // namespace rfidlab
