#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rfidlab/autodiff/ops.hpp"
#include "rfidlab/data/image_batch.hpp"
#include "rfidlab/data/latents.hpp"
#include "rfidlab/models/parameters.hpp"

namespace rfidlab {

struct StyleGenConfig {
  std::size_t z_dim = 64;
  std::size_t w_dim = 64;
  std::size_t mapping_hidden = 64;
  std::size_t base_channels = 32;  // at 4x4; halves at each upsampling block

  bool operator==(const StyleGenConfig&) const = default;
};

// Desk-scale style-based generator: mapping MLP z -> w, truncation toward
// w_bar, and a synthesis network w -> dense 4x4 -> 3 transposed-conv blocks
// -> sigmoid image in [0,1].
template <class T = float>
class MiniStyleGen {
 public:
  enum Param : std::size_t { m1w, m1b, m2w, m2b, fcw, fcb, t1w, t1b, t2w, t2b, t3w, t3b };

  static constexpr T kSlope = T(0.2);

  explicit MiniStyleGen(StyleGenConfig config = {}) : config_(config) {
    const auto& c = config_;
    const std::size_t b = c.base_channels;
    params_.add("mapping1.weight", {c.mapping_hidden, c.z_dim});
    params_.add("mapping1.bias", {c.mapping_hidden});
    params_.add("mapping2.weight", {c.w_dim, c.mapping_hidden});
    params_.add("mapping2.bias", {c.w_dim});
    params_.add("synthesis.fc.weight", {b * 16, c.w_dim});
    params_.add("synthesis.fc.bias", {b * 16});
    params_.add("synthesis.up1.weight", {b, b / 2, 4, 4});
    params_.add("synthesis.up1.bias", {b / 2});
    params_.add("synthesis.up2.weight", {b / 2, b / 4, 4, 4});
    params_.add("synthesis.up2.bias", {b / 4});
    params_.add("synthesis.up3.weight", {b / 4, kChannels, 4, 4});
    params_.add("synthesis.up3.bias", {kChannels});
    w_bar_ = ad::Tensor<T>::zeros({c.w_dim});
  }

  static MiniStyleGen initialized(StyleGenConfig config, std::uint64_t seed) {
    MiniStyleGen g(config);
    Rng rng(derive_seed(seed, 0x57e));
    const auto& c = g.config_;
    const std::size_t b = c.base_channels;
    init_normal(g.params_[m1w], c.z_dim, 1.0, rng);
    init_normal(g.params_[m2w], c.mapping_hidden, 0.7, rng);
    init_normal(g.params_[fcw], c.w_dim, 1.0, rng);
    // Transposed conv with k=4, s=2 reaches each output from 4 taps per input channel.
    init_normal(g.params_[t1w], b * 4, 1.0, rng);
    init_normal(g.params_[t2w], b / 2 * 4, 1.0, rng);
    init_normal(g.params_[t3w], b / 4 * 4, 0.5, rng);
    return g;
  }

  const StyleGenConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const ad::Tensor<T>& w_bar() const { return w_bar_; }
  void set_w_bar(ad::Tensor<T> w) {
    require(w.numel() == config_.w_dim, ErrorKind::shape_mismatch, "w_bar has wrong dimension");
    w_bar_ = ad::reshape(w.detach(), ad::Shape{config_.w_dim});
  }

  // Observer for the truncated w entering synthesis; instrumentation only.
  std::function<void(const ad::Tensor<T>&)> on_truncated;

  // (N, z_dim) -> (N, w_dim)
  ad::Tensor<T> mapping(const ad::Tensor<T>& z) const {
    auto h = ad::leaky_relu(ad::linear(z, params_[m1w], params_[m1b]), kSlope);
    return ad::linear(h, params_[m2w], params_[m2b]);
  }

  // alpha * w + (1 - alpha) * w_bar
  ad::Tensor<T> truncate(const ad::Tensor<T>& w, double alpha) const {
    if (alpha == 1.0) return w;
    std::vector<T> anchor(w_bar_.numel());
    for (std::size_t i = 0; i < anchor.size(); ++i)
      anchor[i] = static_cast<T>((1.0 - alpha) * static_cast<double>(w_bar_.data()[i]));
    const std::size_t d = anchor.size();
    return ad::add_row(ad::scale(w, static_cast<T>(alpha)), ad::Tensor<T>({d}, std::move(anchor)));
  }

  // (N, w_dim) -> (N, 3, 32, 32), values in (0, 1)
  ad::Tensor<T> synthesis(const ad::Tensor<T>& w) const {
    const std::size_t n = w.dim(0), b = config_.base_channels;
    auto h = ad::leaky_relu(ad::linear(w, params_[fcw], params_[fcb]), kSlope);
    h = ad::reshape(h, {n, b, 4, 4});
    h = ad::leaky_relu(ad::conv_transpose2d(h, params_[t1w], params_[t1b], 2, 1), kSlope);
    h = ad::leaky_relu(ad::conv_transpose2d(h, params_[t2w], params_[t2b], 2, 1), kSlope);
    return ad::sigmoid(ad::conv_transpose2d(h, params_[t3w], params_[t3b], 2, 1));
  }

  // G(z) at truncation alpha; differentiable w.r.t. z.
  ad::Tensor<T> forward(const ad::Tensor<T>& z, double alpha) const {
    require(alpha >= 0.0 && alpha <= 2.0, ErrorKind::invalid_argument,
            "truncation alpha " + std::to_string(alpha) + " outside [0, 2]");
    require(z.rank() == 2 && z.dim(1) == config_.z_dim, ErrorKind::shape_mismatch,
            "generate: expected latents (N, " + std::to_string(config_.z_dim) + "), got " +
                ad::shape_str(z.shape()));
    z.check_finite("generate: latent z");
    auto w = truncate(mapping(z), alpha);
    if (on_truncated) on_truncated(w);
    return synthesis(w);
  }

  MiniStyleGen frozen() const { return cast<T>(false); }

  template <class U>
  MiniStyleGen<U> cast(bool trainable = false) const {
    MiniStyleGen<U> out(config_);
    out.params() = params_.template cast<U>(trainable);
    out.set_w_bar(w_bar_.template cast<U>());
    return out;
  }

 private:
  StyleGenConfig config_;
  ParameterSet<T> params_;
  ad::Tensor<T> w_bar_;
};

// Inference-only generation into an ImageBatch.
inline ImageBatch generate(const MiniStyleGen<float>& gen, const ad::Tensor<float>& z, double alpha) {
  ad::NoGradGuard guard;
  return {gen.forward(z, alpha).detach(), {}};
}

// Mean of mapping(z_i) over n standard-normal draws; stored in gen.
inline ad::Tensor<float> compute_w_bar(MiniStyleGen<float>& gen, std::size_t n_samples, std::uint64_t seed) {
  require(n_samples >= 1, ErrorKind::invalid_argument, "compute_w_bar: n_samples must be >= 1");
  ad::NoGradGuard guard;
  auto z = sample_latents(n_samples, gen.config().z_dim, {}, seed);
  auto w = gen.mapping(z);
  const std::size_t d = gen.config().w_dim;
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i)
    for (std::size_t j = 0; j < d; ++j) acc[j] += w.data()[i * d + j];
  std::vector<float> mean(d);
  for (std::size_t j = 0; j < d; ++j) mean[j] = static_cast<float>(acc[j] / static_cast<double>(n_samples));
  ad::Tensor<float> w_bar({d}, std::move(mean));
  gen.set_w_bar(w_bar);
  return w_bar;
}

}  // namespace rfidlab
