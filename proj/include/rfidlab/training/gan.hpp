#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/data/latents.hpp"
#include "rfidlab/data/toy_dataset.hpp"
#include "rfidlab/metrics/scores.hpp"
#include "rfidlab/models/checkpoint.hpp"
#include "rfidlab/training/optim.hpp"
#include "rfidlab/training/train.hpp"

namespace rfidlab {

// Small strided-conv critic used only while training the generator.
template <class T = float>
class MiniDiscriminator {
 public:
  enum Param : std::size_t { d1w, d1b, d2w, d2b, d3w, d3b, fw, fb };
  static constexpr T kSlope = T(0.2);

  explicit MiniDiscriminator(std::size_t width = 16) : width_(width) {
    params_.add("d1.weight", {width, kChannels, 4, 4});
    params_.add("d1.bias", {width});
    params_.add("d2.weight", {2 * width, width, 4, 4});
    params_.add("d2.bias", {2 * width});
    params_.add("d3.weight", {4 * width, 2 * width, 4, 4});
    params_.add("d3.bias", {4 * width});
    params_.add("fc.weight", {1, 4 * width * 16});
    params_.add("fc.bias", {1});
  }

  static MiniDiscriminator initialized(std::size_t width, std::uint64_t seed) {
    MiniDiscriminator d(width);
    Rng rng(derive_seed(seed, 0xd15));
    init_normal(d.params_[d1w], kChannels * 16, 1.0, rng);
    init_normal(d.params_[d2w], width * 16, 1.0, rng);
    init_normal(d.params_[d3w], 2 * width * 16, 1.0, rng);
    init_normal(d.params_[fw], 4 * width * 16, 0.5, rng);
    return d;
  }

  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // (N, 3, 32, 32) -> (N, 1) realness logits
  ad::Tensor<T> operator()(const ad::Tensor<T>& x) const {
    auto h = ad::leaky_relu(ad::conv2d(x, params_[d1w], params_[d1b], 2, 1), kSlope);
    h = ad::leaky_relu(ad::conv2d(h, params_[d2w], params_[d2b], 2, 1), kSlope);
    h = ad::leaky_relu(ad::conv2d(h, params_[d3w], params_[d3b], 2, 1), kSlope);
    return ad::linear(ad::flatten(h), params_[fw], params_[fb]);
  }

  template <class U>
  MiniDiscriminator<U> cast(bool trainable = false) const {
    MiniDiscriminator<U> out(width_);
    out.params() = params_.template cast<U>(trainable);
    return out;
  }

 private:
  std::size_t width_;
  ParameterSet<T> params_;
};

struct GanConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t disc_width = 16;
  std::size_t w_bar_samples = 4096;
  std::size_t fid_samples = 4096;  // generated vs real for the recorded FID; 0 skips it
  std::uint64_t seed = 3;
  StyleGenConfig arch;

  void validate() const {
    require(epochs >= 1, ErrorKind::config, "train_generator: epochs must be >= 1");
    require(batch_size >= 2, ErrorKind::config, "train_generator: batch_size must be >= 2");
    require(lr_g > 0 && lr_d > 0, ErrorKind::config, "train_generator: learning rates must be > 0");
    require(w_bar_samples >= 1, ErrorKind::config, "train_generator: w_bar_samples must be >= 1");
  }
};

// Non-saturating GAN with alternating 1:1 updates. The real images are the
// training split; `embedder` (optional) scores the result.
inline TrainResult train_generator(const ToyDataset& data, const GanConfig& cfg, const Embedder* embedder = nullptr) {
  cfg.validate();
  validate_batch(data.train, "train_generator");
  auto gen = MiniStyleGen<float>::initialized(cfg.arch, derive_seed(cfg.seed, 1));
  auto disc = MiniDiscriminator<float>::initialized(cfg.disc_width, derive_seed(cfg.seed, 2));
  Adam opt_g(cfg.lr_g, cfg.beta1, cfg.beta2), opt_d(cfg.lr_d, cfg.beta1, cfg.beta2);
  const std::size_t n = data.train.size(), per_epoch = n / cfg.batch_size, z_dim = cfg.arch.z_dim;
  require(per_epoch >= 1, ErrorKind::config, "train_generator: fewer training images than one batch");
  std::vector<std::size_t> order(n);
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  std::uint64_t step = 0;
  double last_std = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double d_sum = 0, g_sum = 0;
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const std::size_t m = cfg.batch_size;
      auto real = detail::gather(data.train, std::span<const std::size_t>(order).subspan(b * m, m));
      auto z = sample_latents(m, z_dim, {}, derive_seed(cfg.seed, 0x9a4000000ull + step));
      ImageBatch fake;
      {
        ad::NoGradGuard guard;
        fake = {gen.synthesis(gen.mapping(z)).detach(), {}};
      }
      // Discriminator: softplus(-D(real)) + softplus(D(fake)).
      GradientSet gd;
      const double d_loss = accumulate_gradient<MiniDiscriminator<float>>(
          disc, m,
          [&](MiniDiscriminator<float>& d, std::size_t lo, std::size_t hi) {
            auto on_real = ad::softplus(ad::scale(d(real.slice(lo, hi).images), -1.f));
            auto on_fake = ad::softplus(d(fake.slice(lo, hi).images));
            return ad::add(ad::sum(on_real), ad::sum(on_fake));
          },
          gd);
      opt_d.step(disc.params(), gd, m);
      // Generator: softplus(-D(G(z))).
      const auto frozen_d = disc.cast<float>(false);
      GradientSet gg;
      const double g_loss = accumulate_gradient<MiniStyleGen<float>>(
          gen, m,
          [&](MiniStyleGen<float>& g, std::size_t lo, std::size_t hi) {
            ad::Tensor<float> zs({hi - lo, z_dim}, std::vector<float>(z.data().begin() + lo * z_dim,
                                                                      z.data().begin() + hi * z_dim));
            return ad::sum(ad::softplus(ad::scale(frozen_d(g.synthesis(g.mapping(zs))), -1.f)));
          },
          gg);
      opt_g.step(gen.params(), gg, m);
      if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
        fail(ErrorKind::divergence, "generator training diverged in epoch " + std::to_string(epoch + 1));
      d_sum += d_loss / static_cast<double>(m);
      g_sum += g_loss / static_cast<double>(m);
      if (b + 1 == per_epoch) {
        double mean = 0, sq = 0;
        for (float v : fake.images.data()) mean += v;
        mean /= static_cast<double>(fake.images.numel());
        for (float v : fake.images.data()) sq += (v - mean) * (v - mean);
        last_std = std::sqrt(sq / static_cast<double>(fake.images.numel()));
      }
    }
    log.push_back({{"epoch", epoch + 1},
                   {"d_loss", d_sum / static_cast<double>(per_epoch)},
                   {"g_loss", g_sum / static_cast<double>(per_epoch)},
                   {"sample_std", last_std}});
  }
  // The generator keeps the truncation anchor outside the trainable params.
  compute_w_bar(gen, cfg.w_bar_samples, derive_seed(cfg.seed, 0x3b));
  Provenance prov;
  prov.training = TrainingKind::gan;
  prov.epochs = cfg.epochs;
  prov.seed = cfg.seed;
  prov.metrics["sample_std"] = last_std;
  if (last_std < 1e-3) prov.metrics["warnings"] = {"mode collapse: generated batch std below 1e-3"};
  if (embedder && cfg.fid_samples >= 2) {
    const std::size_t k = std::min(cfg.fid_samples, data.eval.size());
    auto samples = generate(gen, sample_latents(k, z_dim, {}, derive_seed(cfg.seed, 0xf1d)), 1.0);
    prov.metrics["fid"] = fid(*embedder, samples, data.eval.slice(0, k)).value;
    prov.metrics["fid_samples"] = k;
  }
  return {to_checkpoint(gen, prov), std::move(log)};
}

}  // namespace rfidlab
