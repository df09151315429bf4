#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "rfidlab/autodiff/loss.hpp"
#include "rfidlab/models/embedder.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

// v <- v * min(1, kappa / ||v||_2)
inline void l2_project(std::span<float> v, double kappa) {
  double sq = 0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm <= kappa || norm == 0) return;
  const double s = kappa / norm;
  for (auto& x : v) x = static_cast<float>(x * s);
}

struct PgdL2Options {
  double kappa = 0;
  std::size_t steps = 2;
  double step_size = 0;     // per step, along the normalized gradient
  bool gaussian_init = true;
  std::uint64_t seed = 0;   // init noise for item i uses derive_seed(seed, first_index + i)
  std::size_t first_index = 0;
};

// Untargeted L2 PGD on the cross entropy: returns x + delta with
// ||delta_i||_2 <= kappa per item and pixels kept in [0, 1]. `model` should be
// frozen; only the input is differentiated.
inline ad::Tensor<float> pgd_l2(const MiniEmbedder<float>& model, const ad::Tensor<float>& x,
                                std::span<const int> labels, const PgdL2Options& opt) {
  const std::size_t n = x.dim(0), d = x.numel() / std::max<std::size_t>(n, 1);
  const auto clean = x.data();
  std::vector<float> delta(x.numel(), 0.f);
  auto fix = [&](std::size_t i) {
    std::span<float> di(delta.data() + i * d, d);
    l2_project(di, opt.kappa);
    // Clamping toward the valid range only shrinks |delta_j|, so the norm bound survives.
    for (std::size_t j = 0; j < d; ++j) di[j] = std::clamp(clean[i * d + j] + di[j], 0.f, 1.f) - clean[i * d + j];
  };
  if (opt.kappa <= 0) return x.detach();
  if (opt.gaussian_init) {
    const double sigma = opt.kappa / (2.0 * std::sqrt(static_cast<double>(d)));
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(opt.seed, opt.first_index + i));
      std::normal_distribution<double> g(0.0, sigma);
      for (std::size_t j = 0; j < d; ++j) delta[i * d + j] = static_cast<float>(g(rng));
      fix(i);
    }
  }
  for (std::size_t step = 0; step < opt.steps; ++step) {
    std::vector<float> adv(x.numel());
    for (std::size_t k = 0; k < adv.size(); ++k) adv[k] = clean[k] + delta[k];
    ad::Tensor<float> xa(x.shape(), std::move(adv), true);
    ad::backward(ad::cross_entropy(model.logits(xa), labels, ad::Reduction::sum));
    const auto g = xa.grad();
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0;
      for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(g[i * d + j]) * g[i * d + j];
      if (sq == 0) continue;
      const double s = opt.step_size / std::sqrt(sq);
      for (std::size_t j = 0; j < d; ++j) delta[i * d + j] += static_cast<float>(s * g[i * d + j]);
      fix(i);
    }
  }
  std::vector<float> out(x.numel());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = clean[k] + delta[k];
  return ad::Tensor<float>(x.shape(), std::move(out));
}

}  // namespace rfidlab
