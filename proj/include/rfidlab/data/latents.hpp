#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rfidlab/autodiff/tensor.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

enum class LatentFamily { standard_normal, shifted_normal, normal_plus_uniform, uniform };

struct LatentDistribution {
  LatentFamily family = LatentFamily::standard_normal;
  double mu = 0.0;  // shift for the normal families
};

inline LatentFamily parse_latent_family(const std::string& name) {
  if (name == "standard-normal") return LatentFamily::standard_normal;
  if (name == "shifted-normal") return LatentFamily::shifted_normal;
  if (name == "normal-plus-uniform") return LatentFamily::normal_plus_uniform;
  if (name == "uniform") return LatentFamily::uniform;
  fail(ErrorKind::invalid_argument, "unknown latent family '" + name + "'");
}

// (n, dim) i.i.d. draws; row i depends only on (seed, i).
inline ad::Tensor<float> sample_latents(std::size_t n, std::size_t dim,
                                        const LatentDistribution& dist, std::uint64_t seed) {
  std::vector<float> z(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0;
      switch (dist.family) {
        case LatentFamily::standard_normal: v = normal(rng); break;
        case LatentFamily::shifted_normal: v = dist.mu + normal(rng); break;
        case LatentFamily::normal_plus_uniform: v = dist.mu + normal(rng) + unif(rng); break;
        case LatentFamily::uniform: v = unif(rng); break;
      }
      z[i * dim + j] = static_cast<float>(v);
    }
  }
  return ad::Tensor<float>({n, dim}, std::move(z));
}

// Exact 1-D W1 between equal-size empirical samples: mean |sorted a - sorted b|.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::invalid_argument,
          "wasserstein_1d: sample counts differ (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
  return acc / static_cast<double>(sa.size());
}

}  // namespace rfidlab
