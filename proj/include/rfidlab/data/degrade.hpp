#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rfidlab/data/image_batch.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

// x + N(0, sigma^2) per pixel, then clamped to [0,1]. Clamping biases the
// realized noise std downward once sigma is large.
inline ImageBatch gaussian_noise(const ImageBatch& batch, double sigma, std::uint64_t seed) {
  require(sigma >= 0, ErrorKind::invalid_argument, "gaussian_noise: sigma must be >= 0");
  ImageBatch out{batch.images.detach(), batch.labels};
  if (sigma == 0) return out;
  auto data = out.images.mutable_data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    std::normal_distribution<double> n(0.0, sigma);
    float* px = data.data() + i * kPixels;
    for (std::size_t j = 0; j < kPixels; ++j)
      px[j] = static_cast<float>(std::clamp(px[j] + n(rng), 0.0, 1.0));
  }
  return out;
}

inline std::size_t blur_radius(double sigma) { return static_cast<std::size_t>(std::ceil(3 * sigma)); }

// Normalized 1-D Gaussian taps over [-radius, radius].
inline std::vector<double> gaussian_kernel_1d(double sigma) {
  const auto radius = static_cast<long>(blur_radius(sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (long i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-double(i * i) / (2 * sigma * sigma));
    total += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= total;
  return k;
}

// Normalized 2-D Gaussian, row-major (2r+1) x (2r+1).
inline std::vector<double> gaussian_kernel_2d(double sigma) {
  const auto k1 = gaussian_kernel_1d(sigma);
  std::vector<double> k(k1.size() * k1.size());
  for (std::size_t i = 0; i < k1.size(); ++i)
    for (std::size_t j = 0; j < k1.size(); ++j) k[i * k1.size() + j] = k1[i] * k1[j];
  return k;
}

namespace detail {
// Reflect padding without repeating the edge sample: -1 -> 1, n -> n-2.
inline std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}
}  // namespace detail

// Per-channel convolution with a normalized Gaussian of radius ceil(3 sigma),
// reflect padding. The 2-D kernel is separable, so it is applied as two 1-D passes.
inline ImageBatch gaussian_blur(const ImageBatch& batch, double sigma) {
  require(sigma > 0, ErrorKind::invalid_argument, "gaussian_blur: sigma must be > 0");
  const auto k = gaussian_kernel_1d(sigma);
  const long r = static_cast<long>(blur_radius(sigma));
  const long n = static_cast<long>(kImageSize);
  ImageBatch out{batch.images.detach(), batch.labels};
  auto data = out.images.mutable_data();
  std::vector<double> plane(kImageSize * kImageSize), tmp(kImageSize * kImageSize);
  const std::size_t planes = batch.size() * kChannels;
  for (std::size_t p = 0; p < planes; ++p) {
    float* px = data.data() + p * kImageSize * kImageSize;
    std::copy(px, px + plane.size(), plane.begin());
    for (long y = 0; y < n; ++y)
      for (long x = 0; x < n; ++x) {
        double acc = 0;
        for (long t = -r; t <= r; ++t)
          acc += k[static_cast<std::size_t>(t + r)] *
                 plane[static_cast<std::size_t>(y * n) + detail::reflect_index(x + t, n)];
        tmp[static_cast<std::size_t>(y * n + x)] = acc;
      }
    for (long y = 0; y < n; ++y)
      for (long x = 0; x < n; ++x) {
        double acc = 0;
        for (long t = -r; t <= r; ++t)
          acc += k[static_cast<std::size_t>(t + r)] *
                 tmp[detail::reflect_index(y + t, n) * kImageSize + static_cast<std::size_t>(x)];
        px[y * n + x] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  }
  return out;
}

// Un-optimized noise images: i.i.d. uniform [0,1] pixels.
inline ImageBatch random_noise_images(std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "random_noise_images: n must be >= 1");
  auto out = ImageBatch::zeros(n);
  auto data = out.images.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (std::size_t j = 0; j < kPixels; ++j) data[i * kPixels + j] = u(rng);
  }
  return out;
}

}  // namespace rfidlab
