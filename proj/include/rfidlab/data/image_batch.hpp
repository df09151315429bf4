#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rfidlab/autodiff/tensor.hpp"

namespace rfidlab {

inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kPixels = kChannels * kImageSize * kImageSize;

// Images in [0,1], shape (N, 3, 32, 32). Labels are optional (empty when absent).
struct ImageBatch {
  ad::Tensor<float> images;
  std::vector<int> labels;

  std::size_t size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  bool has_labels() const { return !labels.empty(); }

  static ImageBatch zeros(std::size_t n) {
    return {ad::Tensor<float>::zeros({n, kChannels, kImageSize, kImageSize}), {}};
  }

  // Rows [begin, end) as an independent batch.
  ImageBatch slice(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= size(), ErrorKind::invalid_argument,
            "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of batch of " +
                std::to_string(size()));
    auto first = images.values().begin() + static_cast<std::ptrdiff_t>(begin * kPixels);
    auto last = images.values().begin() + static_cast<std::ptrdiff_t>(end * kPixels);
    ImageBatch out{ad::Tensor<float>({end - begin, kChannels, kImageSize, kImageSize},
                                     std::vector<float>(first, last)),
                   {}};
    if (has_labels()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
    return out;
  }
};

// Throws unless the batch has the canonical shape and every value is in [0,1].
inline void validate_batch(const ImageBatch& batch, const std::string& what) {
  const auto& s = batch.images.shape();
  require(s.size() == 4 && s[1] == kChannels && s[2] == kImageSize && s[3] == kImageSize,
          ErrorKind::shape_mismatch,
          what + ": expected (N,3,32,32) images, got " + ad::shape_str(s));
  require(!batch.has_labels() || batch.labels.size() == s[0], ErrorKind::shape_mismatch,
          what + ": label count does not match image count");
  for (float v : batch.images.data())
    require(v >= 0.f && v <= 1.f, ErrorKind::invalid_argument,
            what + ": pixel value " + std::to_string(v) + " outside [0,1]");
}

}  // namespace rfidlab
