#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rfidlab/autodiff/ops.hpp"

namespace rfidlab::ad {

enum class Reduction { mean, sum };

// Per-item cross-entropy -log softmax(logits)[label], (N, C) -> (N).
// Uses the log-sum-exp shift, so saturated logits stay finite.
template <class T>
Tensor<T> cross_entropy_items(const Tensor<T>& logits, std::span<const int> labels) {
  detail::expect_rank("cross_entropy", logits.shape(), 2);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n)
    detail::shape_error("cross_entropy", std::to_string(labels.size()) + " labels for logits " +
                                             shape_str(logits.shape()));
  for (std::size_t i = 0; i < n; ++i)
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c, ErrorKind::invalid_argument,
            "cross_entropy: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                " outside [0, " + std::to_string(c) + ")");

  std::vector<T> logp(logits.numel());
  std::vector<T> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    detail::row_log_softmax(logits.data().data() + r * c, c, logp.data() + r * c);
    out[r] = -logp[r * c + static_cast<std::size_t>(labels[r])];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result<T>(
      "cross_entropy", Shape{n}, std::move(out), {logits},
      [n, c, lab = std::move(lab), logp = std::move(logp)](Node<T>& self) {
        if (auto* p = detail::tracked_parent(self, 0))
          for (std::size_t r = 0; r < n; ++r) {
            const T g = self.grad[r];
            for (std::size_t j = 0; j < c; ++j) {
              T prob = std::exp(logp[r * c + j]);
              if (static_cast<int>(j) == lab[r]) prob -= T(1);
              p->grad[r * c + j] += g * prob;
            }
          }
      });
}

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                        Reduction reduction = Reduction::mean) {
  auto items = cross_entropy_items(logits, labels);
  return reduction == Reduction::mean ? mean(items) : sum(items);
}

}  // namespace rfidlab::ad
