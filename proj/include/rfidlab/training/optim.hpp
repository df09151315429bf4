#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rfidlab/models/parameters.hpp"
#include "rfidlab/util/parallel.hpp"

namespace rfidlab {

// Summed gradient per parameter tensor, in ParameterSet order.
using GradientSet = std::vector<std::vector<double>>;

inline constexpr std::size_t kSubBatch = 16;

// Evaluates `loss(replica, lo, hi)` on fixed sub-batches of [0, n), each on a
// private trainable copy of the model, and sums the gradients in sub-batch
// order. The loss must be a sum over its items. Returns the summed loss.
// Because sub-batches have a fixed size and reduction order, the result does
// not depend on the worker count.
template <class Model>
double accumulate_gradient(const Model& model, std::size_t n,
                           const std::function<ad::Tensor<float>(Model&, std::size_t, std::size_t)>& loss,
                           GradientSet& grads) {
  const std::size_t parts = (n + kSubBatch - 1) / kSubBatch;
  std::vector<GradientSet> partial(parts);
  std::vector<double> losses(parts, 0.0);
  parallel_for(parts, [&](std::size_t p) {
    Model replica = model.template cast<float>(true);
    const std::size_t lo = p * kSubBatch, hi = std::min(n, lo + kSubBatch);
    auto l = loss(replica, lo, hi);
    losses[p] = static_cast<double>(l.item());
    ad::backward(l);
    auto& g = partial[p];
    for (const auto& t : replica.params()) {
      g.emplace_back(t.numel(), 0.0);
      if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.back().begin());
    }
  });
  grads.assign(model.params().size(), {});
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i].assign(model.params()[i].numel(), 0.0);
  double total = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    total += losses[p];
    for (std::size_t i = 0; i < grads.size(); ++i)
      for (std::size_t k = 0; k < grads[i].size(); ++k) grads[i][k] += partial[p][i][k];
  }
  return total;
}

// SGD with heavy-ball momentum and L2 weight decay.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  // grads are sums over `count` items; the step uses their mean.
  void step(ParameterSet<float>& params, const GradientSet& grads, std::size_t count, double lr) {
    if (velocity_.empty())
      for (const auto& t : params) velocity_.emplace_back(t.numel(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].mutable_data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double g = grads[i][k] / static_cast<double>(count) + weight_decay_ * w[k];
        velocity_[i][k] = momentum_ * velocity_[i][k] + g;
        w[k] = static_cast<float>(w[k] - lr * velocity_[i][k]);
      }
    }
  }

 private:
  double momentum_, weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(ParameterSet<float>& params, const GradientSet& grads, std::size_t count) {
    if (m_.empty())
      for (const auto& t : params) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
      }
    ++t_;
    const double c1 = 1 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].mutable_data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double g = grads[i][k] / static_cast<double>(count);
        m_[i][k] = b1_ * m_[i][k] + (1 - b1_) * g;
        v_[i][k] = b2_ * v_[i][k] + (1 - b2_) * g * g;
        w[k] = static_cast<float>(w[k] - lr_ * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace rfidlab
