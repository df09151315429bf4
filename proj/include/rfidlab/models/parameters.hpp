#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rfidlab/autodiff/tensor.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

// Ordered, named parameter tensors. Order is the serialization order.
template <class T>
class ParameterSet {
 public:
  ad::Tensor<T>& add(std::string name, ad::Shape shape) {
    names_.push_back(std::move(name));
    tensors_.push_back(ad::Tensor<T>::zeros(std::move(shape), true));
    return tensors_.back();
  }

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  ad::Tensor<T>& operator[](std::size_t i) { return tensors_.at(i); }
  const ad::Tensor<T>& operator[](std::size_t i) const { return tensors_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
  }

  void set_trainable(bool flag) {
    for (auto& t : tensors_) t.set_requires_grad(flag);
  }
  void zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
  }

  // Deep copy with converted scalar type; the copy owns fresh tensors.
  template <class U>
  ParameterSet<U> cast(bool trainable) const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      auto& dst = out.add(names_[i], tensors_[i].shape());
      auto src = tensors_[i].data();
      auto d = dst.mutable_data();
      for (std::size_t j = 0; j < src.size(); ++j) d[j] = static_cast<U>(src[j]);
      dst.set_requires_grad(trainable);
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor<T>> tensors_;
};

// He-normal init with fan-in `fan_in`, scaled by `gain`.
template <class T>
void init_normal(ad::Tensor<T>& t, std::size_t fan_in, double gain, Rng& rng) {
  std::normal_distribution<double> n(0.0, gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.mutable_data()) v = static_cast<T>(n(rng));
}

}  // namespace rfidlab
