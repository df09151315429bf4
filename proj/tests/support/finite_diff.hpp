#pragma once

// Central finite-difference oracle. Independent of the tape: it only calls the
// forward function and compares against whatever gradient the caller provides.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rfidlab/autodiff/tensor.hpp"

namespace rfidlab::testing {

template <class T>
std::vector<T> numeric_gradient(const std::function<T(const std::vector<T>&)>& f,
                                std::vector<T> x, T h) {
  std::vector<T> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T keep = x[i];
    x[i] = keep + h;
    const T up = f(x);
    x[i] = keep - h;
    const T down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (T(2) * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor)
template <class T>
double relative_error(const std::vector<T>& a, const std::vector<T>& b, double floor = 1e-10) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Analytic gradient of a scalar-valued tensor function at x via the tape.
template <class T>
std::vector<T> tape_gradient(const std::function<ad::Tensor<T>(const ad::Tensor<T>&)>& f,
                             const ad::Shape& shape, const std::vector<T>& x) {
  ad::Tensor<T> input(shape, x, true);
  ad::backward(f(input));
  return {input.grad().begin(), input.grad().end()};
}

template <class T>
double gradient_check(const std::function<ad::Tensor<T>(const ad::Tensor<T>&)>& f,
                      const ad::Shape& shape, const std::vector<T>& x, T h) {
  auto analytic = tape_gradient<T>(f, shape, x);
  auto numeric = numeric_gradient<T>(
      [&](const std::vector<T>& v) {
        ad::NoGradGuard guard;
        return f(ad::Tensor<T>(shape, v)).item();
      },
      x, h);
  return relative_error(analytic, numeric);
}

}  // namespace rfidlab::testing
