#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rfidlab/autodiff/tensor.hpp"

namespace rfidlab::ad {

namespace detail {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

[[noreturn]] inline void shape_error(const char* op, const std::string& detail) {
  fail(ErrorKind::shape_mismatch, std::string(op) + ": " + detail);
}

inline void expect_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) shape_error(op, "operands " + shape_str(a) + " and " + shape_str(b) + " differ");
}

inline void expect_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank)
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

template <class T>
Node<T>* tracked_parent(Node<T>& self, std::size_t i) {
  Node<T>* p = self.parents[i].get();
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return p;
}

// Convolution geometry for one image.
struct ConvGeom {
  std::size_t channels, height, width, kernel, stride, pad, out_h, out_w;
  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_h * out_w; }
};

inline ConvGeom conv_geom(const char* op, std::size_t c, std::size_t h, std::size_t w,
                          std::size_t k, std::size_t stride, std::size_t pad) {
  if (k == 0 || stride == 0) shape_error(op, "kernel and stride must be positive");
  if (h + 2 * pad < k || w + 2 * pad < k)
    shape_error(op, "kernel " + std::to_string(k) + " larger than padded input " +
                        std::to_string(h) + "x" + std::to_string(w));
  return {c, h, w, k, stride, pad, (h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1};
}

template <class T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.col_cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          long ih = static_cast<long>(oh * g.stride + ki) - pad;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            long iw = static_cast<long>(ow * g.stride + kj) - pad;
            bool inside = ih >= 0 && iw >= 0 && ih < static_cast<long>(g.height) &&
                          iw < static_cast<long>(g.width);
            row[oh * g.out_w + ow] =
                inside ? img[(c * g.height + static_cast<std::size_t>(ih)) * g.width +
                             static_cast<std::size_t>(iw)]
                       : T(0);
          }
        }
      }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, T* img) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.col_cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          long ih = static_cast<long>(oh * g.stride + ki) - pad;
          if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            long iw = static_cast<long>(ow * g.stride + kj) - pad;
            if (iw < 0 || iw >= static_cast<long>(g.width)) continue;
            img[(c * g.height + static_cast<std::size_t>(ih)) * g.width +
                static_cast<std::size_t>(iw)] += row[oh * g.out_w + ow];
          }
        }
      }
}

template <class T, class F, class DF>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, DF df) {
  std::vector<T> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x}, [df](Node<T>& self) {
    if (auto* p = tracked_parent(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad[i] += self.grad[i] * df(p->data[i], self.data[i]);
    }
  });
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_same("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* p = detail::tracked_parent(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_same("sub", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    if (auto* p = detail::tracked_parent(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] -= self.grad[i];
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_same("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    // Read both operands before accumulating: a and b may alias.
    const auto& da = self.parents[0]->data;
    const auto& db = self.parents[1]->data;
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * db[i];
    if (auto* p = detail::tracked_parent(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * da[i];
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return detail::unary(
      "scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

// x (N, F) + v (F), broadcast over rows.
template <class T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& v) {
  detail::expect_rank("add_row", x.shape(), 2);
  if (v.numel() != x.dim(1))
    detail::shape_error("add_row", "row vector " + shape_str(v.shape()) + " vs matrix " +
                                       shape_str(x.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) out[r * f + c] = x.data()[r * f + c] + v.data()[c];
  return make_result<T>("add_row", x.shape(), std::move(out), {x, v}, [n, f](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    if (auto* p = detail::tracked_parent(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) p->grad[c] += self.grad[r * f + c];
  });
}

// a (N, K) @ b (K, M)
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank("matmul", a.shape(), 2);
  detail::expect_rank("matmul", b.shape(), 2);
  if (a.dim(1) != b.dim(0))
    detail::shape_error("matmul", "inner dimensions of " + shape_str(a.shape()) + " and " +
                                      shape_str(b.shape()) + " differ");
  const auto n = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto m = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(n * m));
  detail::MapR<T>(out.data(), n, m).noalias() =
      detail::CMapR<T>(a.data().data(), n, k) * detail::CMapR<T>(b.data().data(), k, m);
  return make_result<T>("matmul", Shape{a.dim(0), b.dim(1)}, std::move(out), {a, b},
                        [n, k, m](Node<T>& self) {
                          detail::CMapR<T> g(self.grad.data(), n, m);
                          const auto& pa = *self.parents[0];
                          const auto& pb = *self.parents[1];
                          if (auto* p = detail::tracked_parent(self, 0))
                            detail::MapR<T>(p->grad.data(), n, k).noalias() +=
                                g * detail::CMapR<T>(pb.data.data(), k, m).transpose();
                          if (auto* p = detail::tracked_parent(self, 1))
                            detail::MapR<T>(p->grad.data(), k, m).noalias() +=
                                detail::CMapR<T>(pa.data.data(), n, k).transpose() * g;
                        });
}

// Fully connected layer: x (N, I), weight (O, I), bias (O) -> (N, O).
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::expect_rank("linear", x.shape(), 2);
  detail::expect_rank("linear", weight.shape(), 2);
  if (x.dim(1) != weight.dim(1) || bias.numel() != weight.dim(0))
    detail::shape_error("linear", "input " + shape_str(x.shape()) + ", weight " +
                                      shape_str(weight.shape()) + ", bias " +
                                      shape_str(bias.shape()));
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto o = static_cast<Eigen::Index>(weight.dim(0));
  std::vector<T> out(static_cast<std::size_t>(n * o));
  detail::MapR<T> y(out.data(), n, o);
  y.noalias() = detail::CMapR<T>(x.data().data(), n, in) *
                detail::CMapR<T>(weight.data().data(), o, in).transpose();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), o);
  return make_result<T>(
      "linear", Shape{x.dim(0), weight.dim(0)}, std::move(out), {x, weight, bias},
      [n, in, o](Node<T>& self) {
        detail::CMapR<T> g(self.grad.data(), n, o);
        const auto& px = *self.parents[0];
        const auto& pw = *self.parents[1];
        if (auto* p = detail::tracked_parent(self, 0))
          detail::MapR<T>(p->grad.data(), n, in).noalias() +=
              g * detail::CMapR<T>(pw.data.data(), o, in);
        if (auto* p = detail::tracked_parent(self, 1))
          detail::MapR<T>(p->grad.data(), o, in).noalias() +=
              g.transpose() * detail::CMapR<T>(px.data.data(), n, in);
        if (auto* p = detail::tracked_parent(self, 2))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(p->grad.data(), o) += g.colwise().sum();
      });
}

// x (N, C, H, W), weight (O, C, k, k), bias (O) -> (N, O, Ho, Wo).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t pad = 0) {
  detail::expect_rank("conv2d", x.shape(), 4);
  detail::expect_rank("conv2d", weight.shape(), 4);
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3) || bias.numel() != weight.dim(0))
    detail::shape_error("conv2d", "input " + shape_str(x.shape()) + ", weight " +
                                      shape_str(weight.shape()) + ", bias " +
                                      shape_str(bias.shape()));
  const std::size_t n = x.dim(0), outc = weight.dim(0);
  const auto g = detail::conv_geom("conv2d", x.dim(1), x.dim(2), x.dim(3), weight.dim(2), stride, pad);
  const auto kr = static_cast<Eigen::Index>(g.col_rows());
  const auto kc = static_cast<Eigen::Index>(g.col_cols());
  const auto eo = static_cast<Eigen::Index>(outc);
  const std::size_t in_size = g.channels * g.height * g.width;
  const std::size_t out_size = outc * g.col_cols();

  std::vector<T> out(n * out_size);
  std::vector<T> col(g.col_rows() * g.col_cols());
  detail::CMapR<T> w(weight.data().data(), eo, kr);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data().data(), eo);
  for (std::size_t i = 0; i < n; ++i) {
    detail::im2col(x.data().data() + i * in_size, g, col.data());
    detail::MapR<T> y(out.data() + i * out_size, eo, kc);
    y.noalias() = w * detail::CMapR<T>(col.data(), kr, kc);
    y.colwise() += b;
  }
  return make_result<T>(
      "conv2d", Shape{n, outc, g.out_h, g.out_w}, std::move(out), {x, weight, bias},
      [=](Node<T>& self) {
        const auto& px = *self.parents[0];
        const auto& pw = *self.parents[1];
        auto* gx = detail::tracked_parent(self, 0);
        auto* gw = detail::tracked_parent(self, 1);
        auto* gb = detail::tracked_parent(self, 2);
        std::vector<T> cols(static_cast<std::size_t>(kr * kc));
        detail::CMapR<T> wm(pw.data.data(), eo, kr);
        for (std::size_t i = 0; i < n; ++i) {
          detail::CMapR<T> gy(self.grad.data() + i * out_size, eo, kc);
          if (gw) {
            detail::im2col(px.data.data() + i * in_size, g, cols.data());
            detail::MapR<T>(gw->grad.data(), eo, kr).noalias() +=
                gy * detail::CMapR<T>(cols.data(), kr, kc).transpose();
          }
          if (gb)
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->grad.data(), eo) +=
                gy.rowwise().sum();
          if (gx) {
            detail::MapR<T>(cols.data(), kr, kc).noalias() = wm.transpose() * gy;
            detail::col2im_add(cols.data(), g, gx->grad.data() + i * in_size);
          }
        }
      });
}

// Adjoint of conv2d. x (N, C, H, W), weight (C, O, k, k), bias (O)
// -> (N, O, (H-1)*stride - 2*pad + k, ...).
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride = 1, std::size_t pad = 0) {
  constexpr const char* op = "conv_transpose2d";
  detail::expect_rank(op, x.shape(), 4);
  detail::expect_rank(op, weight.shape(), 4);
  if (weight.dim(0) != x.dim(1) || weight.dim(2) != weight.dim(3) || bias.numel() != weight.dim(1))
    detail::shape_error(op, "input " + shape_str(x.shape()) + ", weight " +
                                shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  const std::size_t n = x.dim(0), inc = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t outc = weight.dim(1), k = weight.dim(2);
  if (stride == 0 || (h - 1) * stride + k < 2 * pad + 1 || (wd - 1) * stride + k < 2 * pad + 1)
    detail::shape_error(op, "degenerate output for input " + shape_str(x.shape()));
  const std::size_t oh = (h - 1) * stride + k - 2 * pad;
  const std::size_t ow = (wd - 1) * stride + k - 2 * pad;
  // Geometry of the conv2d that maps the output back onto the input grid.
  const auto g = detail::conv_geom(op, outc, oh, ow, k, stride, pad);
  if (g.out_h != h || g.out_w != wd) detail::shape_error(op, "stride/pad do not tile the input");

  const auto ein = static_cast<Eigen::Index>(inc);
  const auto kr = static_cast<Eigen::Index>(g.col_rows());
  const auto hw = static_cast<Eigen::Index>(h * wd);
  const std::size_t in_size = inc * h * wd;
  const std::size_t out_size = outc * oh * ow;
  const std::size_t plane = oh * ow;

  std::vector<T> out(n * out_size, T(0));
  std::vector<T> col(static_cast<std::size_t>(kr * hw));
  detail::CMapR<T> wm(weight.data().data(), ein, kr);
  for (std::size_t i = 0; i < n; ++i) {
    detail::MapR<T>(col.data(), kr, hw).noalias() =
        wm.transpose() * detail::CMapR<T>(x.data().data() + i * in_size, ein, hw);
    T* y = out.data() + i * out_size;
    detail::col2im_add(col.data(), g, y);
    for (std::size_t c = 0; c < outc; ++c)
      for (std::size_t p = 0; p < plane; ++p) y[c * plane + p] += bias.data()[c];
  }
  return make_result<T>(
      op, Shape{n, outc, oh, ow}, std::move(out), {x, weight, bias}, [=](Node<T>& self) {
        const auto& px = *self.parents[0];
        const auto& pw = *self.parents[1];
        auto* gx = detail::tracked_parent(self, 0);
        auto* gw = detail::tracked_parent(self, 1);
        auto* gb = detail::tracked_parent(self, 2);
        std::vector<T> cols(static_cast<std::size_t>(kr * hw));
        detail::CMapR<T> wmat(pw.data.data(), ein, kr);
        for (std::size_t i = 0; i < n; ++i) {
          const T* gy = self.grad.data() + i * out_size;
          if (gx || gw) {
            detail::im2col(gy, g, cols.data());
            detail::CMapR<T> gcol(cols.data(), kr, hw);
            if (gx)
              detail::MapR<T>(gx->grad.data() + i * in_size, ein, hw).noalias() += wmat * gcol;
            if (gw)
              detail::MapR<T>(gw->grad.data(), ein, kr).noalias() +=
                  detail::CMapR<T>(px.data.data() + i * in_size, ein, hw) * gcol.transpose();
          }
          if (gb)
            for (std::size_t c = 0; c < outc; ++c) {
              T acc = 0;
              for (std::size_t p = 0; p < plane; ++p) acc += gy[c * plane + p];
              gb->grad[c] += acc;
            }
        }
      });
}

// Non-overlapping k x k average pooling over (N, C, H, W).
template <class T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k) {
  detail::expect_rank("avg_pool2d", x.shape(), 4);
  if (k == 0 || x.dim(2) % k != 0 || x.dim(3) % k != 0)
    detail::shape_error("avg_pool2d", "window " + std::to_string(k) + " does not tile " +
                                          shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / k, ow = w / k;
  const T inv = T(1) / static_cast<T>(k * k);
  std::vector<T> out(planes * oh * ow, T(0));
  const T* in = x.data().data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[(p * oh + i / k) * ow + j / k] += in[(p * h + i) * w + j] * inv;
  return make_result<T>("avg_pool2d", Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                        [=](Node<T>& self) {
                          if (auto* px = detail::tracked_parent(self, 0))
                            for (std::size_t p = 0; p < planes; ++p)
                              for (std::size_t i = 0; i < h; ++i)
                                for (std::size_t j = 0; j < w; ++j)
                                  px->grad[(p * h + i) * w + j] +=
                                      self.grad[(p * oh + i / k) * ow + j / k] * inv;
                        });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2)) {
  return detail::unary(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

// log(1 + e^x), evaluated without overflow.
template <class T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary(
      "softplus", x,
      [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return detail::unary(
      "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    detail::shape_error("reshape", shape_str(x.shape()) + " -> " + shape_str(shape));
  return make_result<T>("reshape", std::move(shape), x.values(), {x}, [](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

// Flattens every axis after the first: (N, ...) -> (N, F).
template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 1) detail::shape_error("flatten", "scalar input");
  return reshape(x, Shape{x.dim(0), x.numel() / std::max<std::size_t>(x.dim(0), 1)});
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>("sum", Shape{}, {acc}, {x}, [](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (auto& gv : p->grad) gv += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) detail::shape_error("mean", "empty tensor");
  const T inv = T(1) / static_cast<T>(x.numel());
  T acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>("mean", Shape{}, {acc * inv}, {x}, [inv](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (auto& gv : p->grad) gv += self.grad[0] * inv;
  });
}

// Euclidean norm of the whole tensor. The subgradient at 0 is taken as 0.
template <class T>
Tensor<T> l2_norm(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v * v;
  const T norm = std::sqrt(acc);
  return make_result<T>("l2_norm", Shape{}, {norm}, {x}, [](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0)) {
      const T nv = self.data[0];
      if (nv > T(0))
        for (std::size_t i = 0; i < p->grad.size(); ++i)
          p->grad[i] += self.grad[0] * p->data[i] / nv;
    }
  });
}

// Per-item Euclidean norm: (N, ...) -> (N).
template <class T>
Tensor<T> l2_norm_rows(const Tensor<T>& x) {
  if (x.rank() < 1) detail::shape_error("l2_norm_rows", "scalar input");
  const std::size_t n = x.dim(0);
  const std::size_t f = n ? x.numel() / n : 0;
  std::vector<T> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    T acc = 0;
    for (std::size_t c = 0; c < f; ++c) acc += x.data()[r * f + c] * x.data()[r * f + c];
    out[r] = std::sqrt(acc);
  }
  return make_result<T>("l2_norm_rows", Shape{n}, std::move(out), {x}, [n, f](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t r = 0; r < n; ++r) {
        const T nv = self.data[r];
        if (nv <= T(0)) continue;
        const T s = self.grad[r] / nv;
        for (std::size_t c = 0; c < f; ++c) p->grad[r * f + c] += s * p->data[r * f + c];
      }
  });
}

namespace detail {
template <class T>
void row_log_softmax(const T* z, std::size_t c, T* out) {
  T m = *std::max_element(z, z + c);
  T acc = 0;
  for (std::size_t j = 0; j < c; ++j) acc += std::exp(z[j] - m);
  const T lse = m + std::log(acc);
  for (std::size_t j = 0; j < c; ++j) out[j] = z[j] - lse;
}
}  // namespace detail

// Row-wise softmax over (N, C), shifted by the row maximum.
template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  detail::expect_rank("softmax", x.shape(), 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < n; ++r) {
    detail::row_log_softmax(x.data().data() + r * c, c, out.data() + r * c);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = std::exp(out[r * c + j]);
  }
  return make_result<T>("softmax", x.shape(), std::move(out), {x}, [n, c](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t r = 0; r < n; ++r) {
        const T* y = self.data.data() + r * c;
        const T* g = self.grad.data() + r * c;
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < c; ++j) p->grad[r * c + j] += y[j] * (g[j] - dot);
      }
  });
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  detail::expect_rank("log_softmax", x.shape(), 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < n; ++r)
    detail::row_log_softmax(x.data().data() + r * c, c, out.data() + r * c);
  return make_result<T>("log_softmax", x.shape(), std::move(out), {x}, [n, c](Node<T>& self) {
    if (auto* p = detail::tracked_parent(self, 0))
      for (std::size_t r = 0; r < n; ++r) {
        const T* y = self.data.data() + r * c;
        const T* g = self.grad.data() + r * c;
        T gs = 0;
        for (std::size_t j = 0; j < c; ++j) gs += g[j];
        for (std::size_t j = 0; j < c; ++j) p->grad[r * c + j] += g[j] - std::exp(y[j]) * gs;
      }
  });
}

}  // namespace rfidlab::ad
