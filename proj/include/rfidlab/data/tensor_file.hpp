#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rfidlab/autodiff/tensor.hpp"
#include "rfidlab/data/image_batch.hpp"
#include "rfidlab/util/bytes.hpp"

namespace rfidlab {

// TensorFile layout (little-endian):
//   "TNSR" | u16 version | u8 dtype | u8 rank | u32 dims[rank] | payload
enum class DType : std::uint8_t { f32 = 1, f64 = 2, i32 = 3 };

inline constexpr std::uint16_t kTensorFileVersion = 1;

inline std::size_t dtype_size(DType t) { return t == DType::f64 ? 8 : 4; }

struct RawTensor {
  DType dtype = DType::f32;
  ad::Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;
  std::vector<std::int32_t> i32;
};

namespace detail {
inline void tensor_header(ByteWriter& w, DType dtype, const ad::Shape& shape) {
  require(shape.size() <= 255, ErrorKind::dim_overflow, "tensor rank exceeds 255");
  w.raw("TNSR");
  w.u16(kTensorFileVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) {
    require(d <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::dim_overflow,
            "dimension " + std::to_string(d) + " exceeds u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
}
}  // namespace detail

inline Bytes encode_tensor(const ad::Tensor<float>& t) {
  ByteWriter w;
  detail::tensor_header(w, DType::f32, t.shape());
  for (float v : t.data()) w.f32(v);
  return w.take();
}

inline Bytes encode_labels(const std::vector<int>& labels) {
  ByteWriter w;
  detail::tensor_header(w, DType::i32, {labels.size()});
  for (int v : labels) w.i32(v);
  return w.take();
}

inline RawTensor decode_tensor(const Bytes& bytes, const std::string& context = "tensor") {
  ByteReader r(bytes, context);
  if (bytes.size() < 4 || r.raw(4) != "TNSR") fail(ErrorKind::bad_magic, context + ": not a TNSR file");
  const auto version = r.u16();
  require(version == kTensorFileVersion, ErrorKind::bad_version,
          context + ": unsupported version " + std::to_string(version));
  RawTensor out;
  const auto code = r.u8();
  require(code >= 1 && code <= 3, ErrorKind::invalid_argument,
          context + ": unknown dtype code " + std::to_string(code));
  out.dtype = static_cast<DType>(code);
  const auto rank = r.u8();
  std::uint64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    const std::uint64_t d = r.u32();
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 8 / d)
      fail(ErrorKind::dim_overflow, context + ": element count overflows");
    count *= d;
    out.shape.push_back(static_cast<std::size_t>(d));
  }
  const std::uint64_t payload = count * dtype_size(out.dtype);
  if (payload > r.remaining())
    fail(ErrorKind::truncated, context + ": payload needs " + std::to_string(payload) +
                                   " bytes, " + std::to_string(r.remaining()) + " present");
  if (payload < r.remaining())
    fail(ErrorKind::payload_mismatch, context + ": " + std::to_string(r.remaining() - payload) +
                                          " trailing bytes after payload");
  const auto n = static_cast<std::size_t>(count);
  switch (out.dtype) {
    case DType::f32: out.f32.resize(n); for (auto& v : out.f32) v = r.f32(); break;
    case DType::f64: out.f64.resize(n); for (auto& v : out.f64) v = r.f64(); break;
    case DType::i32: out.i32.resize(n); for (auto& v : out.i32) v = r.i32(); break;
  }
  return out;
}

inline void write_tensor(const std::string& path, const ad::Tensor<float>& t) {
  write_file(path, encode_tensor(t));
}

inline ad::Tensor<float> read_tensor(const std::string& path) {
  auto raw = decode_tensor(read_file(path), path);
  if (raw.dtype == DType::f64) {
    std::vector<float> v(raw.f64.begin(), raw.f64.end());
    return ad::Tensor<float>(raw.shape, std::move(v));
  }
  require(raw.dtype == DType::f32, ErrorKind::invalid_argument, path + ": expected a real tensor");
  return ad::Tensor<float>(raw.shape, std::move(raw.f32));
}

// Dataset exchange: <prefix>.images.tnsr (f32, N x 3 x 32 x 32) and, when
// labeled, <prefix>.labels.tnsr (i32, N).
inline void save_batch(const std::string& prefix, const ImageBatch& batch) {
  write_tensor(prefix + ".images.tnsr", batch.images);
  if (batch.has_labels()) write_file(prefix + ".labels.tnsr", encode_labels(batch.labels));
}

inline ImageBatch load_images(const std::string& path) {
  ImageBatch b{read_tensor(path), {}};
  validate_batch(b, path);
  return b;
}

inline ImageBatch load_batch(const std::string& prefix, bool with_labels) {
  auto batch = load_images(prefix + ".images.tnsr");
  if (with_labels) {
    const std::string path = prefix + ".labels.tnsr";
    auto raw = decode_tensor(read_file(path), path);
    require(raw.dtype == DType::i32, ErrorKind::invalid_argument, path + ": expected i32 labels");
    batch.labels.assign(raw.i32.begin(), raw.i32.end());
    validate_batch(batch, prefix);
  }
  return batch;
}

}  // namespace rfidlab
