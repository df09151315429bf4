#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/autodiff/tensor.hpp"
#include "rfidlab/models/embedder.hpp"
#include "rfidlab/models/stylegen.hpp"
#include "rfidlab/util/bytes.hpp"
#include "rfidlab/util/digest.hpp"

namespace rfidlab {

// Checkpoint layout (little-endian):
//   "RFIDLAB1" | u32 header length | UTF-8 JSON header | f32 payload
// The header lists every tensor (name, shape) in payload order, plus the
// architecture config and training provenance.
inline constexpr std::string_view kCheckpointMagic = "RFIDLAB1";
inline constexpr int kCheckpointVersion = 1;

enum class TrainingKind { untrained, nominal, adversarial, gan };

inline std::string to_string(TrainingKind k) {
  switch (k) {
    case TrainingKind::untrained: return "untrained";
    case TrainingKind::nominal: return "nominal";
    case TrainingKind::adversarial: return "adversarial";
    case TrainingKind::gan: return "gan";
  }
  return "untrained";
}

inline TrainingKind parse_training_kind(const std::string& s) {
  if (s == "untrained") return TrainingKind::untrained;
  if (s == "nominal") return TrainingKind::nominal;
  if (s == "adversarial") return TrainingKind::adversarial;
  if (s == "gan") return TrainingKind::gan;
  fail(ErrorKind::invalid_argument, "unknown training kind '" + s + "'");
}

struct Provenance {
  TrainingKind training = TrainingKind::untrained;
  double kappa = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  nlohmann::json metrics = nlohmann::json::object();  // e.g. clean_accuracy, fid, warnings

  bool robust() const { return training == TrainingKind::adversarial && kappa > 0; }
};

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

struct ModelCheckpoint {
  std::string architecture;  // "mini-embedder" | "mini-stylegen"
  nlohmann::json config = nlohmann::json::object();
  Provenance provenance;
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    fail(ErrorKind::payload_mismatch, "checkpoint has no tensor '" + name + "'");
  }
};

namespace detail {

inline nlohmann::json provenance_json(const Provenance& p) {
  return {{"training", to_string(p.training)},
          {"kappa", p.kappa},
          {"epochs", p.epochs},
          {"seed", p.seed},
          {"metrics", p.metrics}};
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  p.training = parse_training_kind(j.at("training").get<std::string>());
  p.kappa = j.at("kappa").get<double>();
  p.epochs = j.at("epochs").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.metrics = j.value("metrics", nlohmann::json::object());
  return p;
}

}  // namespace detail

inline Bytes encode_checkpoint(const ModelCheckpoint& ckpt) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    require(ad::shape_numel(t.shape) == t.values.size(), ErrorKind::payload_mismatch,
            "tensor '" + t.name + "' declares " + ad::shape_str(t.shape) + " but holds " +
                std::to_string(t.values.size()) + " values");
    layers.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"architecture", ckpt.architecture},
                           {"config", ckpt.config},
                           {"layers", layers},
                           {"provenance", detail::provenance_json(ckpt.provenance)}};
  const std::string text = header.dump();
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (const auto& t : ckpt.tensors)
    for (float v : t.values) w.f32(v);
  return w.take();
}

inline ModelCheckpoint decode_checkpoint(const Bytes& bytes, const std::string& context = "checkpoint") {
  ByteReader r(bytes, context);
  if (bytes.size() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic)
    fail(ErrorKind::bad_magic, context + ": missing RFIDLAB1 magic");
  const auto header_len = r.u32();
  const std::string text = r.raw(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::payload_mismatch, context + ": unreadable header (" + e.what() + ")");
  }
  ModelCheckpoint ckpt;
  try {
    const int version = header.at("format_version").get<int>();
    require(version == kCheckpointVersion, ErrorKind::bad_version,
            context + ": unsupported format version " + std::to_string(version));
    ckpt.architecture = header.at("architecture").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.provenance = detail::provenance_from_json(header.at("provenance"));
    for (const auto& layer : header.at("layers"))
      ckpt.tensors.push_back({layer.at("name").get<std::string>(),
                              layer.at("shape").get<ad::Shape>(), {}});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::payload_mismatch, context + ": malformed header (" + e.what() + ")");
  }
  std::size_t declared = 0;
  for (const auto& t : ckpt.tensors) declared += ad::shape_numel(t.shape);
  if (declared * 4 != r.remaining())
    fail(r.remaining() < declared * 4 ? ErrorKind::truncated : ErrorKind::payload_mismatch,
         context + ": header declares " + std::to_string(declared) + " floats, payload holds " +
             std::to_string(r.remaining()) + " bytes");
  for (auto& t : ckpt.tensors) {
    t.values.resize(ad::shape_numel(t.shape));
    for (auto& v : t.values) v = r.f32();
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path), path);
}

inline std::string checkpoint_digest(const ModelCheckpoint& ckpt) {
  auto bytes = encode_checkpoint(ckpt);
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

// ---- model <-> checkpoint -------------------------------------------------

namespace detail {

template <class T>
void export_params(const ParameterSet<T>& params, ModelCheckpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    ckpt.tensors.push_back({params.name(i), t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
  }
}

template <class T>
void import_params(const ModelCheckpoint& ckpt, ParameterSet<T>& params, std::size_t extra) {
  require(ckpt.tensors.size() == params.size() + extra, ErrorKind::payload_mismatch,
          "checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, architecture expects " +
              std::to_string(params.size() + extra));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    auto& dst = params[i];
    require(src.name == params.name(i) && src.shape == dst.shape(), ErrorKind::payload_mismatch,
            "tensor " + std::to_string(i) + " is '" + src.name + "' " + ad::shape_str(src.shape) +
                ", architecture expects '" + params.name(i) + "' " + ad::shape_str(dst.shape()));
    auto d = dst.mutable_data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = static_cast<T>(src.values[j]);
  }
}

}  // namespace detail

inline ModelCheckpoint to_checkpoint(const MiniEmbedder<float>& model, const Provenance& provenance) {
  const auto& c = model.config();
  ModelCheckpoint ckpt{"mini-embedder",
                       {{"conv1", c.conv1}, {"conv2", c.conv2}, {"conv3", c.conv3},
                        {"embed_dim", c.embed_dim}, {"classes", c.classes}},
                       provenance,
                       {}};
  detail::export_params(model.params(), ckpt);
  return ckpt;
}

inline MiniEmbedder<float> embedder_from_checkpoint(const ModelCheckpoint& ckpt) {
  require(ckpt.architecture == "mini-embedder", ErrorKind::payload_mismatch,
          "expected a mini-embedder checkpoint, got '" + ckpt.architecture + "'");
  EmbedderConfig c;
  try {
    c.conv1 = ckpt.config.at("conv1");
    c.conv2 = ckpt.config.at("conv2");
    c.conv3 = ckpt.config.at("conv3");
    c.embed_dim = ckpt.config.at("embed_dim");
    c.classes = ckpt.config.at("classes");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::payload_mismatch, std::string("embedder config: ") + e.what());
  }
  MiniEmbedder<float> model(c);
  detail::import_params(ckpt, model.params(), 0);
  return model;
}

inline ModelCheckpoint to_checkpoint(const MiniStyleGen<float>& gen, const Provenance& provenance) {
  const auto& c = gen.config();
  ModelCheckpoint ckpt{"mini-stylegen",
                       {{"z_dim", c.z_dim}, {"w_dim", c.w_dim}, {"mapping_hidden", c.mapping_hidden},
                        {"base_channels", c.base_channels}},
                       provenance,
                       {}};
  detail::export_params(gen.params(), ckpt);
  ckpt.tensors.push_back({"w_bar", {c.w_dim}, gen.w_bar().values()});
  return ckpt;
}

inline MiniStyleGen<float> generator_from_checkpoint(const ModelCheckpoint& ckpt) {
  require(ckpt.architecture == "mini-stylegen", ErrorKind::payload_mismatch,
          "expected a mini-stylegen checkpoint, got '" + ckpt.architecture + "'");
  StyleGenConfig c;
  try {
    c.z_dim = ckpt.config.at("z_dim");
    c.w_dim = ckpt.config.at("w_dim");
    c.mapping_hidden = ckpt.config.at("mapping_hidden");
    c.base_channels = ckpt.config.at("base_channels");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::payload_mismatch, std::string("generator config: ") + e.what());
  }
  MiniStyleGen<float> gen(c);
  detail::import_params(ckpt, gen.params(), 1);
  const auto& wb = ckpt.tensors.back();
  require(wb.name == "w_bar" && wb.shape == ad::Shape{c.w_dim}, ErrorKind::payload_mismatch,
          "generator checkpoint must end with w_bar of dimension " + std::to_string(c.w_dim));
  gen.set_w_bar(ad::Tensor<float>(wb.shape, wb.values));
  return gen;
}

// An embedder together with where it came from; metric reports carry the provenance.
struct Embedder {
  MiniEmbedder<float> model;
  Provenance provenance;
  std::string digest;
};

inline Embedder load_embedder(const std::string& path) {
  auto ckpt = load_checkpoint(path);
  return {embedder_from_checkpoint(ckpt), ckpt.provenance, checkpoint_digest(ckpt)};
}

struct Generator {
  MiniStyleGen<float> model;
  Provenance provenance;
  std::string digest;
};

inline Generator load_generator(const std::string& path) {
  auto ckpt = load_checkpoint(path);
  return {generator_from_checkpoint(ckpt), ckpt.provenance, checkpoint_digest(ckpt)};
}

}  // namespace rfidlab
