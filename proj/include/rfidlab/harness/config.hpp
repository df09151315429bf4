#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/error.hpp"
#include "rfidlab/util/bytes.hpp"
#include "rfidlab/util/digest.hpp"

namespace rfidlab::harness {

using nlohmann::json;

// Every configurable key with its desk-scale default. A config file or flag
// may only set keys that appear here.
inline json desk_preset() {
  return json::parse(R"({
    "seed": 1,
    "data": {
      "train_per_class": 600, "eval_per_class": 820, "seed": 2023,
      "signature_amplitude": 0.03, "shapeless_fraction": 0.3
    },
    "checkpoints": {
      "nominal": "checkpoints/nominal.ckpt",
      "robust": "checkpoints/robust_k128.ckpt",
      "robust_k64": "checkpoints/robust_k64.ckpt",
      "generator": "checkpoints/generator.ckpt"
    },
    "train": {
      "kind": null, "kappa_preset": "k128", "kappa": null, "epochs": 4, "batch_size": 64,
      "lr": 0.05, "lr_decay": 0.1, "decay_every": 0, "momentum": 0.9, "weight_decay": 0.0005,
      "pgd_steps": 2, "pgd_step_size": null, "eval_samples": 2000, "embedder": "nominal"
    },
    "gan": {
      "epochs": 6, "batch_size": 32, "lr_g": 0.001, "lr_d": 0.001, "beta1": 0.5, "beta2": 0.999,
      "disc_width": 16, "w_bar_samples": 4096, "fid_samples": 4096
    },
    "attack": {
      "kind": "max-fid", "embedder": "nominal", "generator": "generator",
      "epsilons": [0.01, 0.02, 0.03], "alphas": [1.0], "steps": null, "step_size": null,
      "init": null, "clamp_pixels": true, "recompute_target": true, "samples": 256, "is_splits": 10
    },
    "metric": {
      "metric": "fid", "embedder": "nominal", "a": "toy:eval:0", "b": "toy:eval:2048",
      "samples": 2048, "splits": 10, "alpha": 1.0
    },
    "truncation": {"embedder": "robust", "generator": "generator", "alphas": [0.7, 0.9, 1.0], "samples": 2048},
    "degradation": {
      "embedder": "robust", "noise_sigmas": [0.1, 0.2, 0.3, 0.4], "blur_sigmas": [1, 2, 3, 4], "samples": 2048
    }
  })");
}

// Seconds-scale settings for smoke tests; same keys as desk.
inline json tiny_preset() {
  json p = desk_preset();
  p.merge_patch(json::parse(R"({
    "data": {"train_per_class": 6, "eval_per_class": 8},
    "train": {"epochs": 1, "batch_size": 16, "eval_samples": 40},
    "gan": {"epochs": 1, "batch_size": 16, "w_bar_samples": 64, "fid_samples": 32},
    "attack": {"samples": 8, "steps": 3, "is_splits": 2},
    "metric": {"a": "toy:eval:0", "b": "toy:eval:32", "samples": 32, "splits": 2},
    "truncation": {"samples": 32},
    "degradation": {"samples": 32}
  })"));
  return p;
}

inline json preset(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "tiny") return tiny_preset();
  fail(ErrorKind::config, "unknown preset '" + name + "' (expected desk or tiny)");
}

namespace detail {

inline void check_known_keys(const json& schema, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) return;
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.is_object() || !schema.contains(key))
      fail(ErrorKind::config, "unknown field '" + path + "'");
    if (schema.at(key).is_object()) {
      if (!value.is_object())
        fail(ErrorKind::config, "field '" + path + "': expected an object, got " + value.type_name());
      check_known_keys(schema.at(key), value, path);
    }
  }
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

// Parses a JSON config file; syntax errors report line and column.
inline json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    std::string what = e.what();
    if (auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
    fail(ErrorKind::config, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

// Resolved configuration: preset, then config file, then command-line
// overrides. A null in a file or override leaves the underlying value alone.
class Config {
 public:
  Config(const std::string& preset_name, const std::optional<std::string>& file, const json& overrides)
      : values_(preset(preset_name)) {
    const json schema = values_;
    if (file) {
      std::string text;
      try {
        text = read_text(*file);
      } catch (const Error& e) {
        fail(ErrorKind::config, "cannot read config file: " + std::string(e.what()));
      }
      json patch = parse_config_text(text, *file);
      if (!patch.is_object()) fail(ErrorKind::config, *file + ": top level must be a JSON object");
      detail::check_known_keys(schema, patch, "");
      merge_non_null(values_, patch);
    }
    detail::check_known_keys(schema, overrides, "");
    merge_non_null(values_, overrides);
  }

  const json& values() const { return values_; }

  // Typed lookup of a dotted path with a field-level diagnostic on mismatch.
  template <class T>
  T get(const std::string& path) const {
    const json& v = at(path);
    try {
      if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::size_t>) {
        if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) throw std::invalid_argument("expected an array of numbers");
        for (const auto& x : v)
          if (!x.is_number()) throw std::invalid_argument("expected an array of numbers");
      }
      return v.get<T>();
    } catch (const std::invalid_argument& e) {
      fail(ErrorKind::config, "field '" + path + "': " + e.what() + ", got " + v.dump());
    }
  }

  template <class T>
  std::optional<T> get_optional(const std::string& path) const {
    if (at(path).is_null()) return std::nullopt;
    return get<T>(path);
  }

  // A checkpoints.<name> alias or a literal path.
  std::string checkpoint_path(const std::string& path) const {
    const auto name = get<std::string>(path);
    const auto& table = values_.at("checkpoints");
    if (table.contains(name)) return table.at(name).get<std::string>();
    return name;
  }

  // Stable hash of the command and the sections it reads.
  std::string digest(const std::string& command, const std::vector<std::string>& sections) const {
    json canonical = {{"command", command}, {"seed", values_.at("seed")}};
    for (const auto& s : sections) canonical[s] = values_.at(s);
    return digest_hex(canonical.dump());
  }

 private:
  static void merge_non_null(json& target, const json& patch) {
    for (const auto& [key, value] : patch.items()) {
      if (value.is_object() && target[key].is_object())
        merge_non_null(target[key], value);
      else if (!value.is_null())
        target[key] = value;
    }
  }

  const json& at(const std::string& path) const {
    const json* node = &values_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) fail(ErrorKind::config, "missing field '" + path + "'");
      node = &node->at(key);
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  json values_;
};

}  // namespace rfidlab::harness
