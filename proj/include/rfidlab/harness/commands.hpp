#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/attacks/attacks.hpp"
#include "rfidlab/data/degrade.hpp"
#include "rfidlab/data/tensor_file.hpp"
#include "rfidlab/data/toy_dataset.hpp"
#include "rfidlab/harness/config.hpp"
#include "rfidlab/harness/sweep.hpp"
#include "rfidlab/training/gan.hpp"
#include "rfidlab/training/train.hpp"

namespace rfidlab::harness {

namespace detail {

inline ToyDataset load_dataset(const Config& cfg) {
  return generate_dataset({.train_per_class = cfg.get<std::size_t>("data.train_per_class"),
                           .eval_per_class = cfg.get<std::size_t>("data.eval_per_class"),
                           .seed = cfg.get<std::uint64_t>("data.seed"),
                           .signature_amplitude = static_cast<float>(cfg.get<double>("data.signature_amplitude")),
                           .shapeless_fraction = static_cast<float>(cfg.get<double>("data.shapeless_fraction"))});
}

// Checkpoints named by the config must exist and parse; failures are config errors.
inline Embedder open_embedder(const Config& cfg, const std::string& field) {
  const auto path = cfg.checkpoint_path(field);
  try {
    return load_embedder(path);
  } catch (const Error& e) {
    fail(ErrorKind::config, "field '" + field + "': cannot load embedder checkpoint: " + e.what());
  }
}

inline Generator open_generator(const Config& cfg, const std::string& field) {
  const auto path = cfg.checkpoint_path(field);
  try {
    return load_generator(path);
  } catch (const Error& e) {
    fail(ErrorKind::config, "field '" + field + "': cannot load generator checkpoint: " + e.what());
  }
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create output directory '" + dir + "': " + ec.message());
}

inline ImageBatch eval_slice(const ToyDataset& data, std::size_t begin, std::size_t n, const std::string& what) {
  require(begin + n <= data.eval.size(), ErrorKind::config,
          what + ": needs eval images [" + std::to_string(begin) + ", " + std::to_string(begin + n) +
              ") but the eval split holds " + std::to_string(data.eval.size()));
  return data.eval.slice(begin, begin + n);
}

inline std::string param(double v) { return format_number(v); }

inline void stamp(MetricReport& r, const std::string& digest, std::uint64_t seed) {
  r.config_digest = digest;
  r.seed = seed;
}

inline void write_sweep(const SweepReport& report, const std::string& dir, const std::string& name,
                        const nlohmann::ordered_json& extra = {}) {
  ensure_dir(dir);
  write_text(dir + "/" + name + ".csv", report.csv());
  auto j = report.to_json();
  if (!extra.is_null()) j["details"] = extra;
  write_text(dir + "/" + name + ".json", j.dump(2) + "\n");
}

inline void write_resolved_config(const Config& cfg, const std::string& dir, const std::string& command) {
  ensure_dir(dir);
  write_text(dir + "/" + command + ".config.json", cfg.values().dump(2) + "\n");
}

}  // namespace detail

// ---- train ------------------------------------------------------------------

inline TrainConfig embedder_train_config(const Config& cfg, double kappa) {
  TrainConfig t;
  t.epochs = cfg.get<std::size_t>("train.epochs");
  t.batch_size = cfg.get<std::size_t>("train.batch_size");
  t.lr = cfg.get<double>("train.lr");
  t.lr_decay = cfg.get<double>("train.lr_decay");
  t.decay_every = cfg.get<std::size_t>("train.decay_every");
  t.momentum = cfg.get<double>("train.momentum");
  t.weight_decay = cfg.get<double>("train.weight_decay");
  t.pgd_steps = cfg.get<std::size_t>("train.pgd_steps");
  t.pgd_step_size = cfg.get_optional<double>("train.pgd_step_size").value_or(0.0);
  t.eval_samples = cfg.get<std::size_t>("train.eval_samples");
  t.seed = cfg.get<std::uint64_t>("seed");
  t.kappa = kappa;
  try {
    t.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return t;
}

inline GanConfig gan_config(const Config& cfg) {
  GanConfig g;
  g.epochs = cfg.get<std::size_t>("gan.epochs");
  g.batch_size = cfg.get<std::size_t>("gan.batch_size");
  g.lr_g = cfg.get<double>("gan.lr_g");
  g.lr_d = cfg.get<double>("gan.lr_d");
  g.beta1 = cfg.get<double>("gan.beta1");
  g.beta2 = cfg.get<double>("gan.beta2");
  g.disc_width = cfg.get<std::size_t>("gan.disc_width");
  g.w_bar_samples = cfg.get<std::size_t>("gan.w_bar_samples");
  g.fid_samples = cfg.get<std::size_t>("gan.fid_samples");
  g.seed = cfg.get<std::uint64_t>("seed");
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return g;
}

// Trains one model and writes <out> (checkpoint) plus <out>.log.json.
inline nlohmann::ordered_json cmd_train(const Config& cfg, const std::string& out) {
  const auto kind = cfg.get_optional<std::string>("train.kind");
  if (!kind) fail(ErrorKind::usage, "train: --kind is required (nominal, robust or generator)");
  const auto seed = cfg.get<std::uint64_t>("seed");
  std::vector<std::string> sections{"data", "train"};
  if (*kind == "generator") sections = {"data", "gan"};
  auto digest = cfg.digest("train:" + *kind, sections);
  const auto data = detail::load_dataset(cfg);
  TrainResult result;
  if (*kind == "nominal") {
    result = train_nominal(data, embedder_train_config(cfg, 0.0));
  } else if (*kind == "robust") {
    const double kappa = cfg.get_optional<double>("train.kappa")
                             .value_or(kappa_preset(cfg.get<std::string>("train.kappa_preset")));
    if (kappa <= 0) fail(ErrorKind::config, "train: robust training needs kappa > 0");
    result = train_adversarial(data, embedder_train_config(cfg, kappa));
  } else if (*kind == "generator") {
    std::optional<Embedder> scorer;
    if (cfg.get<std::size_t>("gan.fid_samples") >= 2) {
      scorer = detail::open_embedder(cfg, "train.embedder");
      // Hash the scorer's bytes rather than its path, so retraining in another
      // directory reproduces the checkpoint exactly.
      digest = digest_hex(digest + read_text(cfg.checkpoint_path("train.embedder")));
    }
    result = train_generator(data, gan_config(cfg), scorer ? &*scorer : nullptr);
  } else {
    fail(ErrorKind::usage, "train: unknown --kind '" + *kind + "' (expected nominal, robust or generator)");
  }
  result.checkpoint.provenance.metrics["config_digest"] = digest;
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) detail::ensure_dir(parent.string());
  save_checkpoint(out, result.checkpoint);
  nlohmann::ordered_json summary;
  summary["command"] = "train";
  summary["kind"] = *kind;
  summary["checkpoint"] = std::filesystem::path(out).filename().string();
  summary["checkpoint_digest"] = checkpoint_digest(result.checkpoint);
  summary["kappa"] = result.checkpoint.provenance.kappa;
  summary["metrics"] = result.checkpoint.provenance.metrics;
  summary["config_digest"] = digest;
  summary["seed"] = seed;
  summary["log"] = result.log;
  write_text(out + ".log.json", summary.dump(2) + "\n");
  return summary;
}

// ---- metric -----------------------------------------------------------------

// Image sources: toy:eval:<offset>, toy:train:<offset>, noise, gen:<checkpoint>,
// or a tensor-file prefix (<prefix>.images.tnsr).
inline ImageBatch load_source(const Config& cfg, const ToyDataset& data, const std::string& spec, std::size_t n,
                              std::uint64_t seed) {
  auto take = [&](const ImageBatch& pool, std::size_t offset) {
    require(offset + n <= pool.size(), ErrorKind::config,
            "source '" + spec + "' has " + std::to_string(pool.size()) + " images, need [" +
                std::to_string(offset) + ", " + std::to_string(offset + n) + ")");
    return pool.slice(offset, offset + n);
  };
  auto offset_of = [&](const std::string& rest) -> std::size_t {
    if (rest.empty()) return 0;
    try {
      return static_cast<std::size_t>(std::stoull(rest));
    } catch (const std::exception&) {
      fail(ErrorKind::config, "source '" + spec + "': bad offset '" + rest + "'");
    }
  };
  if (spec.rfind("toy:eval", 0) == 0) return take(data.eval, offset_of(spec.size() > 9 ? spec.substr(9) : ""));
  if (spec.rfind("toy:train", 0) == 0) return take(data.train, offset_of(spec.size() > 10 ? spec.substr(10) : ""));
  if (spec == "noise") return random_noise_images(n, seed);
  if (spec.rfind("gen:", 0) == 0) {
    const auto name = spec.substr(4);
    const auto& table = cfg.values().at("checkpoints");
    const auto path = table.contains(name) ? table.at(name).get<std::string>() : name;
    Generator g;
    try {
      g = load_generator(path);
    } catch (const Error& e) {
      fail(ErrorKind::config, "source '" + spec + "': " + e.what());
    }
    return generate(g.model, sample_latents(n, g.model.config().z_dim, {}, seed), cfg.get<double>("metric.alpha"));
  }
  ImageBatch batch;
  try {
    batch = load_batch(spec, false);
  } catch (const Error& e) {
    fail(ErrorKind::config, "source '" + spec + "': " + e.what());
  }
  return take(batch, 0);
}

inline MetricReport cmd_metric(const Config& cfg, const std::string& out_dir) {
  const auto digest = cfg.digest("metric", {"data", "metric", "checkpoints"});
  const auto seed = cfg.get<std::uint64_t>("seed");
  const auto metric = cfg.get<std::string>("metric.metric");
  const auto n = cfg.get<std::size_t>("metric.samples");
  const auto embedder = detail::open_embedder(cfg, "metric.embedder");
  const auto data = detail::load_dataset(cfg);
  const auto a = load_source(cfg, data, cfg.get<std::string>("metric.a"), n, derive_seed(seed, 1));
  MetricReport report;
  if (metric == "fid") {
    const auto b = load_source(cfg, data, cfg.get<std::string>("metric.b"), n, derive_seed(seed, 2));
    report = fid(embedder, a, b);
  } else if (metric == "is") {
    report = inception_score(embedder, a, cfg.get<std::size_t>("metric.splits"));
  } else {
    fail(ErrorKind::config, "field 'metric.metric': expected fid or is, got '" + metric + "'");
  }
  detail::stamp(report, digest, seed);
  detail::ensure_dir(out_dir);
  write_text(out_dir + "/metric.jsonl", report.to_json().dump() + "\n");
  detail::write_resolved_config(cfg, out_dir, "metric");
  return report;
}

// ---- attack -----------------------------------------------------------------

inline AttackSpec attack_spec(const Config& cfg, AttackKind kind, double epsilon) {
  auto spec = AttackSpec::defaults(kind, epsilon);
  if (auto steps = cfg.get_optional<std::size_t>("attack.steps")) {
    spec.steps = *steps;
    if (is_bounded(kind)) spec.step_size = *steps ? 2.5 * epsilon / static_cast<double>(*steps) : 0.0;
  }
  if (auto step = cfg.get_optional<double>("attack.step_size")) spec.step_size = *step;
  if (auto init = cfg.get_optional<std::string>("attack.init")) {
    try {
      spec.init = parse_attack_init(*init);
    } catch (const Error& e) {
      fail(ErrorKind::config, std::string("field 'attack.init': ") + e.what());
    }
  }
  spec.clamp_pixels = cfg.get<bool>("attack.clamp_pixels");
  spec.recompute_target = cfg.get<bool>("attack.recompute_target");
  spec.is_splits = cfg.get<std::size_t>("attack.is_splits");
  spec.seed = cfg.get<std::uint64_t>("seed");
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return spec;
}

// Runs one attack kind over its sweep (epsilons for pixel attacks, alphas for
// latent attacks) and writes attack.csv / attack.json plus tensor payloads.
inline SweepReport cmd_attack(const Config& cfg, const std::string& out_dir) {
  const auto kind_name = cfg.get<std::string>("attack.kind");
  AttackKind kind;
  try {
    kind = parse_attack_kind(kind_name);
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("field 'attack.kind': ") + e.what());
  }
  const bool latent = kind == AttackKind::latent_z || kind == AttackKind::latent_w;
  const auto digest = cfg.digest("attack", {"data", "attack", "checkpoints"});
  const auto seed = cfg.get<std::uint64_t>("seed");
  const auto n = cfg.get<std::size_t>("attack.samples");
  const auto embedder = detail::open_embedder(cfg, "attack.embedder");
  std::optional<Generator> gen;
  if (latent) gen = detail::open_generator(cfg, "attack.generator");
  const auto data = detail::load_dataset(cfg);
  const auto real = detail::eval_slice(data, 0, n, "attack");

  std::vector<double> sweep{0.0};
  if (is_bounded(kind)) sweep = cfg.get<std::vector<double>>("attack.epsilons");
  if (latent) sweep = cfg.get<std::vector<double>>("attack.alphas");
  require(!sweep.empty(), ErrorKind::config, "attack: sweep list is empty");

  SweepReport report{"attack:" + kind_name, digest, seed, {}};
  nlohmann::ordered_json details = nlohmann::ordered_json::array();
  detail::ensure_dir(out_dir);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double p = sweep[i];
    const auto spec = attack_spec(cfg, kind, is_bounded(kind) ? p : 0.0);
    AttackResult r;
    switch (kind) {
      case AttackKind::min_is: r = attack_min_is(embedder, real, spec); break;
      case AttackKind::max_fid: r = attack_max_fid(embedder, real, spec); break;
      case AttackKind::max_is: r = attack_max_is(embedder, n, spec); break;
      case AttackKind::min_fid: r = attack_min_fid(embedder, real, spec); break;
      case AttackKind::latent_z: r = attack_latent_z(embedder, gen->model, real, p, spec); break;
      case AttackKind::latent_w: r = attack_latent_w(embedder, gen->model, real, p, spec); break;
    }
    detail::stamp(r.before, digest, seed);
    detail::stamp(r.after, digest, seed);
    // param_a is epsilon for pixel attacks and alpha for latent attacks.
    report.rows.push_back({report.study, (is_bounded(kind) || latent) ? detail::param(p) : "", "", r.after,
                           r.before.value, r.magnitude});
    details.push_back(r.summary());
    const std::string prefix = out_dir + "/attack_" + std::to_string(i);
    save_batch(prefix, r.images);
    if (latent) write_tensor(prefix + ".latents.tnsr", r.latents);
  }
  detail::write_sweep(report, out_dir, "attack", details);
  detail::write_resolved_config(cfg, out_dir, "attack");
  return report;
}

// ---- studies ----------------------------------------------------------------

// Generated-vs-real rows per alpha, every alpha pair (diagonal included, all
// alphas share the same latents), and a real-vs-real split baseline.
inline SweepReport cmd_truncation_study(const Config& cfg, const std::string& out_dir) {
  const auto digest = cfg.digest("truncation-study", {"data", "truncation", "checkpoints"});
  const auto seed = cfg.get<std::uint64_t>("seed");
  const auto n = cfg.get<std::size_t>("truncation.samples");
  const auto alphas = cfg.get<std::vector<double>>("truncation.alphas");
  require(!alphas.empty(), ErrorKind::config, "field 'truncation.alphas': empty list");
  const auto embedder = detail::open_embedder(cfg, "truncation.embedder");
  const auto gen = detail::open_generator(cfg, "truncation.generator");
  const auto data = detail::load_dataset(cfg);
  const auto real_a = detail::eval_slice(data, 0, n, "truncation-study");
  const auto real_b = detail::eval_slice(data, n, n, "truncation-study");
  const auto z = sample_latents(n, gen.model.config().z_dim, {}, derive_seed(seed, 0x77));

  std::vector<GaussianStats> stats;
  for (double a : alphas) stats.push_back(estimate_stats(embed(embedder.model, generate(gen.model, z, a))));
  const auto real_stats = estimate_stats(embed(embedder.model, real_a));

  SweepReport report{"truncation", digest, seed, {}};
  auto add = [&](const std::string& a, const std::string& b, const GaussianStats& x, const GaussianStats& y) {
    auto m = fid_report(x, y, embedder.provenance);
    detail::stamp(m, digest, seed);
    report.rows.push_back({"truncation", a, b, m, std::nullopt, std::nullopt});
  };
  for (std::size_t i = 0; i < alphas.size(); ++i) add(detail::param(alphas[i]), "real", stats[i], real_stats);
  for (std::size_t i = 0; i < alphas.size(); ++i)
    for (std::size_t j = i; j < alphas.size(); ++j)
      add(detail::param(alphas[i]), detail::param(alphas[j]), stats[i], stats[j]);
  add("real", "real-split", real_stats, estimate_stats(embed(embedder.model, real_b)));
  detail::write_sweep(report, out_dir, "truncation");
  detail::write_resolved_config(cfg, out_dir, "truncation-study");
  return report;
}

// FID between the clean eval images and noisy / blurred copies of them.
inline SweepReport cmd_degradation_study(const Config& cfg, const std::string& out_dir) {
  const auto digest = cfg.digest("degradation-study", {"data", "degradation", "checkpoints"});
  const auto seed = cfg.get<std::uint64_t>("seed");
  const auto n = cfg.get<std::size_t>("degradation.samples");
  const auto embedder = detail::open_embedder(cfg, "degradation.embedder");
  const auto data = detail::load_dataset(cfg);
  const auto clean = detail::eval_slice(data, 0, n, "degradation-study");
  const auto clean_stats = estimate_stats(embed(embedder.model, clean));

  SweepReport report{"degradation", digest, seed, {}};
  auto add = [&](const std::string& family, double sigma, const ImageBatch& degraded) {
    auto m = fid_report(clean_stats, estimate_stats(embed(embedder.model, degraded)), embedder.provenance);
    detail::stamp(m, digest, seed);
    report.rows.push_back({"degradation", family, detail::param(sigma), m, std::nullopt, std::nullopt});
  };
  for (double s : cfg.get<std::vector<double>>("degradation.noise_sigmas")) {
    require(s >= 0, ErrorKind::config, "field 'degradation.noise_sigmas': sigma must be >= 0");
    add("noise", s, s == 0 ? clean : gaussian_noise(clean, s, derive_seed(seed, 0x4e)));
  }
  for (double s : cfg.get<std::vector<double>>("degradation.blur_sigmas")) {
    require(s >= 0, ErrorKind::config, "field 'degradation.blur_sigmas': sigma must be >= 0");
    add("blur", s, s == 0 ? clean : gaussian_blur(clean, s));
  }
  detail::write_sweep(report, out_dir, "degradation");
  detail::write_resolved_config(cfg, out_dir, "degradation-study");
  return report;
}

// ---- report -----------------------------------------------------------------

// Merges sweep CSVs into report.csv and a fixed-width report.txt.
inline std::string cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  require(!inputs.empty(), ErrorKind::usage, "report: no input reports given");
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::vector<std::string>> digests;  // digest -> sources
  const auto& cols = sweep_columns();
  const std::size_t digest_col = std::find(cols.begin(), cols.end(), "config_digest") - cols.begin();
  for (const auto& path : inputs) {
    const auto name = std::filesystem::path(path).filename().string();
    auto table = parse_csv(read_text(path), path);
    require(table.header == cols, ErrorKind::payload_mismatch,
            path + ": columns do not match the sweep report schema");
    std::set<std::string> seen;
    for (auto& r : table.rows) {
      if (seen.insert(r[digest_col]).second) digests[r[digest_col]].push_back(name);
      rows.push_back(std::move(r));
    }
  }
  std::ostringstream csv;
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) csv << (i ? "," : "") << r[i];
    csv << "\n";
  }

  std::ostringstream txt;
  txt << "rfidlab report: " << inputs.size() << " input(s), " << rows.size() << " row(s)\n";
  if (digests.size() > 1) {
    txt << "WARNING: inputs carry " << digests.size() << " different config digests\n";
    for (const auto& [d, sources] : digests) {
      txt << "  " << d << ":";
      for (const auto& s : sources) txt << " " << s;
      txt << "\n";
    }
  } else if (digests.size() == 1) {
    txt << "config digest: " << digests.begin()->first << "\n";
  }
  txt << "\n";
  // Columns worth reading in a terminal; the CSV keeps everything.
  const std::vector<std::string> shown{"study", "param_a", "param_b", "metric", "before", "value", "std", "embedder", "kappa"};
  std::vector<std::size_t> idx, width;
  for (const auto& s : shown) {
    idx.push_back(std::find(cols.begin(), cols.end(), s) - cols.begin());
    width.push_back(s.size());
  }
  for (const auto& r : rows)
    for (std::size_t k = 0; k < idx.size(); ++k) width[k] = std::max(width[k], r[idx[k]].size());
  auto line = [&](auto cell) {
    std::string out;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::string c = cell(k);
      out += c + std::string(width[k] - c.size() + (k + 1 < idx.size() ? 2 : 0), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  txt << line([&](std::size_t k) { return shown[k]; });
  for (const auto& r : rows) txt << line([&](std::size_t k) { return r[idx[k]]; });

  detail::ensure_dir(out_dir);
  write_text(out_dir + "/report.csv", csv.str());
  write_text(out_dir + "/report.txt", txt.str());
  return txt.str();
}

}  // namespace rfidlab::harness
