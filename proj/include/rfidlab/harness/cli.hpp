#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfidlab/harness/commands.hpp"

namespace rfidlab::harness {

enum ExitCode { kExitOk = 0, kExitUsage = 2, kExitConfig = 3, kExitRuntime = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::config: return kExitConfig;
    default: return kExitRuntime;
  }
}

namespace detail {

// Flag values collected per subcommand; only the ones given end up in the
// override patch, so a config file can still supply the rest.
struct Flags {
  std::optional<std::string> config;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  json overrides = json::object();
  std::vector<std::function<void()>> collect;
};

template <class T>
void override_flag(CLI::App* cmd, Flags& f, const std::string& flag, const std::string& path,
                   const std::string& help) {
  auto value = std::make_shared<std::optional<T>>();
  auto* opt = cmd->add_option(flag, *value, help);
  if constexpr (std::is_same_v<T, std::vector<double>>) opt->delimiter(',');
  f.collect.push_back([value, path, &f] {
    if (!*value) return;
    json* node = &f.overrides;
    std::size_t start = 0;
    for (auto dot = path.find('.'); dot != std::string::npos; dot = path.find('.', start = dot + 1))
      node = &(*node)[path.substr(start, dot - start)];
    (*node)[path.substr(path.rfind('.') + 1)] = **value;
  });
}

inline void common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file layered over the preset");
  cmd->add_option("--preset", f.preset, "base preset: desk or tiny")->capture_default_str();
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory (train: checkpoint path)");
}

inline Config resolve(Flags& f) {
  for (auto& c : f.collect) c();
  if (f.seed) f.overrides["seed"] = *f.seed;
  return Config(f.preset, f.config, f.overrides);
}

// Default checkpoint destination for `train` when --out is absent.
inline std::string default_train_out(const Config& cfg) {
  const auto kind = cfg.get_optional<std::string>("train.kind").value_or("");
  const auto& table = cfg.values().at("checkpoints");
  if (kind == "nominal") return table.at("nominal").get<std::string>();
  if (kind == "generator") return table.at("generator").get<std::string>();
  if (cfg.get_optional<double>("train.kappa")) return "checkpoints/robust_custom.ckpt";
  const auto p = cfg.get<std::string>("train.kappa_preset");
  return p == "k64" ? table.at("robust_k64").get<std::string>() : table.at("robust").get<std::string>();
}

}  // namespace detail

// Entry point shared by the rfidlab binary and the CLI tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rfidlab: robust FID / IS experiments on a procedural toy dataset", "rfidlab"};
  app.require_subcommand(1);
  detail::Flags f;

  auto* train = app.add_subcommand("train", "train an embedder or generator checkpoint");
  detail::common_flags(train, f);
  std::string train_kind;
  train->add_option("--kind", train_kind, "nominal, robust or generator")->required();
  detail::override_flag<std::string>(train, f, "--kappa-preset", "train.kappa_preset", "k64 or k128");
  detail::override_flag<double>(train, f, "--kappa", "train.kappa", "explicit L2 radius (overrides the preset)");
  detail::override_flag<std::size_t>(train, f, "--epochs", "train.epochs", "embedder epochs");
  detail::override_flag<double>(train, f, "--lr", "train.lr", "embedder learning rate");
  detail::override_flag<std::size_t>(train, f, "--batch-size", "train.batch_size", "embedder batch size");
  detail::override_flag<std::size_t>(train, f, "--gan-epochs", "gan.epochs", "generator epochs");
  detail::override_flag<std::string>(train, f, "--embedder", "train.embedder",
                                     "embedder used to score the generator");

  auto* metric = app.add_subcommand("metric", "compute FID or IS between image sources");
  detail::common_flags(metric, f);
  detail::override_flag<std::string>(metric, f, "--metric", "metric.metric", "fid or is");
  detail::override_flag<std::string>(metric, f, "--embedder", "metric.embedder", "checkpoint alias or path");
  detail::override_flag<std::string>(metric, f, "--a", "metric.a", "first image source");
  detail::override_flag<std::string>(metric, f, "--b", "metric.b", "second image source (fid)");
  detail::override_flag<std::size_t>(metric, f, "--samples", "metric.samples", "images per source");
  detail::override_flag<std::size_t>(metric, f, "--splits", "metric.splits", "IS splits");
  detail::override_flag<double>(metric, f, "--alpha", "metric.alpha", "truncation for gen: sources");

  auto* attack = app.add_subcommand("attack", "run an attack sweep");
  detail::common_flags(attack, f);
  detail::override_flag<std::string>(attack, f, "--kind", "attack.kind",
                                     "min-is, max-fid, max-is, min-fid, latent-z or latent-w");
  detail::override_flag<std::string>(attack, f, "--embedder", "attack.embedder", "checkpoint alias or path");
  detail::override_flag<std::string>(attack, f, "--generator", "attack.generator", "checkpoint alias or path");
  detail::override_flag<std::vector<double>>(attack, f, "--epsilons", "attack.epsilons", "comma-separated");
  detail::override_flag<std::vector<double>>(attack, f, "--alphas", "attack.alphas", "comma-separated");
  detail::override_flag<std::size_t>(attack, f, "--steps", "attack.steps", "optimizer steps");
  detail::override_flag<double>(attack, f, "--step-size", "attack.step_size", "optimizer step size");
  detail::override_flag<std::string>(attack, f, "--init", "attack.init", "zero, uniform-random or gaussian-random");
  detail::override_flag<std::size_t>(attack, f, "--samples", "attack.samples", "images attacked");

  auto* trunc = app.add_subcommand("truncation-study", "FID across truncation levels");
  detail::common_flags(trunc, f);
  detail::override_flag<std::string>(trunc, f, "--embedder", "truncation.embedder", "checkpoint alias or path");
  detail::override_flag<std::string>(trunc, f, "--generator", "truncation.generator", "checkpoint alias or path");
  detail::override_flag<std::vector<double>>(trunc, f, "--alphas", "truncation.alphas", "comma-separated");
  detail::override_flag<std::size_t>(trunc, f, "--samples", "truncation.samples", "images per set");

  auto* degr = app.add_subcommand("degradation-study", "FID under Gaussian noise and blur");
  detail::common_flags(degr, f);
  detail::override_flag<std::string>(degr, f, "--embedder", "degradation.embedder", "checkpoint alias or path");
  detail::override_flag<std::vector<double>>(degr, f, "--noise-sigmas", "degradation.noise_sigmas", "comma-separated");
  detail::override_flag<std::vector<double>>(degr, f, "--blur-sigmas", "degradation.blur_sigmas", "comma-separated");
  detail::override_flag<std::size_t>(degr, f, "--samples", "degradation.samples", "images per set");

  auto* report = app.add_subcommand("report", "merge sweep CSVs into a summary");
  std::vector<std::string> inputs;
  std::string report_out = "out";
  report->add_option("inputs", inputs, "sweep CSV files");
  report->add_option("--out", report_out, "output directory")->capture_default_str();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (*train) f.overrides["train"]["kind"] = train_kind;

  try {
    if (*report) {
      out << cmd_report(inputs, report_out);
      return kExitOk;
    }
    Config cfg = detail::resolve(f);
    const std::string dir = f.out.value_or("out");
    if (*train) {
      const auto summary = cmd_train(cfg, f.out.value_or(detail::default_train_out(cfg)));
      out << summary["checkpoint_digest"].get<std::string>() << "\n";
    } else if (*metric) {
      out << cmd_metric(cfg, dir).to_json().dump() << "\n";
    } else if (*attack) {
      out << cmd_attack(cfg, dir).csv();
    } else if (*trunc) {
      out << cmd_truncation_study(cfg, dir).csv();
    } else if (*degr) {
      out << cmd_degradation_study(cfg, dir).csv();
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "rfidlab: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "rfidlab: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rfidlab::harness
