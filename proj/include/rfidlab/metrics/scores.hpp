#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/metrics/gaussian.hpp"
#include "rfidlab/models/checkpoint.hpp"
#include "rfidlab/models/embedder.hpp"

namespace rfidlab {

// -sum p ln p with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  double total = 0, h = 0;
  for (double v : p) {
    require(v >= 0 && std::isfinite(v), ErrorKind::invalid_argument,
            "entropy: probabilities must be finite and non-negative");
    total += v;
    if (v > 0) h -= v * std::log(v);
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorKind::invalid_argument,
          "entropy: probabilities sum to " + std::to_string(total));
  return h;
}

struct InceptionScore {
  double mean = 0;
  double std = 0;  // across splits, population std
  std::vector<double> per_split;
};

// Splits are contiguous and differ in size by at most one item. Each split's
// score is exp(mean_x KL(p(y|x) || p(y))) with p(y) that split's marginal;
// KL terms are evaluated in log space.
inline InceptionScore inception_score_from_posteriors(const ad::Tensor<float>& probs, std::size_t n_splits) {
  require(probs.rank() == 2, ErrorKind::shape_mismatch,
          "inception_score: expected (N, C) posteriors, got " + ad::shape_str(probs.shape()));
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  require(n_splits >= 1 && n_splits <= n, ErrorKind::invalid_argument,
          "inception_score: " + std::to_string(n_splits) + " splits over " + std::to_string(n) +
              " images leaves a split empty");
  InceptionScore out;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < n_splits; ++s) {
    const std::size_t len = n / n_splits + (s < n % n_splits ? 1 : 0);
    std::vector<double> marginal(c, 0.0);
    for (std::size_t i = begin; i < begin + len; ++i)
      for (std::size_t j = 0; j < c; ++j) marginal[j] += probs.data()[i * c + j];
    for (auto& m : marginal) m /= static_cast<double>(len);
    double kl_sum = 0;
    for (std::size_t i = begin; i < begin + len; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double p = probs.data()[i * c + j];
        if (p > 0) kl_sum += p * (std::log(p) - std::log(marginal[j]));
      }
    out.per_split.push_back(std::exp(kl_sum / static_cast<double>(len)));
    begin += len;
  }
  for (double v : out.per_split) out.mean += v;
  out.mean /= static_cast<double>(n_splits);
  for (double v : out.per_split) out.std += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(n_splits));
  return out;
}

// One metric evaluation with the context needed to reproduce it.
struct MetricReport {
  std::string metric;  // IS | FID | R-FID | R-IS
  double value = 0;
  double std = 0;
  std::size_t splits = 0;  // IS only
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  bool clamped = false;
  TrainingKind embedder_training = TrainingKind::untrained;
  double embedder_kappa = 0;
  std::string config_digest;
  std::uint64_t seed = 0;

  // Fixed key order; rendered on one line by dump().
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["metric"] = metric;
    j["value"] = value;
    j["std"] = std;
    j["splits"] = splits;
    j["n_a"] = n_a;
    j["n_b"] = n_b;
    j["clamped"] = clamped;
    j["embedder"] = {{"training", to_string(embedder_training)}, {"kappa", embedder_kappa}};
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    return j;
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    r.metric = j.at("metric");
    r.value = j.at("value");
    r.std = j.at("std");
    r.splits = j.at("splits");
    r.n_a = j.at("n_a");
    r.n_b = j.at("n_b");
    r.clamped = j.at("clamped");
    r.embedder_training = parse_training_kind(j.at("embedder").at("training"));
    r.embedder_kappa = j.at("embedder").at("kappa");
    r.config_digest = j.at("config_digest");
    r.seed = j.at("seed");
    return r;
  }
};

inline std::string fid_name(const Provenance& p) { return p.robust() ? "R-FID" : "FID"; }
inline std::string is_name(const Provenance& p) { return p.robust() ? "R-IS" : "IS"; }

inline MetricReport fid_report(const GaussianStats& a, const GaussianStats& b, const Provenance& prov) {
  auto fd = frechet_distance(a, b);
  MetricReport r;
  r.metric = fid_name(prov);
  r.value = fd.value;
  r.clamped = fd.clamped;
  r.n_a = a.n;
  r.n_b = b.n;
  r.embedder_training = prov.training;
  r.embedder_kappa = prov.kappa;
  return r;
}

// Frechet distance between embedding statistics of two image sets. With a
// robust embedder this is R-FID.
inline MetricReport fid(const Embedder& embedder, const ImageBatch& real, const ImageBatch& gen) {
  require(real.size() >= 2 && gen.size() >= 2, ErrorKind::invalid_argument,
          "fid: both image sets need at least 2 images");
  return fid_report(estimate_stats(embed(embedder.model, real)),
                    estimate_stats(embed(embedder.model, gen)), embedder.provenance);
}

inline MetricReport inception_score(const Embedder& embedder, const ImageBatch& batch, std::size_t n_splits = 10) {
  auto score = inception_score_from_posteriors(posterior(embedder.model, batch), n_splits);
  MetricReport r;
  r.metric = is_name(embedder.provenance);
  r.value = score.mean;
  r.std = score.std;
  r.splits = n_splits;
  r.n_a = batch.size();
  r.embedder_training = embedder.provenance.training;
  r.embedder_kappa = embedder.provenance.kappa;
  return r;
}

}  // namespace rfidlab
