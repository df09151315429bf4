#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/autodiff/loss.hpp"
#include "rfidlab/data/degrade.hpp"
#include "rfidlab/data/latents.hpp"
#include "rfidlab/metrics/scores.hpp"
#include "rfidlab/models/checkpoint.hpp"
#include "rfidlab/util/parallel.hpp"
#include "rfidlab/util/rng.hpp"

namespace rfidlab {

enum class AttackKind { min_is, max_fid, max_is, min_fid, latent_z, latent_w };
enum class AttackInit { zero, uniform, gaussian };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::min_is: return "min-is";
    case AttackKind::max_fid: return "max-fid";
    case AttackKind::max_is: return "max-is";
    case AttackKind::min_fid: return "min-fid";
    case AttackKind::latent_z: return "latent-z";
    case AttackKind::latent_w: return "latent-w";
  }
  return "min-is";
}

inline AttackKind parse_attack_kind(const std::string& s) {
  for (auto k : {AttackKind::min_is, AttackKind::max_fid, AttackKind::max_is, AttackKind::min_fid,
                 AttackKind::latent_z, AttackKind::latent_w})
    if (to_string(k) == s) return k;
  fail(ErrorKind::invalid_argument, "unknown attack kind '" + s + "'");
}

inline std::string to_string(AttackInit i) {
  switch (i) {
    case AttackInit::zero: return "zero";
    case AttackInit::uniform: return "uniform-random";
    case AttackInit::gaussian: return "gaussian-random";
  }
  return "zero";
}

inline AttackInit parse_attack_init(const std::string& s) {
  for (auto i : {AttackInit::zero, AttackInit::uniform, AttackInit::gaussian})
    if (to_string(i) == s) return i;
  fail(ErrorKind::invalid_argument, "unknown attack init '" + s + "'");
}

inline bool is_bounded(AttackKind k) { return k == AttackKind::min_is || k == AttackKind::max_fid; }

struct AttackSpec {
  AttackKind kind = AttackKind::min_is;
  double epsilon = 0.0;  // L-inf budget; bounded kinds only
  std::size_t steps = 100;
  double step_size = 0.0;
  AttackInit init = AttackInit::zero;
  std::uint64_t seed = 0;
  bool clamp_pixels = true;
  bool recompute_target = true;  // min-is: refresh argmax label every step
  std::size_t is_splits = 10;    // capped at the batch size

  // Defaults per kind. Pixel attacks take 100 steps; bounded ones use the
  // 2.5 * eps / steps PGD step.
  static AttackSpec defaults(AttackKind kind, double epsilon = 0.0) {
    AttackSpec s;
    s.kind = kind;
    s.epsilon = epsilon;
    switch (kind) {
      case AttackKind::min_is:
        s.init = AttackInit::zero;
        s.step_size = 2.5 * epsilon / 100;
        break;
      case AttackKind::max_fid:
        s.init = AttackInit::uniform;
        s.step_size = 2.5 * epsilon / 100;
        break;
      case AttackKind::max_is:
        s.init = AttackInit::uniform;
        s.step_size = 0.01;
        break;
      case AttackKind::min_fid:
        // Matching embeddings from noise needs longer strides than pushing
        // posteriors; 0.01 stalls well short of the targets within 100 steps.
        s.init = AttackInit::uniform;
        s.step_size = 0.1;
        break;
      case AttackKind::latent_z:
        s.steps = 50;
        s.step_size = 0.01;
        break;
      case AttackKind::latent_w:
        s.steps = 20;
        s.step_size = 0.3;
        break;
    }
    return s;
  }

  // eps = 0 and steps = 0 are accepted and produce an unmodified output.
  void validate() const {
    if (is_bounded(kind)) {
      require(std::isfinite(epsilon) && epsilon >= 0, ErrorKind::invalid_argument,
              to_string(kind) + ": epsilon must be finite and >= 0, got " + std::to_string(epsilon));
      require(epsilon == 0 || step_size > 0, ErrorKind::invalid_argument,
              to_string(kind) + ": step_size must be > 0");
    } else if (steps > 0) {
      require(step_size > 0 && std::isfinite(step_size), ErrorKind::invalid_argument,
              to_string(kind) + ": step_size must be > 0, got " + std::to_string(step_size));
    }
    require(is_splits >= 1, ErrorKind::invalid_argument, "attack: is_splits must be >= 1");
  }
};

struct PerturbationSummary {
  double linf = 0;
  double l2_mean = 0;  // per-item L2, averaged
  double l2_max = 0;
  double wasserstein = 0;  // 1-D W1 between flattened clean and perturbed values
};

struct AttackResult {
  AttackSpec spec;
  ImageBatch images;            // adversarial or synthesized images
  ad::Tensor<float> latents;    // perturbed z or w (latent kinds only)
  std::vector<double> item_loss;   // objective per item at the output
  std::vector<double> loss_trace;  // summed objective at each step, before its update
  MetricReport before;
  MetricReport after;
  PerturbationSummary magnitude;

  nlohmann::ordered_json summary() const {
    nlohmann::ordered_json j;
    j["kind"] = to_string(spec.kind);
    j["epsilon"] = spec.epsilon;
    j["steps"] = spec.steps;
    j["step_size"] = spec.step_size;
    j["init"] = to_string(spec.init);
    j["seed"] = spec.seed;
    j["clamp_pixels"] = spec.clamp_pixels;
    j["before"] = before.to_json();
    j["after"] = after.to_json();
    j["magnitude"] = {{"linf", magnitude.linf},
                      {"l2_mean", magnitude.l2_mean},
                      {"l2_max", magnitude.l2_max},
                      {"wasserstein", magnitude.wasserstein}};
    double mean_loss = 0;
    for (double v : item_loss) mean_loss += v;
    j["final_loss_mean"] = item_loss.empty() ? 0.0 : mean_loss / static_cast<double>(item_loss.size());
    j["loss_trace"] = loss_trace;
    return j;
  }
};

// One L-inf PGD ascent step: delta + step * sign(grad), projected onto the
// eps-ball and, when `clean` is given, onto x + delta in [0, 1].
inline void pgd_linf_step(std::span<float> delta, std::span<const float> grad, double step_size,
                          double epsilon, std::span<const float> clean = {}) {
  require(delta.size() == grad.size() && (clean.empty() || clean.size() == delta.size()),
          ErrorKind::shape_mismatch, "pgd_linf_step: delta, grad and image sizes differ");
  const float eps = static_cast<float>(epsilon), step = static_cast<float>(step_size);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const float s = grad[i] > 0 ? 1.f : (grad[i] < 0 ? -1.f : 0.f);
    float d = std::clamp(delta[i] + step * s, -eps, eps);
    if (!clean.empty()) d = std::clamp(clean[i] + d, 0.f, 1.f) - clean[i];
    delta[i] = d;
  }
}

inline PerturbationSummary perturbation_summary(std::span<const float> clean, std::span<const float> perturbed,
                                                std::size_t items) {
  require(clean.size() == perturbed.size() && items > 0 && clean.size() % items == 0,
          ErrorKind::shape_mismatch, "perturbation_summary: sample sizes differ");
  PerturbationSummary s;
  const std::size_t width = clean.size() / items;
  std::vector<double> a(clean.size()), b(clean.size());
  for (std::size_t i = 0; i < items; ++i) {
    double sq = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t k = i * width + j;
      const double d = static_cast<double>(perturbed[k]) - clean[k];
      s.linf = std::max(s.linf, std::abs(d));
      sq += d * d;
      a[k] = clean[k];
      b[k] = perturbed[k];
    }
    s.l2_mean += std::sqrt(sq);
    s.l2_max = std::max(s.l2_max, std::sqrt(sq));
  }
  s.l2_mean /= static_cast<double>(items);
  s.wasserstein = wasserstein_1d(a, b);
  return s;
}

namespace detail {

inline constexpr std::size_t kAttackChunk = 32;

// Per-chunk optimization state. `loss` maps the tracked variable (rows are
// items) to per-item objectives; `update` applies one step given the
// gradient. Items are processed in fixed chunks so results do not depend on
// the worker count.
struct ChunkProblem {
  std::function<ad::Tensor<float>(const ad::Tensor<float>& var, std::size_t lo, std::size_t hi, std::size_t step)> loss;
  std::function<void(std::span<float> var, std::span<const float> grad, std::size_t lo, std::size_t hi)> update;
};

inline std::vector<double> optimize_chunks(ad::Tensor<float>& var, std::size_t steps, const ChunkProblem& problem,
                                           std::vector<double>& item_loss) {
  const std::size_t n = var.dim(0), width = var.numel() / std::max<std::size_t>(n, 1);
  const std::size_t chunks = (n + kAttackChunk - 1) / kAttackChunk;
  std::vector<std::vector<double>> traces(chunks, std::vector<double>(steps, 0.0));
  item_loss.assign(n, 0.0);
  auto values = var.mutable_data();
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kAttackChunk, hi = std::min(n, lo + kAttackChunk);
    ad::Shape shape = var.shape();
    shape[0] = hi - lo;
    auto first = values.begin() + static_cast<std::ptrdiff_t>(lo * width);
    auto last = values.begin() + static_cast<std::ptrdiff_t>(hi * width);
    for (std::size_t step = 0; step < steps; ++step) {
      ad::Tensor<float> x(shape, std::vector<float>(first, last), true);
      auto rows = problem.loss(x, lo, hi, step);
      auto total = ad::sum(rows);
      traces[c][step] = static_cast<double>(total.item());
      ad::backward(total);
      std::vector<float> grad(x.grad().begin(), x.grad().end());
      grad.resize(x.numel(), 0.f);  // untouched variable: zero gradient
      problem.update(std::span<float>(&*first, (hi - lo) * width), grad, lo, hi);
    }
    ad::NoGradGuard guard;
    ad::Tensor<float> x(shape, std::vector<float>(first, last));
    auto rows = problem.loss(x, lo, hi, steps);
    for (std::size_t i = lo; i < hi; ++i) item_loss[i] = rows.data()[i - lo];
  });
  std::vector<double> trace(steps, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t s = 0; s < steps; ++s) trace[s] += traces[c][s];
  return trace;
}

inline ad::Tensor<float> embed_unchecked(const MiniEmbedder<float>& model, const ImageBatch& batch) {
  return map_chunks(batch, model.config().embed_dim,
                    [&](const ad::Tensor<float>& x) { return model.embedding(x); });
}

inline MetricReport fid_unchecked(const Embedder& e, const ImageBatch& a, const ImageBatch& b) {
  return fid_report(estimate_stats(embed_unchecked(e.model, a)), estimate_stats(embed_unchecked(e.model, b)),
                    e.provenance);
}

inline MetricReport is_unchecked(const Embedder& e, const ImageBatch& batch, std::size_t splits) {
  splits = std::min(splits, batch.size());
  auto probs = map_chunks(batch, e.model.config().classes,
                          [&](const ad::Tensor<float>& x) { return ad::softmax(e.model.logits(x)); });
  auto score = inception_score_from_posteriors(probs, splits);
  MetricReport r;
  r.metric = is_name(e.provenance);
  r.value = score.mean;
  r.std = score.std;
  r.splits = splits;
  r.n_a = batch.size();
  r.embedder_training = e.provenance.training;
  r.embedder_kappa = e.provenance.kappa;
  return r;
}

inline ImageBatch with_images(std::vector<float> values, std::size_t n) {
  return {ad::Tensor<float>({n, kChannels, kImageSize, kImageSize}, std::move(values)), {}};
}

// Initial pixel perturbation for bounded attacks; item i uses its own stream.
inline std::vector<float> initial_delta(const AttackSpec& spec, const ImageBatch& real) {
  const std::size_t n = real.size();
  std::vector<float> delta(n * kPixels, 0.f);
  if (spec.init == AttackInit::zero || spec.epsilon == 0) return delta;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    std::uniform_real_distribution<double> u(-spec.epsilon, spec.epsilon);
    std::normal_distribution<double> g(0.0, spec.epsilon / 2);
    for (std::size_t j = 0; j < kPixels; ++j)
      delta[i * kPixels + j] = static_cast<float>(spec.init == AttackInit::uniform ? u(rng) : g(rng));
    std::span<float> d(delta.data() + i * kPixels, kPixels);
    std::vector<float> zero(kPixels, 0.f);
    pgd_linf_step(d, zero, 0.0, spec.epsilon,
                  spec.clamp_pixels ? real.images.data().subspan(i * kPixels, kPixels) : std::span<const float>{});
  }
  return delta;
}

// Bounded pixel attack driver: optimizes delta with PGD and returns x + delta.
inline AttackResult bounded_attack(const ImageBatch& real, const AttackSpec& spec,
                                   const std::function<ad::Tensor<float>(const ad::Tensor<float>& x_adv, std::size_t lo,
                                                                         std::size_t hi, std::size_t step)>& loss) {
  validate_batch(real, to_string(spec.kind));
  spec.validate();
  const std::size_t n = real.size();
  const auto clean = real.images.data();
  ad::Tensor<float> adv({n, kChannels, kImageSize, kImageSize}, initial_delta(spec, real));
  // Optimize x_adv = x + delta directly; its gradient equals the delta gradient.
  auto a = adv.mutable_data();
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += clean[k];
  const std::size_t steps = spec.epsilon == 0 ? 0 : spec.steps;
  ChunkProblem problem;
  problem.loss = loss;
  problem.update = [&](std::span<float> x, std::span<const float> grad, std::size_t lo, std::size_t) {
    auto c = clean.subspan(lo * kPixels, x.size());
    std::vector<float> delta(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) delta[k] = x[k] - c[k];
    pgd_linf_step(delta, grad, spec.step_size, spec.epsilon, spec.clamp_pixels ? c : std::span<const float>{});
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = c[k] + delta[k];
  };
  AttackResult r;
  r.spec = spec;
  r.loss_trace = optimize_chunks(adv, steps, problem, r.item_loss);
  r.images = {adv, real.labels};
  r.magnitude = perturbation_summary(clean, adv.data(), n);
  return r;
}

}  // namespace detail

// Lower IS: push each image toward maximal entropy by ascending the cross
// entropy against its (current) top-1 label, within the eps-ball.
inline AttackResult attack_min_is(const Embedder& embedder, const ImageBatch& real, const AttackSpec& spec) {
  require(spec.kind == AttackKind::min_is, ErrorKind::invalid_argument, "attack_min_is: spec kind is " + to_string(spec.kind));
  const auto& model = embedder.model;
  std::vector<int> fixed_target;
  if (!spec.recompute_target) {
    auto p = posterior(model, real);
    const std::size_t c = model.config().classes;
    for (std::size_t i = 0; i < real.size(); ++i) {
      auto row = p.data().subspan(i * c, c);
      fixed_target.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  auto loss = [&](const ad::Tensor<float>& x, std::size_t lo, std::size_t hi, std::size_t) {
    auto logits = model.logits(x);
    std::vector<int> target;
    if (spec.recompute_target) {
      const std::size_t c = logits.dim(1);
      for (std::size_t i = 0; i < hi - lo; ++i) {
        auto row = logits.data().subspan(i * c, c);
        target.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
    } else {
      target.assign(fixed_target.begin() + lo, fixed_target.begin() + hi);
    }
    return ad::cross_entropy_items(logits, target);
  };
  auto r = detail::bounded_attack(real, spec, loss);
  r.before = detail::is_unchecked(embedder, real, spec.is_splits);
  r.after = detail::is_unchecked(embedder, r.images, spec.is_splits);
  return r;
}

// Raise FID: move each image's embedding as far as possible from its clean
// embedding within the eps-ball. FID before is the clean set against itself.
inline AttackResult attack_max_fid(const Embedder& embedder, const ImageBatch& real, const AttackSpec& spec) {
  require(spec.kind == AttackKind::max_fid, ErrorKind::invalid_argument, "attack_max_fid: spec kind is " + to_string(spec.kind));
  require(real.size() >= 2, ErrorKind::invalid_argument, "attack_max_fid: needs at least 2 images");
  const auto& model = embedder.model;
  const auto clean_embed = embed(model, real);
  const std::size_t d = clean_embed.dim(1);
  auto loss = [&](const ad::Tensor<float>& x, std::size_t lo, std::size_t hi, std::size_t) {
    auto target = ad::Tensor<float>({hi - lo, d}, std::vector<float>(clean_embed.data().begin() + lo * d,
                                                                     clean_embed.data().begin() + hi * d));
    return ad::l2_norm_rows(ad::sub(model.embedding(x), target));
  };
  auto r = detail::bounded_attack(real, spec, loss);
  r.before = detail::fid_unchecked(embedder, real, real);
  r.after = detail::fid_unchecked(embedder, real, r.images);
  return r;
}

namespace detail {

// Unbounded pixel synthesis by plain gradient descent with [0,1] projection.
inline AttackResult synthesize(ImageBatch start, const AttackSpec& spec,
                               const std::function<ad::Tensor<float>(const ad::Tensor<float>&, std::size_t,
                                                                     std::size_t, std::size_t)>& loss) {
  spec.validate();
  const std::size_t n = start.size();
  ad::Tensor<float> x = start.images.detach();
  ChunkProblem problem;
  problem.loss = loss;
  problem.update = [&](std::span<float> v, std::span<const float> grad, std::size_t, std::size_t) {
    const float step = static_cast<float>(spec.step_size);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k] - step * grad[k], 0.f, 1.f);
  };
  AttackResult r;
  r.spec = spec;
  r.loss_trace = optimize_chunks(x, spec.steps, problem, r.item_loss);
  r.images = {x, {}};
  r.magnitude = perturbation_summary(start.images.data(), x.data(), n);
  return r;
}

inline ImageBatch synthesis_start(std::size_t n, const AttackSpec& spec) {
  if (spec.init == AttackInit::zero) return ImageBatch::zeros(n);
  if (spec.init == AttackInit::uniform) return random_noise_images(n, spec.seed);
  std::vector<float> v(n * kPixels);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    std::normal_distribution<double> g(0.5, 0.25);
    for (std::size_t j = 0; j < kPixels; ++j)
      v[i * kPixels + j] = static_cast<float>(std::clamp(g(rng), 0.0, 1.0));
  }
  return with_images(std::move(v), n);
}

}  // namespace detail

// Synthesize n images that the classifier assigns confidently to uniformly
// drawn target labels, starting from noise.
inline AttackResult attack_max_is(const Embedder& embedder, std::size_t n, const AttackSpec& spec) {
  require(spec.kind == AttackKind::max_is, ErrorKind::invalid_argument, "attack_max_is: spec kind is " + to_string(spec.kind));
  require(n >= 1, ErrorKind::invalid_argument, "attack_max_is: n must be >= 1");
  const auto& model = embedder.model;
  const int classes = static_cast<int>(model.config().classes);
  std::vector<int> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(derive_seed(spec.seed, 0x7a9), i));
    target[i] = std::uniform_int_distribution<int>(0, classes - 1)(rng);
  }
  auto start = detail::synthesis_start(n, spec);
  auto loss = [&](const ad::Tensor<float>& x, std::size_t lo, std::size_t hi, std::size_t) {
    return ad::cross_entropy_items(model.logits(x), std::span<const int>(target).subspan(lo, hi - lo));
  };
  auto r = detail::synthesize(start, spec, loss);
  r.images.labels = target;
  r.before = detail::is_unchecked(embedder, start, spec.is_splits);
  r.after = detail::is_unchecked(embedder, r.images, spec.is_splits);
  return r;
}

// Synthesize one image per real target whose embedding matches the target's.
// `start` overrides the spec's initialization (one image per target).
inline AttackResult attack_min_fid(const Embedder& embedder, const ImageBatch& real, const AttackSpec& spec,
                                   const ImageBatch* start = nullptr) {
  require(spec.kind == AttackKind::min_fid, ErrorKind::invalid_argument, "attack_min_fid: spec kind is " + to_string(spec.kind));
  validate_batch(real, "attack_min_fid");
  require(real.size() >= 2, ErrorKind::invalid_argument, "attack_min_fid: needs at least 2 targets");
  const auto& model = embedder.model;
  const auto target = embed(model, real);
  const std::size_t d = target.dim(1);
  ImageBatch init = start ? *start : detail::synthesis_start(real.size(), spec);
  validate_batch(init, "attack_min_fid start");
  require(init.size() == real.size(), ErrorKind::shape_mismatch, "attack_min_fid: need one start image per target");
  auto loss = [&](const ad::Tensor<float>& x, std::size_t lo, std::size_t hi, std::size_t) {
    auto t = ad::Tensor<float>({hi - lo, d}, std::vector<float>(target.data().begin() + lo * d,
                                                                target.data().begin() + hi * d));
    return ad::l2_norm_rows(ad::sub(model.embedding(x), t));
  };
  auto r = detail::synthesize(init, spec, loss);
  r.before = fid(embedder, init, real);
  r.after = fid(embedder, r.images, real);
  return r;
}

namespace detail {

// Gradient ascent on latents v (rows are items), pushing G(v)'s embedding
// away from each paired real image's embedding.
inline AttackResult latent_attack(const Embedder& embedder, const ImageBatch& real, const AttackSpec& spec,
                                  ad::Tensor<float> start,
                                  const std::function<ad::Tensor<float>(const ad::Tensor<float>&)>& render) {
  spec.validate();
  validate_batch(real, to_string(spec.kind));
  require(real.size() >= 2 && start.dim(0) == real.size(), ErrorKind::shape_mismatch,
          to_string(spec.kind) + ": need one latent per real target and at least 2 targets");
  const auto& model = embedder.model;
  const auto target = embed(model, real);
  const std::size_t d = target.dim(1);
  auto images_of = [&](const ad::Tensor<float>& v) {
    const std::size_t n = v.dim(0);
    std::vector<float> out(n * kPixels);
    const std::size_t width = v.numel() / n;
    parallel_for((n + kAttackChunk - 1) / kAttackChunk, [&](std::size_t c) {
      ad::NoGradGuard guard;
      const std::size_t lo = c * kAttackChunk, hi = std::min(n, lo + kAttackChunk);
      ad::Tensor<float> rows({hi - lo, width}, std::vector<float>(v.data().begin() + lo * width,
                                                                   v.data().begin() + hi * width));
      auto img = render(rows);
      std::copy(img.data().begin(), img.data().end(), out.begin() + static_cast<std::ptrdiff_t>(lo * kPixels));
    });
    return with_images(std::move(out), n);
  };
  ad::Tensor<float> v = start.detach();
  ChunkProblem problem;
  problem.loss = [&](const ad::Tensor<float>& x, std::size_t lo, std::size_t hi, std::size_t) {
    auto t = ad::Tensor<float>({hi - lo, d}, std::vector<float>(target.data().begin() + lo * d,
                                                                target.data().begin() + hi * d));
    return ad::l2_norm_rows(ad::sub(model.embedding(render(x)), t));
  };
  problem.update = [&](std::span<float> x, std::span<const float> grad, std::size_t, std::size_t) {
    const float step = static_cast<float>(spec.step_size);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += step * grad[k];
  };
  AttackResult r;
  r.spec = spec;
  r.loss_trace = optimize_chunks(v, spec.steps, problem, r.item_loss);
  const auto clean_images = images_of(start);
  r.images = images_of(v);
  r.latents = v;
  r.before = fid(embedder, clean_images, real);
  r.after = fid(embedder, r.images, real);
  r.magnitude = perturbation_summary(start.data(), v.data(), v.dim(0));
  return r;
}

}  // namespace detail

// Perturb input latents z (one per real target) through the frozen generator
// at truncation alpha. When z is empty it is drawn from N(0, I) with spec.seed.
inline AttackResult attack_latent_z(const Embedder& embedder, const MiniStyleGen<float>& gen, const ImageBatch& real,
                                    double alpha, const AttackSpec& spec, ad::Tensor<float> z = {}) {
  require(spec.kind == AttackKind::latent_z, ErrorKind::invalid_argument, "attack_latent_z: spec kind is " + to_string(spec.kind));
  if (z.numel() == 0) z = sample_latents(real.size(), gen.config().z_dim, {}, spec.seed);
  const auto frozen = gen.frozen();
  return detail::latent_attack(embedder, real, spec, z,
                               [&](const ad::Tensor<float>& v) { return frozen.forward(v, alpha); });
}

// Perturb the truncated intermediate latent w and render with synthesis only.
inline AttackResult attack_latent_w(const Embedder& embedder, const MiniStyleGen<float>& gen, const ImageBatch& real,
                                    double alpha, const AttackSpec& spec, ad::Tensor<float> z = {}) {
  require(spec.kind == AttackKind::latent_w, ErrorKind::invalid_argument, "attack_latent_w: spec kind is " + to_string(spec.kind));
  if (z.numel() == 0) z = sample_latents(real.size(), gen.config().z_dim, {}, spec.seed);
  const auto frozen = gen.frozen();
  ad::Tensor<float> w;
  {
    ad::NoGradGuard guard;
    // Validates alpha and z like generation does.
    require(alpha >= 0.0 && alpha <= 2.0, ErrorKind::invalid_argument,
            "truncation alpha " + std::to_string(alpha) + " outside [0, 2]");
    z.check_finite("attack_latent_w: latent z");
    w = frozen.truncate(frozen.mapping(z), alpha).detach();
  }
  return detail::latent_attack(embedder, real, spec, w,
                               [&](const ad::Tensor<float>& v) { return frozen.synthesis(v); });
}

}  // namespace rfidlab
