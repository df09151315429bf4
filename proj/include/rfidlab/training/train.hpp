#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rfidlab/autodiff/loss.hpp"
#include "rfidlab/data/toy_dataset.hpp"
#include "rfidlab/models/checkpoint.hpp"
#include "rfidlab/training/optim.hpp"
#include "rfidlab/training/pgd_l2.hpp"

namespace rfidlab {

// Desk-scale L2 budgets: the full-resolution kappa divided by 32, which keeps
// the 1:2 ratio between presets. Larger budgets (e.g. matching per-pixel RMS,
// 9.1 and 18.3) leave this model at chance accuracy after adversarial training.
inline double kappa_preset(const std::string& name) {
  if (name == "k64") return 2.0;
  if (name == "k128") return 4.0;
  if (name == "none" || name == "nominal") return 0.0;
  fail(ErrorKind::config, "unknown kappa preset '" + name + "' (expected k64, k128 or none)");
}

struct TrainConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double lr_decay = 0.1;       // multiplied in every decay_every epochs
  std::size_t decay_every = 0;  // 0: ceil(epochs / 3)
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double kappa = 0.0;           // 0 trains nominally
  std::size_t pgd_steps = 2;
  double pgd_step_size = 0.0;   // 0: kappa
  std::size_t eval_samples = 2000;  // held-out images for the recorded clean accuracy
  std::uint64_t seed = 1;
  EmbedderConfig arch;

  void validate() const {
    require(epochs >= 1, ErrorKind::config, "train: epochs must be >= 1");
    require(batch_size >= 1, ErrorKind::config, "train: batch_size must be >= 1");
    require(lr > 0 && std::isfinite(lr), ErrorKind::config, "train: lr must be > 0");
    require(lr_decay > 0 && lr_decay <= 1, ErrorKind::config, "train: lr_decay must be in (0, 1]");
    require(kappa >= 0 && std::isfinite(kappa), ErrorKind::config, "train: kappa must be >= 0");
    require(momentum >= 0 && momentum < 1, ErrorKind::config, "train: momentum must be in [0, 1)");
  }

  std::size_t decay_interval() const { return decay_every ? decay_every : (epochs + 2) / 3; }

  double lr_at(std::size_t epoch) const {
    return lr * std::pow(lr_decay, static_cast<double>(epoch / decay_interval()));
  }
};

// The model train_nominal / train_adversarial start from.
inline MiniEmbedder<float> initial_embedder(const TrainConfig& cfg) {
  return MiniEmbedder<float>::initialized(cfg.arch, derive_seed(cfg.seed, 1));
}

struct TrainResult {
  ModelCheckpoint checkpoint;
  nlohmann::ordered_json log;  // one entry per epoch
};

// Fraction of correctly classified images, optionally under a 10-step L2
// PGD attack of budget kappa (zero init, step 2.5 * kappa / 10).
inline double evaluate_accuracy(const MiniEmbedder<float>& model, const ImageBatch& data,
                                std::optional<double> kappa = std::nullopt) {
  validate_batch(data, "evaluate_accuracy");
  require(data.has_labels(), ErrorKind::invalid_argument, "evaluate_accuracy: data has no labels");
  const auto frozen = model.frozen();
  const std::size_t n = data.size(), chunk = 64, chunks = (n + chunk - 1) / chunk;
  std::vector<std::size_t> correct(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
    auto part = data.slice(lo, hi);
    auto x = part.images;
    if (kappa && *kappa > 0)
      x = pgd_l2(frozen, x, part.labels,
                 {.kappa = *kappa, .steps = 10, .step_size = 2.5 * *kappa / 10, .gaussian_init = false});
    ad::NoGradGuard guard;
    auto logits = frozen.logits(x);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < hi - lo; ++i) {
      auto row = logits.data().subspan(i * k, k);
      if (std::max_element(row.begin(), row.end()) - row.begin() == part.labels[i]) ++correct[c];
    }
  });
  return n == 0 ? 0.0 : static_cast<double>(std::accumulate(correct.begin(), correct.end(), std::size_t{0})) /
                            static_cast<double>(n);
}

namespace detail {

inline ImageBatch gather(const ImageBatch& data, std::span<const std::size_t> idx) {
  auto out = ImageBatch::zeros(idx.size());
  auto dst = out.images.mutable_data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = data.images.data().subspan(idx[i] * kPixels, kPixels);
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * kPixels));
    out.labels.push_back(data.labels[idx[i]]);
  }
  return out;
}

inline TrainResult train_embedder(const ToyDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  validate_batch(data.train, "train");
  require(data.train.has_labels() && data.train.size() > 0, ErrorKind::invalid_argument,
          "train: training split needs labeled images");
  auto model = initial_embedder(cfg);
  Sgd opt(cfg.momentum, cfg.weight_decay);
  const bool adversarial = cfg.kappa > 0;
  const double pgd_step = cfg.pgd_step_size > 0 ? cfg.pgd_step_size : cfg.kappa;
  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = cfg.lr_at(epoch);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size, ++global_step) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      auto batch = gather(data.train, std::span<const std::size_t>(order).subspan(b, e - b));
      if (adversarial) {
        const auto frozen = model.frozen();
        auto adv = ImageBatch::zeros(batch.size());
        auto dst = adv.images.mutable_data();
        const std::size_t parts = (batch.size() + kSubBatch - 1) / kSubBatch;
        parallel_for(parts, [&](std::size_t p) {
          const std::size_t lo = p * kSubBatch, hi = std::min(batch.size(), lo + kSubBatch);
          auto part = batch.slice(lo, hi);
          auto x = pgd_l2(frozen, part.images, part.labels,
                          {.kappa = cfg.kappa, .steps = cfg.pgd_steps, .step_size = pgd_step,
                           .gaussian_init = true, .seed = derive_seed(cfg.seed, 0x5eed0000 + global_step),
                           .first_index = lo});
          std::copy(x.data().begin(), x.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(lo * kPixels));
        });
        adv.labels = batch.labels;
        batch = std::move(adv);
      }
      std::vector<std::size_t> hits((batch.size() + kSubBatch - 1) / kSubBatch, 0);
      GradientSet grads;
      const double loss = accumulate_gradient<MiniEmbedder<float>>(
          model, batch.size(),
          [&](MiniEmbedder<float>& replica, std::size_t lo, std::size_t hi) {
            auto part = batch.slice(lo, hi);
            auto logits = replica.logits(part.images);
            const std::size_t k = logits.dim(1);
            for (std::size_t i = 0; i < hi - lo; ++i) {
              auto row = logits.data().subspan(i * k, k);
              if (std::max_element(row.begin(), row.end()) - row.begin() == part.labels[i]) ++hits[lo / kSubBatch];
            }
            return ad::cross_entropy(logits, part.labels, ad::Reduction::sum);
          },
          grads);
      if (!std::isfinite(loss))
        fail(ErrorKind::divergence, "training diverged in epoch " + std::to_string(epoch + 1) +
                                        ": loss is " + std::to_string(loss));
      loss_sum += loss;
      correct += std::accumulate(hits.begin(), hits.end(), std::size_t{0});
      opt.step(model.params(), grads, batch.size(), lr);
    }
    log.push_back({{"epoch", epoch + 1},
                   {"lr", lr},
                   {"loss", loss_sum / static_cast<double>(n)},
                   {"train_accuracy", static_cast<double>(correct) / static_cast<double>(n)}});
  }
  Provenance prov;
  prov.training = adversarial ? TrainingKind::adversarial : TrainingKind::nominal;
  prov.kappa = cfg.kappa;
  prov.epochs = cfg.epochs;
  prov.seed = cfg.seed;
  const std::size_t eval_n = std::min(cfg.eval_samples, data.eval.size());
  if (eval_n > 0) {
    prov.metrics["clean_accuracy"] = evaluate_accuracy(model, data.eval.slice(0, eval_n));
    prov.metrics["eval_samples"] = eval_n;
  }
  prov.metrics["final_loss"] = log.back()["loss"];
  return {to_checkpoint(model, prov), std::move(log)};
}

}  // namespace detail

inline TrainResult train_nominal(const ToyDataset& data, const TrainConfig& cfg) {
  require(cfg.kappa == 0, ErrorKind::config, "train_nominal: kappa must be 0, got " + std::to_string(cfg.kappa));
  return detail::train_embedder(data, cfg);
}

inline TrainResult train_adversarial(const ToyDataset& data, const TrainConfig& cfg) {
  require(cfg.kappa > 0, ErrorKind::config, "train_adversarial: kappa must be > 0");
  return detail::train_embedder(data, cfg);
}

}  // namespace rfidlab
