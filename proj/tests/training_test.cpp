#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rfidlab/training/gan.hpp"
#include "rfidlab/training/train.hpp"

namespace ad = rfidlab::ad;
using rfidlab::Error;
using rfidlab::ErrorKind;
using rfidlab::TrainConfig;

namespace {

const rfidlab::ToyDataset& tiny_data() {
  static const auto d = rfidlab::generate_dataset({.train_per_class = 6, .eval_per_class = 4, .seed = 8});
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 20;
  c.eval_samples = 40;
  c.seed = 4;
  return c;
}

double mean_loss(const rfidlab::MiniEmbedder<float>& m, const rfidlab::ImageBatch& b) {
  ad::NoGradGuard guard;
  return ad::cross_entropy(m.logits(b.images), b.labels).item();
}

}  // namespace

TEST(L2Project, OutsideBallIsScaled) {
  std::vector<float> v{3.f, 4.f};
  rfidlab::l2_project(v, 1.0);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[1], 0.8f);
}

TEST(L2Project, InsideBallUnchanged) {
  std::vector<float> v{0.1f, 0.f};
  rfidlab::l2_project(v, 1.0);
  EXPECT_FLOAT_EQ(v[0], 0.1f);
  EXPECT_FLOAT_EQ(v[1], 0.f);
}

TEST(TrainConfig, ValidationAndSchedule) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c.epochs = 9;
  EXPECT_EQ(c.decay_interval(), 3u);
  EXPECT_DOUBLE_EQ(c.lr_at(2), c.lr);
  EXPECT_NEAR(c.lr_at(3), c.lr * 0.1, 1e-15);
  EXPECT_NEAR(c.lr_at(8), c.lr * 0.01, 1e-15);
  c.epochs = 4;
  EXPECT_EQ(c.decay_interval(), 2u);
  c.lr_decay = 0;
  EXPECT_THROW(c.validate(), Error);
  c.lr_decay = 1;
  c.kappa = -1;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_DOUBLE_EQ(rfidlab::kappa_preset("k64"), 2.0);
  EXPECT_DOUBLE_EQ(rfidlab::kappa_preset("k128"), 4.0);
  EXPECT_THROW(rfidlab::kappa_preset("k256"), Error);
}

TEST(TrainNominal, OneEpochOnTenSamplesReducesLoss) {
  rfidlab::ToyDataset d = tiny_data();
  d.train = d.train.slice(0, 10);
  auto cfg = tiny_config();
  cfg.epochs = 1;
  cfg.batch_size = 10;
  cfg.lr = 0.01;
  cfg.momentum = 0;
  const double before = mean_loss(rfidlab::initial_embedder(cfg), d.train);
  auto r = rfidlab::train_nominal(d, cfg);
  const double after = mean_loss(rfidlab::embedder_from_checkpoint(r.checkpoint), d.train);
  EXPECT_LT(after, before);
  EXPECT_EQ(r.log.size(), 1u);
}

TEST(TrainNominal, ProvenanceAndLog) {
  auto r = rfidlab::train_nominal(tiny_data(), tiny_config());
  const auto& p = r.checkpoint.provenance;
  EXPECT_EQ(p.training, rfidlab::TrainingKind::nominal);
  EXPECT_EQ(p.epochs, 2u);
  EXPECT_TRUE(p.metrics.contains("clean_accuracy"));
  EXPECT_EQ(r.log.size(), 2u);
  EXPECT_TRUE(r.log[0].contains("loss"));
  auto bad = tiny_config();
  bad.kappa = 1;
  EXPECT_THROW(rfidlab::train_nominal(tiny_data(), bad), Error);
  EXPECT_THROW(rfidlab::train_adversarial(tiny_data(), tiny_config()), Error);
}

TEST(TrainNominal, DivergenceNamesEpoch) {
  auto cfg = tiny_config();
  cfg.lr = 1e30;
  try {
    rfidlab::train_nominal(tiny_data(), cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(TrainNominal, ReproducibleAcrossRunsAndWorkers) {
  setenv("RFIDLAB_THREADS", "1", 1);
  auto a = rfidlab::train_nominal(tiny_data(), tiny_config());
  setenv("RFIDLAB_THREADS", "3", 1);
  auto b = rfidlab::train_nominal(tiny_data(), tiny_config());
  unsetenv("RFIDLAB_THREADS");
  EXPECT_EQ(rfidlab::checkpoint_digest(a.checkpoint), rfidlab::checkpoint_digest(b.checkpoint));
  auto other = tiny_config();
  other.seed = 5;
  EXPECT_NE(rfidlab::checkpoint_digest(rfidlab::train_nominal(tiny_data(), other).checkpoint),
            rfidlab::checkpoint_digest(a.checkpoint));
}

TEST(TrainAdversarial, RecordsKappaAndIsReproducible) {
  auto cfg = tiny_config();
  cfg.epochs = 1;
  cfg.kappa = 2.0;
  auto a = rfidlab::train_adversarial(tiny_data(), cfg);
  auto b = rfidlab::train_adversarial(tiny_data(), cfg);
  EXPECT_EQ(a.checkpoint.provenance.training, rfidlab::TrainingKind::adversarial);
  EXPECT_DOUBLE_EQ(a.checkpoint.provenance.kappa, 2.0);
  EXPECT_TRUE(a.checkpoint.provenance.robust());
  EXPECT_EQ(rfidlab::checkpoint_digest(a.checkpoint), rfidlab::checkpoint_digest(b.checkpoint));
}

TEST(PgdL2, PerturbationsStayInBall) {
  auto model = rfidlab::MiniEmbedder<float>::initialized({}, 2);
  const auto& batch = tiny_data().train;
  for (double kappa : {0.5, 2.0, 9.1}) {
    auto adv = rfidlab::pgd_l2(model, batch.images, batch.labels,
                               {.kappa = kappa, .steps = 3, .step_size = kappa, .gaussian_init = true, .seed = 1});
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double sq = 0;
      for (std::size_t j = 0; j < rfidlab::kPixels; ++j) {
        const float a = adv.data()[i * rfidlab::kPixels + j];
        ASSERT_GE(a, 0.f);
        ASSERT_LE(a, 1.f);
        const double d = a - batch.images.data()[i * rfidlab::kPixels + j];
        sq += d * d;
      }
      EXPECT_LE(std::sqrt(sq), kappa + 1e-6);
    }
  }
}

TEST(EvaluateAccuracy, ConstantModelOnConstantLabels) {
  rfidlab::MiniEmbedder<float> model;  // all-zero weights
  model.params()[rfidlab::MiniEmbedder<float>::hb].mutable_data()[3] = 1.f;
  auto data = tiny_data().eval;
  data.labels.assign(data.size(), 3);
  EXPECT_DOUBLE_EQ(rfidlab::evaluate_accuracy(model, data), 1.0);
  data.labels.assign(data.size(), 4);
  EXPECT_DOUBLE_EQ(rfidlab::evaluate_accuracy(model, data), 0.0);
  EXPECT_THROW(rfidlab::evaluate_accuracy(model, rfidlab::ImageBatch::zeros(2)), Error);
}

TEST(EvaluateAccuracy, RobustNeverAboveCleanAndInUnitInterval) {
  auto r = rfidlab::train_nominal(tiny_data(), tiny_config());
  auto m = rfidlab::embedder_from_checkpoint(r.checkpoint);
  const double clean = rfidlab::evaluate_accuracy(m, tiny_data().eval);
  const double robust = rfidlab::evaluate_accuracy(m, tiny_data().eval, 2.0);
  EXPECT_GE(robust, 0.0);
  EXPECT_LE(clean, 1.0);
  EXPECT_LE(robust, clean);
}

TEST(TrainGenerator, TinyRunStoresWBarAndFid) {
  rfidlab::GanConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 20;
  cfg.w_bar_samples = 64;
  cfg.fid_samples = 40;
  rfidlab::Embedder e{rfidlab::MiniEmbedder<float>::initialized({}, 1), {}, ""};
  auto r = rfidlab::train_generator(tiny_data(), cfg, &e);
  const auto& ck = r.checkpoint;
  EXPECT_EQ(ck.architecture, "mini-stylegen");
  EXPECT_EQ(ck.tensors.back().name, "w_bar");
  EXPECT_EQ(ck.tensors.back().shape, (ad::Shape{cfg.arch.w_dim}));
  EXPECT_EQ(ck.provenance.training, rfidlab::TrainingKind::gan);
  EXPECT_TRUE(ck.provenance.metrics.contains("fid"));
  EXPECT_EQ(r.log.size(), 1u);
  auto again = rfidlab::train_generator(tiny_data(), cfg, &e);
  EXPECT_EQ(rfidlab::checkpoint_digest(ck), rfidlab::checkpoint_digest(again.checkpoint));
}
