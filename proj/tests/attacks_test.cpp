#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rfidlab/attacks/attacks.hpp"
#include "rfidlab/data/toy_dataset.hpp"

namespace ad = rfidlab::ad;
using rfidlab::AttackKind;
using rfidlab::AttackSpec;
using rfidlab::Error;

namespace {

rfidlab::Embedder random_embedder(std::uint64_t seed = 5) {
  return {rfidlab::MiniEmbedder<float>::initialized({}, seed), {}, ""};
}

const rfidlab::ImageBatch& real_images() {
  static const auto batch =
      rfidlab::generate_dataset({.train_per_class = 1, .eval_per_class = 2, .seed = 17}).eval;
  return batch;
}

AttackSpec quick(AttackKind kind, double eps = 0.03, std::size_t steps = 10) {
  auto s = AttackSpec::defaults(kind, eps);
  s.steps = steps;
  if (rfidlab::is_bounded(kind)) s.step_size = 2.5 * eps / static_cast<double>(steps);
  s.seed = 9;
  s.is_splits = 2;
  return s;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

rfidlab::MiniStyleGen<float> small_generator() {
  auto g = rfidlab::MiniStyleGen<float>::initialized({}, 3);
  rfidlab::compute_w_bar(g, 256, 4);
  return g;
}

}  // namespace

TEST(PgdStep, ProjectsOntoBall) {
  std::vector<float> delta{0.5f, -0.3f}, grad{0.f, 0.f};
  rfidlab::pgd_linf_step(delta, grad, 0.0, 0.2);
  EXPECT_FLOAT_EQ(delta[0], 0.2f);
  EXPECT_FLOAT_EQ(delta[1], -0.2f);
}

TEST(PgdStep, SignAscent) {
  std::vector<float> delta{0.f, 0.f}, grad{3.f, -0.01f};
  rfidlab::pgd_linf_step(delta, grad, 0.1, 1.0);
  EXPECT_FLOAT_EQ(delta[0], 0.1f);
  EXPECT_FLOAT_EQ(delta[1], -0.1f);
}

TEST(PgdStep, HundredStepsStayInBallAndImageRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0, 1);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> clean(50), delta(50, 0.f), grad(50);
  for (auto& c : clean) c = u(rng);
  for (int step = 0; step < 100; ++step) {
    for (auto& g : grad) g = n(rng);
    rfidlab::pgd_linf_step(delta, grad, 0.004, 0.01, clean);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      ASSERT_LE(std::abs(delta[i]), 0.01f + 1e-6f);
      ASSERT_GE(clean[i] + delta[i], 0.f);
      ASSERT_LE(clean[i] + delta[i], 1.f);
    }
  }
}

TEST(AttackSpec, Validation) {
  auto s = AttackSpec::defaults(AttackKind::max_fid, -0.1);
  EXPECT_THROW(s.validate(), Error);
  auto u = AttackSpec::defaults(AttackKind::max_is);
  u.step_size = 0;
  EXPECT_THROW(u.validate(), Error);
  EXPECT_EQ(AttackSpec::defaults(AttackKind::latent_w).steps, 20u);
  EXPECT_DOUBLE_EQ(AttackSpec::defaults(AttackKind::latent_w).step_size, 0.3);
  EXPECT_DOUBLE_EQ(AttackSpec::defaults(AttackKind::max_fid, 0.01).step_size, 2.5 * 0.01 / 100);
  EXPECT_EQ(AttackSpec::defaults(AttackKind::min_is).init, rfidlab::AttackInit::zero);
  EXPECT_THROW(rfidlab::attack_min_is(random_embedder(), real_images(), quick(AttackKind::max_fid)), Error);
  EXPECT_EQ(rfidlab::parse_attack_kind("latent-w"), AttackKind::latent_w);
  EXPECT_THROW(rfidlab::parse_attack_kind("max-kid"), Error);
}

TEST(BoundedAttacks, OutputWithinBudget) {
  auto e = random_embedder();
  for (auto kind : {AttackKind::min_is, AttackKind::max_fid}) {
    auto spec = quick(kind, 0.02);
    auto r = kind == AttackKind::min_is ? rfidlab::attack_min_is(e, real_images(), spec)
                                        : rfidlab::attack_max_fid(e, real_images(), spec);
    EXPECT_LE(max_abs_diff(r.images.images.data(), real_images().images.data()), 0.02 + 1e-6);
    EXPECT_LE(r.magnitude.linf, 0.02 + 1e-6);
    rfidlab::validate_batch(r.images, "adv");
    EXPECT_EQ(r.loss_trace.size(), spec.steps);
    EXPECT_EQ(r.item_loss.size(), real_images().size());
    EXPECT_EQ(r.images.labels, real_images().labels);
  }
}

TEST(BoundedAttacks, ZeroEpsilonIsNoOp) {
  auto e = random_embedder();
  auto r = rfidlab::attack_max_fid(e, real_images(), quick(AttackKind::max_fid, 0.0));
  EXPECT_EQ(r.images.images.values(), real_images().images.values());
  EXPECT_DOUBLE_EQ(r.after.value, r.before.value);
  EXPECT_LE(r.before.value, 1e-6);
}

TEST(BoundedAttacks, MaxFidRaisesFidAndGrowsWithEpsilon) {
  auto e = random_embedder();
  auto small = rfidlab::attack_max_fid(e, real_images(), quick(AttackKind::max_fid, 0.01));
  auto large = rfidlab::attack_max_fid(e, real_images(), quick(AttackKind::max_fid, 0.02));
  EXPECT_GT(small.after.value, small.before.value);
  EXPECT_GE(large.after.value, small.after.value);
  EXPECT_EQ(small.after.metric, "FID");
}

TEST(BoundedAttacks, MaxFidTraceMostlyIncreasing) {
  auto r = rfidlab::attack_max_fid(random_embedder(), real_images(), quick(AttackKind::max_fid, 0.03, 40));
  std::size_t up = 0;
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) up += r.loss_trace[i] >= r.loss_trace[i - 1];
  EXPECT_GE(static_cast<double>(up), 0.95 * static_cast<double>(r.loss_trace.size() - 1));
}

TEST(BoundedAttacks, MinIsOnUniformModelStaysAtOne) {
  auto e = random_embedder();
  for (auto& v : e.model.params()[rfidlab::MiniEmbedder<float>::hw].mutable_data()) v = 0.f;
  auto r = rfidlab::attack_min_is(e, real_images(), quick(AttackKind::min_is));
  EXPECT_NEAR(r.before.value, 1.0, 1e-6);
  EXPECT_NEAR(r.after.value, 1.0, 1e-6);
}

TEST(BoundedAttacks, MinIsLowersIs) {
  auto e = random_embedder();
  // Sharpen the head so the clean posteriors carry information.
  for (auto& v : e.model.params()[rfidlab::MiniEmbedder<float>::hw].mutable_data()) v *= 30.f;
  auto spec = quick(AttackKind::min_is, 0.03);
  auto r = rfidlab::attack_min_is(e, real_images(), spec);
  EXPECT_LT(r.after.value, r.before.value);
  spec.recompute_target = false;
  auto once = rfidlab::attack_min_is(e, real_images(), spec);
  EXPECT_LT(once.after.value, once.before.value);
}

TEST(BoundedAttacks, DeterministicAcrossWorkerCounts) {
  auto e = random_embedder();
  auto spec = quick(AttackKind::max_fid, 0.02, 5);
  setenv("RFIDLAB_THREADS", "1", 1);
  auto a = rfidlab::attack_max_fid(e, real_images(), spec);
  setenv("RFIDLAB_THREADS", "3", 1);
  auto b = rfidlab::attack_max_fid(e, real_images(), spec);
  unsetenv("RFIDLAB_THREADS");
  EXPECT_EQ(a.images.images.values(), b.images.images.values());
  EXPECT_EQ(a.summary().dump(), b.summary().dump());
}

TEST(SynthesisAttacks, MaxIsBeatsRawNoise) {
  auto e = random_embedder();
  for (auto& v : e.model.params()[rfidlab::MiniEmbedder<float>::hw].mutable_data()) v *= 30.f;
  auto spec = quick(AttackKind::max_is, 0.0, 20);
  spec.step_size = 0.05;
  auto r = rfidlab::attack_max_is(e, 20, spec);
  EXPECT_GT(r.after.value, r.before.value);
  EXPECT_EQ(r.images.labels.size(), 20u);
  rfidlab::validate_batch(r.images, "synth");
}

TEST(SynthesisAttacks, MinFidFromTargetsHasZeroLoss) {
  auto e = random_embedder();
  auto r = rfidlab::attack_min_fid(e, real_images(), quick(AttackKind::min_fid, 0.0, 3), &real_images());
  EXPECT_NEAR(r.loss_trace[0], 0.0, 1e-6);
}

TEST(SynthesisAttacks, MinFidBeatsRawNoise) {
  auto e = random_embedder();
  auto spec = quick(AttackKind::min_fid, 0.0, 20);
  spec.step_size = 0.05;
  auto r = rfidlab::attack_min_fid(e, real_images(), spec);
  EXPECT_LT(r.after.value, r.before.value);
}

TEST(LatentAttacks, ZeroStepsLeaveFidUnchanged) {
  auto e = random_embedder();
  auto g = small_generator();
  for (auto kind : {AttackKind::latent_z, AttackKind::latent_w}) {
    auto spec = quick(kind, 0.0, 0);
    auto r = kind == AttackKind::latent_z ? rfidlab::attack_latent_z(e, g, real_images(), 1.0, spec)
                                          : rfidlab::attack_latent_w(e, g, real_images(), 1.0, spec);
    EXPECT_DOUBLE_EQ(r.after.value, r.before.value);
    EXPECT_EQ(r.magnitude.l2_max, 0.0);
  }
}

TEST(LatentAttacks, RaiseFidAndReportMagnitude) {
  auto e = random_embedder();
  auto g = small_generator();
  for (double alpha : {0.7, 1.0}) {
    auto spec = AttackSpec::defaults(AttackKind::latent_z);
    spec.seed = 2;
    spec.step_size = 0.1;
    auto r = rfidlab::attack_latent_z(e, g, real_images(), alpha, spec);
    EXPECT_GT(r.after.value, r.before.value) << alpha;
    EXPECT_TRUE(std::isfinite(r.magnitude.wasserstein));
    EXPECT_GT(r.magnitude.l2_mean, 0.0);
    EXPECT_EQ(r.latents.shape(), (ad::Shape{real_images().size(), 64}));
  }
  auto spec = AttackSpec::defaults(AttackKind::latent_w);
  spec.seed = 2;
  auto r = rfidlab::attack_latent_w(e, g, real_images(), 1.0, spec);
  EXPECT_EQ(r.loss_trace.size(), 20u);
  EXPECT_GT(r.after.value, r.before.value);
  auto j = r.summary();
  EXPECT_EQ(j["kind"], "latent-w");
  EXPECT_TRUE(j["magnitude"].contains("wasserstein"));
}

TEST(LatentAttacks, LatentWMatchesGeneratorOutputAtStart) {
  // With zero steps the w-attack renders exactly what generation produces.
  auto e = random_embedder();
  auto g = small_generator();
  auto spec = quick(AttackKind::latent_w, 0.0, 0);
  auto z = rfidlab::sample_latents(real_images().size(), 64, {}, 31);
  auto r = rfidlab::attack_latent_w(e, g, real_images(), 0.7, spec, z);
  auto direct = rfidlab::generate(g, z, 0.7);
  EXPECT_LE(max_abs_diff(r.images.images.data(), direct.images.data()), 1e-6);
}
