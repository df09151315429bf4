#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rfidlab/data/toy_dataset.hpp"
#include "rfidlab/models/checkpoint.hpp"
#include "rfidlab/models/embedder.hpp"
#include "rfidlab/models/stylegen.hpp"

using namespace rfidlab;

namespace {

ImageBatch sample_images(std::size_t n = 12) {
  auto ds = generate_dataset({2, 2, 5});
  return ds.train.slice(0, n);
}

MiniEmbedder<float> random_embedder() { return MiniEmbedder<float>::initialized({}, 42); }

MiniStyleGen<float> random_generator() {
  auto g = MiniStyleGen<float>::initialized({}, 7);
  compute_w_bar(g, 256, 9);
  return g;
}

float max_abs_diff(std::span<const float> a, std::span<const float> b) {
  float m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Embedder, DeterministicBitwise) {
  auto model = random_embedder();
  auto batch = sample_images();
  EXPECT_EQ(embed(model, batch).values(), embed(model, batch).values());
}

TEST(Embedder, ContinuousUnderTinyPerturbation) {
  auto model = random_embedder();
  auto batch = sample_images(4);
  auto moved = batch;
  moved.images = batch.images.detach();
  for (auto& v : moved.images.mutable_data()) v = std::min(1.f, v + 1e-6f);
  auto a = embed(model, batch), b = embed(model, moved);
  for (std::size_t r = 0; r < 4; ++r) {
    double d = 0;
    for (std::size_t j = 0; j < 64; ++j) {
      double x = a.data()[r * 64 + j] - b.data()[r * 64 + j];
      d += x * x;
    }
    EXPECT_LT(std::sqrt(d), 1e-3);
  }
}

TEST(Embedder, ZeroParametersGiveConstantEmbedding) {
  MiniEmbedder<float> zero;
  auto e = embed(zero, sample_images());
  for (std::size_t r = 1; r < e.dim(0); ++r)
    for (std::size_t j = 0; j < e.dim(1); ++j) EXPECT_EQ(e.data()[r * 64 + j], e.data()[j]);
  auto p = posterior(zero, sample_images());
  for (float v : p.data()) EXPECT_NEAR(v, 0.1f, 1e-7f);
}

TEST(Embedder, RejectsBadBatches) {
  auto model = random_embedder();
  auto batch = sample_images(2);
  batch.images.mutable_data()[0] = 1.5f;
  EXPECT_THROW(embed(model, batch), Error);
  ImageBatch wrong{ad::Tensor<float>::zeros({2, 3, 16, 16}), {}};
  EXPECT_THROW(posterior(model, wrong), Error);
}

TEST(Posterior, RowsSumToOneAndNearUniformWhenUntrained) {
  auto model = random_embedder();
  auto p = posterior(model, sample_images());
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 10; ++j) {
      s += p.data()[r * 10 + j];
      EXPECT_NEAR(p.data()[r * 10 + j], 0.1, 0.05);
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Posterior, SharesTrunkWithEmbedding) {
  auto model = random_embedder();
  auto batch = sample_images();
  auto e = embed(model, batch);
  auto p = posterior(model, batch);
  ad::NoGradGuard guard;
  auto logits = model.logits_from_embedding(e);
  auto again = ad::softmax(logits);
  EXPECT_LT(max_abs_diff(again.data(), p.data()), 1e-6f);
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    auto row = logits.data().subspan(r * 10, 10);
    auto prow = p.data().subspan(r * 10, 10);
    EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(),
              std::max_element(prow.begin(), prow.end()) - prow.begin());
  }
}

TEST(Generator, AlphaOneMatchesUntruncated) {
  auto g = random_generator();
  auto z = sample_latents(6, 64, {}, 1);
  auto img = generate(g, z, 1.0);
  ad::NoGradGuard guard;
  auto direct = g.synthesis(g.mapping(z));
  EXPECT_EQ(img.images.values(), direct.values());
  EXPECT_NO_THROW(validate_batch(img, "generated"));
}

TEST(Generator, AlphaZeroIsBatchConstant) {
  auto g = random_generator();
  auto img = generate(g, sample_latents(5, 64, {}, 2), 0.0);
  ad::NoGradGuard guard;
  auto wb = ad::reshape(g.w_bar(), {1, 64});
  auto ref = g.synthesis(wb);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_LT(max_abs_diff(img.images.data().subspan(i * kPixels, kPixels), ref.data()), 1e-6f);
}

TEST(Generator, HalfTruncationSynthesizesMidpoint) {
  auto g = random_generator();
  auto z = sample_latents(1, 64, {}, 3);
  auto img = generate(g, z, 0.5);
  ad::NoGradGuard guard;
  auto w = g.mapping(z);
  std::vector<float> mid(64);
  for (std::size_t j = 0; j < 64; ++j) mid[j] = 0.5f * w.data()[j] + 0.5f * g.w_bar().data()[j];
  auto ref = g.synthesis(ad::Tensor<float>({1, 64}, mid));
  EXPECT_LT(max_abs_diff(img.images.data(), ref.data()), 1e-6f);
}

TEST(Generator, TruncationHookSeesLinearCombination) {
  auto g = random_generator();
  auto z = sample_latents(3, 64, {}, 4);
  std::vector<float> seen;
  g.on_truncated = [&](const ad::Tensor<float>& w) { seen.assign(w.data().begin(), w.data().end()); };
  const double alpha = 0.7;
  generate(g, z, alpha);
  ad::NoGradGuard guard;
  auto w = g.mapping(z);
  ASSERT_EQ(seen.size(), 3u * 64);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      float expect = w.data()[i * 64 + j] * static_cast<float>(alpha) +
                     static_cast<float>((1 - alpha) * g.w_bar().data()[j]);
      EXPECT_EQ(seen[i * 64 + j], expect);
    }
}

TEST(Generator, RejectsBadInputs) {
  auto g = random_generator();
  auto z = sample_latents(2, 64, {}, 5);
  EXPECT_THROW(generate(g, z, 2.5), Error);
  EXPECT_THROW(generate(g, z, -0.1), Error);
  z.mutable_data()[3] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(generate(g, z, 1.0), Error);
  EXPECT_THROW(generate(g, sample_latents(2, 32, {}, 5), 1.0), Error);
}

TEST(Generator, FiniteOutputsInRangeForExtremeLatents) {
  auto g = random_generator();
  auto z = sample_latents(4, 64, {LatentFamily::shifted_normal, 1e4}, 6);
  auto img = generate(g, z, 1.3);
  for (float v : img.images.data()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}

TEST(Generator, DifferentiableWithRespectToLatent) {
  auto g = random_generator().frozen();
  auto z = sample_latents(2, 64, {}, 7).detach(true);
  ad::backward(ad::sum(g.forward(z, 0.7)));
  double norm = 0;
  for (float v : z.grad()) norm += v * v;
  EXPECT_GT(norm, 0.0);
  for (const auto& p : g.params()) EXPECT_FALSE(p.has_grad());
}

TEST(WBar, SingleSampleEqualsItsMapping) {
  auto g = MiniStyleGen<float>::initialized({}, 7);
  auto wb = compute_w_bar(g, 1, 11);
  ad::NoGradGuard guard;
  auto w = g.mapping(sample_latents(1, 64, {}, 11));
  EXPECT_EQ(wb.values(), w.values());
  EXPECT_EQ(g.w_bar().values(), w.values());
  EXPECT_THROW(compute_w_bar(g, 0, 1), Error);
}

TEST(WBar, IdentityMappingAveragesToZero) {
  // hidden = [z; -z] through leaky-relu, then ([I, -I] / 1.2) recovers z exactly.
  StyleGenConfig cfg;
  cfg.mapping_hidden = 128;
  MiniStyleGen<float> g(cfg);
  auto& p = g.params();
  auto w1 = p[MiniStyleGen<float>::m1w].mutable_data();
  auto w2 = p[MiniStyleGen<float>::m2w].mutable_data();
  for (std::size_t j = 0; j < 64; ++j) {
    w1[j * 64 + j] = 1.f;
    w1[(64 + j) * 64 + j] = -1.f;
    w2[j * 128 + j] = 1.f / 1.2f;
    w2[j * 128 + 64 + j] = -1.f / 1.2f;
  }
  {
    ad::NoGradGuard guard;
    auto z = sample_latents(3, 64, {}, 1);
    auto w = g.mapping(z);
    EXPECT_LT(max_abs_diff(w.data(), z.data()), 1e-5f);
  }
  for (std::size_t n : {16u, 256u, 4096u}) {
    auto wb = compute_w_bar(g, n, 12);
    double norm = 0;
    for (float v : wb.data()) norm += double(v) * v;
    EXPECT_LT(std::sqrt(norm), 3 * std::sqrt(64.0 / double(n))) << n;
  }
}

TEST(WBar, Reproducible) {
  auto a = MiniStyleGen<float>::initialized({}, 7);
  auto b = MiniStyleGen<float>::initialized({}, 7);
  EXPECT_EQ(compute_w_bar(a, 100, 3).values(), compute_w_bar(b, 100, 3).values());
}

TEST(Checkpoint, EmbedderRoundTripIsExact) {
  auto model = random_embedder();
  Provenance prov{TrainingKind::adversarial, 18.3, 4, 42, {{"clean_accuracy", 0.5}}};
  auto bytes = encode_checkpoint(to_checkpoint(model, prov));
  auto ckpt = decode_checkpoint(bytes);
  EXPECT_TRUE(ckpt.provenance.robust());
  EXPECT_DOUBLE_EQ(ckpt.provenance.kappa, 18.3);
  auto back = embedder_from_checkpoint(ckpt);
  for (std::size_t i = 0; i < model.params().size(); ++i)
    EXPECT_EQ(back.params()[i].values(), model.params()[i].values());
  EXPECT_EQ(encode_checkpoint(to_checkpoint(back, ckpt.provenance)), bytes);
  EXPECT_EQ(encode_checkpoint(ckpt), bytes);
}

TEST(Checkpoint, GeneratorRoundTripKeepsWBar) {
  auto g = random_generator();
  auto path = ::testing::TempDir() + "rfidlab_gen.ckpt";
  save_checkpoint(path, to_checkpoint(g, {TrainingKind::gan, 0, 1, 7, {}}));
  auto ckpt = load_checkpoint(path);
  EXPECT_EQ(ckpt.tensor("w_bar").shape, (ad::Shape{64}));
  auto back = generator_from_checkpoint(ckpt);
  EXPECT_EQ(back.w_bar().values(), g.w_bar().values());
  auto z = sample_latents(2, 64, {}, 1);
  EXPECT_EQ(generate(back, z, 0.7).images.values(), generate(g, z, 0.7).images.values());
  EXPECT_THROW(embedder_from_checkpoint(ckpt), Error);
}

TEST(Checkpoint, DistinctErrors) {
  auto bytes = encode_checkpoint(to_checkpoint(random_embedder(), {}));
  auto kind_of = [](const Bytes& b) {
    try {
      decode_checkpoint(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::usage;
  };
  auto magic = bytes;
  magic[3] = 'x';
  EXPECT_EQ(kind_of(magic), ErrorKind::bad_magic);
  auto cut = bytes;
  cut.resize(bytes.size() - 10);
  EXPECT_EQ(kind_of(cut), ErrorKind::truncated);
  auto header_cut = Bytes(bytes.begin(), bytes.begin() + 20);
  EXPECT_EQ(kind_of(header_cut), ErrorKind::truncated);
  auto extra = bytes;
  extra.insert(extra.end(), {0, 0, 0, 0});
  EXPECT_EQ(kind_of(extra), ErrorKind::payload_mismatch);

  ModelCheckpoint bad{"mini-embedder", {}, {}, {{"x", {2, 2}, {1.f, 2.f, 3.f}}}};
  try {
    encode_checkpoint(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::payload_mismatch);
  }

  // Header claiming a different format version.
  std::string text(bytes.begin() + 12, bytes.begin() + 12 + (bytes[8] | bytes[9] << 8));
  auto pos = text.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  auto versioned = bytes;
  versioned[12 + pos + 17] = '7';
  EXPECT_EQ(kind_of(versioned), ErrorKind::bad_version);
}

TEST(Checkpoint, ArchitectureMismatchRejected) {
  EmbedderConfig wide;
  wide.conv1 = 12;
  auto ckpt = to_checkpoint(MiniEmbedder<float>::initialized(wide, 1), {});
  ckpt.config["conv1"] = 8;  // descriptor no longer matches the payload shapes
  EXPECT_THROW(embedder_from_checkpoint(ckpt), Error);
}
