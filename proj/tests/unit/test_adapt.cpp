// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "ageshift/adapt/checkpoint.hpp"
#include "ageshift/adapt/finetune.hpp"
#include "ageshift/adapt/lora.hpp"
#include "ageshift/adapt/ntxent.hpp"
#include "ageshift/adapt/optimizer.hpp"
#include "ageshift/adapt/schedule.hpp"
#include "ageshift/error.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/fixtures/tiny_backend.hpp"
#include "ageshift/util/random.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ageshift;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * standard_normal(rng);
  return m;
}

Matrix unit_rows(Matrix m) {
  m.rowwise().normalize();
  return m;
}

struct Probe {
  Matrix latent;
  Matrix context;
  int t;
};

Probe make_probe(TinyBackend& backend, long seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  return {random_matrix(rng, 64, 4), backend.text_embed("photo of sks man as 35-year-old"),
          static_cast<int>(uniform_index(rng, 1000))};
}

void randomise(AdapterWeights& w, long seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 1000);
  for (auto& p : w.layers) {
    p.a.value = random_matrix(rng, p.a.value.rows(), p.a.value.cols(), 0.3);
    p.b.value = random_matrix(rng, p.b.value.rows(), p.b.value.cols(), 0.3);
  }
}

// A denoiser whose latent is always zero and that predicts the exact noise
// of z_t = sqrt(1 - abar) * eps.
class PerfectDenoiser : public DenoiserBackend {
 public:
  std::string id() const override { return "perfect"; }
  int image_size() const override { return 16; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  Matrix encode_image(const Image&) const override { return Matrix::Zero(64, 4); }
  Image decode_latent(const Matrix&) const override { return Image(16, 16); }
  ad::Var decode_latent(ad::Tape& tape, const ad::Var&) const override {
    return tape.constant(Image(16, 16).pixels);
  }
  ad::Var text_embed(ad::Tape& tape, const std::string&) override { return tape.constant(Matrix::Zero(4, 4)); }
  ad::Var predict_noise(ad::Tape&, const ad::Var& latent, int t, const ad::Var&, AttentionHook*) override {
    return ad::scale(latent, 1.0 / std::sqrt(1.0 - schedule_.alpha_bar(t)));
  }
  std::vector<LayerShape> adaptable_layers() const override { return {{"proj", 4, 4, true}}; }
  std::vector<int> token_ids(const std::string&) const override { return {7}; }
  Matrix token_embedding(const std::vector<int>& ids) const override {
    return Matrix::Zero(static_cast<Eigen::Index>(ids.size()), 4);
  }
  void attach(AdapterWeights& a) override { attached_ = &a; }
  void detach() override { attached_ = nullptr; }
  const AdapterWeights* attachment() const override { return attached_; }
  void merge_attached() override {}
  bool merged() const override { return false; }
  std::vector<Parameter*> base_parameters() override { return {}; }
  std::string weights_hash() const override { return "perfect"; }
  std::unique_ptr<DenoiserBackend> clone() const override { return std::make_unique<PerfectDenoiser>(); }

 private:
  NoiseSchedule schedule_ = NoiseSchedule::scaled_linear();
  AdapterWeights* attached_ = nullptr;
};

}  // namespace

TEST_CASE("zero-initialised adapters leave the output unchanged") {
  TinyBackend backend;
  AdapterOptions opts;
  opts.rank = 16;
  opts.token = "sks";
  auto adapters = init_adapters(backend, opts);
  CHECK(adapters.rank == 16);
  CHECK(adapters.layers.size() == 16);
  for (const auto& p : adapters.layers) {
    CHECK(p.a.value.cols() == 16);
    CHECK(p.b.value.isZero(0));
  }
  for (long seed = 0; seed < 5; ++seed) {
    const Probe pr = make_probe(backend, seed);
    const Matrix base = backend.predict_noise(pr.latent, pr.t, pr.context);
    backend.attach(adapters);
    const Matrix with = backend.predict_noise(pr.latent, pr.t, backend.text_embed("photo of sks man as 35-year-old"));
    backend.detach();
    CHECK(testing::max_relative_diff(base, with) < 1e-6);
  }
  // Merging zero adapters keeps every weight.
  const std::string before = backend.weights_hash();
  merge(adapters, backend);
  backend.detach();
  CHECK(backend.weights_hash() == before);
}

TEST_CASE("rank bounds") {
  TinyBackend backend;
  AdapterOptions opts;
  opts.rank = 32;
  CHECK_THROWS_AS(init_adapters(backend, opts), ConfigError);
  opts.rank = 0;
  CHECK_THROWS_AS(init_adapters(backend, opts), ConfigError);
  opts.rank = 31;
  CHECK_NOTHROW(init_adapters(backend, opts));
}

TEST_CASE("merged weights equal W + scale * A B on an 8x8 model") {
  TinyOptions o;
  o.hidden = 8;
  o.text_dim = 8;
  for (long seed = 0; seed < 20; ++seed) {
    o.seed = seed;
    TinyBackend backend(o);
    AdapterOptions opts;
    opts.rank = 2;
    opts.scale = 0.75;
    auto w = init_adapters(backend, opts);
    randomise(w, seed);
    std::map<std::string, Matrix> expected;
    for (const auto& p : w.layers)
      expected[p.layer] = backend.parameter(p.layer + ".weight").value + 0.75 * p.a.value * p.b.value;

    const Probe pr = make_probe(backend, seed);
    backend.attach(w);
    const Matrix adapter_path = backend.predict_noise(pr.latent, pr.t, pr.context);
    backend.merge_attached();
    const Matrix merged_path = backend.predict_noise(pr.latent, pr.t, pr.context);
    CHECK((adapter_path - merged_path).cwiseAbs().maxCoeff() < 1e-5);
    CHECK_THROWS_AS(backend.merge_attached(), StateError);
    backend.detach();
    for (const auto& [layer, m] : expected)
      CHECK((backend.parameter(layer + ".weight").value - m).cwiseAbs().maxCoeff() < 1e-12);
    // Detaching keeps W' in place.
    CHECK((backend.predict_noise(pr.latent, pr.t, pr.context) - merged_path).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("merge guards") {
  TinyBackend backend;
  AdapterOptions opts;
  opts.rank = 4;
  auto w = init_adapters(backend, opts);
  merge(w, backend);
  CHECK_THROWS_AS(merge(w, backend), StateError);
  backend.detach();

  TinyBackend fresh;
  auto bad = init_adapters(fresh, opts);
  bad.layers[0].a.value = Matrix::Zero(5, 4);
  CHECK_THROWS_AS(merge(bad, fresh), ShapeError);
  try {
    merge(bad, fresh);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find(bad.layers[0].layer) != std::string::npos);
  }
}

TEST_CASE("finetune with LoRA keeps the base weights") {
  Fixture fx = make_fixture(0);
  const std::string before = fx.backend->weights_hash();
  const auto r = finetune(fx.profile, fx.regset, fx.config, *fx.backend, &fx.embedder, fx.images);
  CHECK(fx.backend->weights_hash() == before);
  CHECK_FALSE(fx.backend->attached());
  REQUIRE(r.log.size() == 10);
  for (const auto& s : r.log) {
    CHECK(std::isfinite(s.total));
    CHECK(std::isfinite(s.ntxent));
  }
  bool moved = false;
  for (const auto& p : r.adapters.layers) moved = moved || !p.b.value.isZero(0);
  CHECK(moved);
  CHECK_FALSE(r.full_finetune);

  // Same seed, same log.
  Fixture again = make_fixture(0);
  const auto r2 = finetune(again.profile, again.regset, again.config, *again.backend, &again.embedder, again.images);
  for (std::size_t i = 0; i < r.log.size(); ++i) CHECK(r.log[i].total == r2.log[i].total);
}

TEST_CASE("finetune without LoRA changes base weights") {
  Fixture fx = make_fixture(0);
  fx.config.use_lora = false;
  const std::string before = fx.backend->weights_hash();
  const auto r = finetune(fx.profile, fx.regset, fx.config, *fx.backend, &fx.embedder, fx.images);
  CHECK(r.full_finetune);
  CHECK(r.adapters.layers.empty());
  CHECK(fx.backend->weights_hash() != before);
}

TEST_CASE("finetune errors") {
  Fixture fx = make_fixture(0);
  CHECK_THROWS_AS(finetune(fx.profile, {}, fx.config, *fx.backend, &fx.embedder, fx.images), ConfigError);
  IdentityProfile bad = fx.profile;
  bad.references.clear();
  CHECK_THROWS_AS(finetune(bad, fx.regset, fx.config, *fx.backend, &fx.embedder, fx.images), ConfigError);
  CHECK_THROWS_AS(finetune(fx.profile, fx.regset, fx.config, *fx.backend, nullptr, fx.images), ConfigError);
  PipelineConfig huge = fx.config;
  huge.learning_rate = 1e300;
  huge.iterations = 30;
  huge.weight_decay = 0;
  huge.lambda_id = 0;
  CHECK_THROWS_AS(finetune(fx.profile, fx.regset, huge, *fx.backend, &fx.embedder, fx.images), NumericError);
}

TEST_CASE("a denoiser that already reproduces the noise has zero loss") {
  Fixture fx = make_fixture(0);
  PerfectDenoiser perfect;
  PipelineConfig c = fx.config;
  c.lambda_id = 0.0;
  c.lora_rank = 2;
  const auto r = finetune(fx.profile, fx.regset, c, perfect, nullptr, fx.images);
  REQUIRE(r.log.size() == 10);
  for (const auto& s : r.log) CHECK(s.total < 1e-25);
}

TEST_CASE("checkpoint round trip") {
  Fixture fx = make_fixture(0);
  auto r = finetune(fx.profile, fx.regset, fx.config, *fx.backend, &fx.embedder, fx.images);
  const auto dir = testing::scratch_dir("checkpoint");
  const auto files = save_checkpoint(dir, r, *fx.backend, fx.config);
  CHECK_FALSE(files.empty());
  for (const auto& f : files) CHECK(std::filesystem::exists(dir / f));

  auto ck = load_checkpoint(dir);
  CHECK(ck.adapters.rank == r.adapters.rank);
  CHECK(ck.adapters.token_ids == r.adapters.token_ids);
  CHECK(ck.log.size() == r.log.size());
  CHECK(ck.config_hash == config_hash(fx.config));
  const Probe pr = make_probe(*fx.backend, 3);
  fx.backend->attach(r.adapters);
  const Matrix ctx = fx.backend->text_embed("photo of sks man as 35-year-old");
  const Matrix a = fx.backend->predict_noise(pr.latent, pr.t, ctx);
  fx.backend->detach();
  TinyBackend other;
  apply_checkpoint(ck, other);
  CHECK(other.attached());
  CHECK(other.text_embed("photo of sks man as 35-year-old") == ctx);
  CHECK(other.predict_noise(pr.latent, pr.t, ctx) == a);

  // Full fine-tune checkpoints carry the weights.
  Fixture full = make_fixture(0);
  full.config.use_lora = false;
  auto rf = finetune(full.profile, full.regset, full.config, *full.backend, &full.embedder, full.images);
  const auto fdir = testing::scratch_dir("checkpoint_full");
  save_checkpoint(fdir, rf, *full.backend, full.config);
  auto fck = load_checkpoint(fdir);
  TinyBackend plain;
  apply_checkpoint(fck, plain);
  CHECK(plain.weights_hash() == full.backend->weights_hash());
}

TEST_CASE("NT-Xent documented case") {
  Matrix z(3, 2);
  z << 1, 0, 1, 0, 0, 1;
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(std::abs(ntxent(z, {{0, 1}}, 1.0) - expected) < 1e-6);
  CHECK(std::abs(expected - 0.3133) < 1e-4);
  CHECK(ntxent(z, {}, 0.5) == 0.0);
  CHECK_THROWS_AS(ntxent(z, {{0, 1}}, 0.0), DomainError);
  CHECK_THROWS_AS(ntxent(z, {{0, 1}}, -1.0), DomainError);
  Matrix bad = z;
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(ntxent(bad, {{0, 1}}, 1.0), DomainError);
}

TEST_CASE("NT-Xent tends to log(N - 1) at large temperature") {
  std::mt19937_64 rng(5);
  for (int n : {3, 5, 9}) {
    const Matrix z = unit_rows(random_matrix(rng, n, 6));
    CHECK(std::abs(ntxent(z, {{0, 1}, {1, 2}}, 1e6) - std::log(n - 1.0)) < 1e-5);
  }
}

TEST_CASE("NT-Xent matches the loop reference and is rotation invariant") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = unit_rows(random_matrix(rng, 6, 5));
    const PairList pairs{{0, 1}, {2, 3}, {5, 4}, {1, 0}};
    const double tau = 0.1 + uniform01(rng);
    CHECK(std::abs(ntxent(z, pairs, tau) - testing::reference_ntxent(z, pairs, tau)) < 1e-10);
    const Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, 5, 5));
    const Matrix q = qr.householderQ();
    CHECK(std::abs(ntxent(z * q, pairs, tau) - ntxent(z, pairs, tau)) < 1e-9);
  }
}

TEST_CASE("NT-Xent gradient matches central differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = unit_rows(random_matrix(rng, 5, 4));
    const PairList pairs{{0, 1}, {1, 0}, {2, 4}};
    const double tau = 0.5;
    ad::Tape tape;
    ad::Var v = tape.variable(z);
    tape.backward(ntxent(v, pairs, tau));
    const Matrix g = tape.grad(v);
    Matrix fd(z.rows(), z.cols());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Matrix zp = z, zm = z;
      zp.data()[i] += h;
      zm.data()[i] -= h;
      fd.data()[i] =
          (testing::reference_ntxent(zp, pairs, tau) - testing::reference_ntxent(zm, pairs, tau)) / (2 * h);
    }
    CHECK((g - fd).norm() / fd.norm() < 1e-4);
  }
}

TEST_CASE("AdamW single step") {
  Parameter p{"p", Matrix::Constant(1, 1, 1.0), true};
  AdamW adam({0.1, 0.9, 0.999, 1e-8, 0.0});
  adam.update(p, Matrix::Constant(1, 1, 2.0));
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  Parameter q{"q", Matrix::Constant(1, 1, 1.0), true};
  AdamW decayed({0.1, 0.9, 0.999, 1e-8, 0.5});
  decayed.update(q, Matrix::Constant(1, 1, 0.0));
  CHECK(q.value(0, 0) == doctest::Approx(0.95));
}

TEST_CASE("noise schedule") {
  const auto s = NoiseSchedule::scaled_linear();
  CHECK(s.train_steps() == 1000);
  CHECK(s.alpha_bar(0) == doctest::Approx(1.0 - 0.00085));
  CHECK(s.alpha_bar(-1) == s.alpha_bar(0));
  for (int t = 1; t < 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  CHECK(s.timesteps(50).front() == 981);
  CHECK(s.timesteps(50).back() == 1);
  CHECK(s.timesteps(5) == std::vector<int>{801, 601, 401, 201, 1});
  CHECK_THROWS_AS(s.timesteps(0), ConfigError);
}
