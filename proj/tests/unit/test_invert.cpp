// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "ageshift/error.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/invert/inversion.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/util/random.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ageshift;

namespace {

double mse(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

}  // namespace

TEST_CASE("DDIM step and inverse step are algebraic inverses for a fixed eps") {
  const auto s = NoiseSchedule::scaled_linear();
  std::mt19937_64 rng(1);
  Matrix z(64, 4), eps(64, 4);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z.data()[i] = standard_normal(rng);
    eps.data()[i] = standard_normal(rng);
  }
  for (int t : {1, 201, 601, 981}) {
    const Matrix up = ddim_inverse_step(s, z, eps, t, 200);
    CHECK((ddim_step(s, up, eps, t, 200) - z).cwiseAbs().maxCoeff() < 1e-10);
  }
  // Oracle for one sampling step: x0 = (z - sqrt(1-a) eps)/sqrt(a); z' = sqrt(a') x0 + sqrt(1-a') eps.
  const double a = s.alpha_bar(601), ap = s.alpha_bar(401);
  const Matrix x0 = (z - std::sqrt(1 - a) * eps) / std::sqrt(a);
  CHECK((ddim_step(s, z, eps, 601, 200) - (std::sqrt(ap) * x0 + std::sqrt(1 - ap) * eps)).norm() < 1e-10);
}

TEST_CASE("invert then sample at guidance 1 reproduces the latent") {
  for (long seed = 0; seed < 3; ++seed) {
    Fixture fx = make_fixture(seed);
    for (const auto& in : fx.inputs) {
      const std::string p = edit_prompt("sks", in.age, Gender::male);
      const auto tr = ddim_invert(fx.images.load(in.image_ref), p, *fx.backend, 3);
      CHECK(tr.latents.size() == 3);
      const auto inv = optimize_null_text(tr, p, *fx.backend, {10, 1e-2, 1.0, 1e-5});
      const Matrix rec = reconstruct_latent(inv, *fx.backend);
      CHECK(mse(rec, tr.z0) < 1e-3);
      // Guidance 1 leaves the null embedding alone.
      CHECK(rec == reconstruct_latent_unoptimized(inv, *fx.backend));
      const Matrix empty = fx.backend->text_embed("");
      for (const auto& n : inv.null_embeddings) CHECK(n == empty);
    }
  }
}

TEST_CASE("inversion boundaries and determinism") {
  Fixture fx = make_fixture(0);
  const Image img = fx.images.load(fx.inputs[0].image_ref);
  const std::string p = edit_prompt("sks", 35, Gender::male);
  const auto one = ddim_invert(img, p, *fx.backend, 1);
  CHECK(one.latents.size() == 1);
  CHECK(one.timesteps.size() == 1);
  const auto a = ddim_invert(img, p, *fx.backend, 5);
  const auto b = ddim_invert(img, p, *fx.backend, 5);
  REQUIRE(a.latents.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.latents[i] == b.latents[i]);
  CHECK(a.z0 == fx.backend->encode_image(img));
  CHECK_THROWS_AS(ddim_invert(Image(8, 8), p, *fx.backend, 5), ShapeError);

  const auto r1 = optimize_null_text(a, p, *fx.backend, {});
  const auto r2 = optimize_null_text(a, p, *fx.backend, {});
  for (std::size_t i = 0; i < r1.null_embeddings.size(); ++i) CHECK(r1.null_embeddings[i] == r2.null_embeddings[i]);
  CHECK(r1.trajectory.size() == r1.null_embeddings.size());
  CHECK(r1.steps() == 5);
  CHECK(r1.z_T == a.latents.back());
}

TEST_CASE("zero inner steps keep the empty-prompt embedding") {
  Fixture fx = make_fixture(1);
  const std::string p = edit_prompt("sks", 60, Gender::male);
  const auto tr = ddim_invert(fx.images.load(fx.inputs[1].image_ref), p, *fx.backend, 5);
  const auto inv = optimize_null_text(tr, p, *fx.backend, {0, 1e-2, 7.5, 1e-5});
  const Matrix empty = fx.backend->text_embed("");
  for (const auto& n : inv.null_embeddings) CHECK(n == empty);
}

TEST_CASE("null-text optimisation at guidance 7.5") {
  int improved = 0, cases = 0, monotone = 0, steps = 0;
  for (long seed = 0; seed < 5; ++seed) {
    Fixture fx = make_fixture(seed);
    for (const auto& in : fx.inputs) {
      const std::string p = edit_prompt("sks", in.age, Gender::male);
      const auto tr = ddim_invert(fx.images.load(in.image_ref), p, *fx.backend, fx.config.diffusion_steps);
      const auto inv = optimize_null_text(tr, p, *fx.backend, {10, 1e-2, 7.5, 1e-5});
      const double opt = mse(reconstruct_latent(inv, *fx.backend), tr.z0);
      const double unopt = mse(reconstruct_latent_unoptimized(inv, *fx.backend), tr.z0);
      ++cases;
      improved += opt < unopt;
      for (const auto& il : inv.inner_losses) {
        ++steps;
        bool ok = true;
        for (std::size_t k = 1; k < il.size(); ++k) ok = ok && il[k] <= il[k - 1];
        monotone += ok;
      }
      CHECK(inv.step_losses.size() == inv.null_embeddings.size());
    }
  }
  CHECK(improved >= 9 * cases / 10);
  CHECK(monotone >= 9 * steps / 10);
}

TEST_CASE("inversion files round trip") {
  Fixture fx = make_fixture(0);
  const std::string p = edit_prompt("sks", 35, Gender::male);
  const auto tr = ddim_invert(fx.images.load(fx.inputs[0].image_ref), p, *fx.backend, 5);
  auto inv = optimize_null_text(tr, p, *fx.backend, {3, 1e-2, 7.5, 1e-5});
  inv.config_hash = "abc";
  const auto dir = testing::scratch_dir("inversion");
  save_inversion(dir, inv);
  const auto back = load_inversion(dir);
  CHECK(back.source_prompt == p);
  CHECK(back.timesteps == inv.timesteps);
  CHECK(back.step_ratio == inv.step_ratio);
  CHECK(back.guidance == inv.guidance);
  CHECK(back.config_hash == "abc");
  CHECK(back.z_T == inv.z_T);
  CHECK(back.z0 == inv.z0);
  REQUIRE(back.null_embeddings.size() == inv.null_embeddings.size());
  for (std::size_t i = 0; i < inv.null_embeddings.size(); ++i) {
    CHECK(back.null_embeddings[i] == inv.null_embeddings[i]);
    CHECK(back.trajectory[i] == inv.trajectory[i]);
  }
  CHECK(reconstruct_latent(back, *fx.backend) == reconstruct_latent(inv, *fx.backend));
}
