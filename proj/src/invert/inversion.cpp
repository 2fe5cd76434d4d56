// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/invert/inversion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ageshift/adapt/optimizer.hpp"
#include "ageshift/error.hpp"
#include "ageshift/tensor/npy.hpp"

namespace ageshift {

namespace fs = std::filesystem;

namespace {

double mse(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

std::string indexed(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d.npy", i);
  return buf;
}

void check_steps(int steps) {
  if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
}

}  // namespace

Matrix ddim_step(const NoiseSchedule& schedule, const Matrix& z, const Matrix& eps, int t, int ratio) {
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - ratio);
  const Matrix x0 = (z - std::sqrt(1.0 - ab_t) * eps) / std::sqrt(ab_t);
  return std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
}

Matrix ddim_inverse_step(const NoiseSchedule& schedule, const Matrix& z, const Matrix& eps, int t, int ratio) {
  const double ab_cur = schedule.alpha_bar(t - ratio);
  const double ab_next = schedule.alpha_bar(t);
  const Matrix x0 = (z - std::sqrt(1.0 - ab_cur) * eps) / std::sqrt(ab_cur);
  return std::sqrt(ab_next) * x0 + std::sqrt(1.0 - ab_next) * eps;
}

Matrix guided_noise(DenoiserBackend& backend, const Matrix& z, int t, const Matrix& uncond, const Matrix& cond,
                    double guidance, AttentionHook* cond_hook) {
  const Matrix eps_u = backend.predict_noise(z, t, uncond);
  const Matrix eps_c = backend.predict_noise(z, t, cond, cond_hook);
  return eps_u + guidance * (eps_c - eps_u);
}

DdimTrajectory ddim_invert_latent(const Matrix& z0, const std::string& prompt, DenoiserBackend& backend, int steps) {
  check_steps(steps);
  const NoiseSchedule& sched = backend.schedule();
  DdimTrajectory out;
  out.z0 = z0;
  out.timesteps = sched.timesteps(steps);
  out.step_ratio = sched.step_ratio(steps);
  const Matrix cond = backend.text_embed(prompt);
  Matrix z = z0;
  for (int i = steps - 1; i >= 0; --i) {
    const int t = out.timesteps[static_cast<std::size_t>(i)];
    const Matrix eps = backend.predict_noise(z, t, cond);
    z = ddim_inverse_step(sched, z, eps, t, out.step_ratio);
    out.latents.push_back(z);
  }
  return out;
}

DdimTrajectory ddim_invert(const Image& image, const std::string& prompt, DenoiserBackend& backend, int steps) {
  if (image.width != backend.image_size() || image.height != backend.image_size())
    throw ShapeError("ddim_invert: image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     ", backend expects " + std::to_string(backend.image_size()) + "x" +
                     std::to_string(backend.image_size()));
  return ddim_invert_latent(backend.encode_image(image), prompt, backend, steps);
}

const Matrix& InversionResult::target(int i) const {
  const int s = steps();
  if (i < 0 || i >= s) throw DomainError("inversion step index out of range");
  return i == s - 1 ? z0 : trajectory[static_cast<std::size_t>(s - 2 - i)];
}

InversionResult optimize_null_text(const DdimTrajectory& traj, const std::string& prompt, DenoiserBackend& backend,
                                   const NullTextOptions& options) {
  const int steps = static_cast<int>(traj.timesteps.size());
  if (steps < 1 || static_cast<int>(traj.latents.size()) != steps)
    throw ShapeError("optimize_null_text: trajectory and timesteps disagree");
  if (options.inner_steps < 0) throw ConfigError("inner_steps must be >= 0");

  InversionResult r;
  r.z0 = traj.z0;
  r.z_T = traj.latents.back();
  r.trajectory = traj.latents;
  r.timesteps = traj.timesteps;
  r.step_ratio = traj.step_ratio;
  r.source_prompt = prompt;
  r.guidance = options.guidance;
  r.backend_id = backend.id();

  const NoiseSchedule& sched = backend.schedule();
  const Matrix cond = backend.text_embed(prompt);
  Matrix uncond = backend.text_embed("");
  const bool optimise = options.guidance != 1.0 && options.inner_steps > 0;

  Matrix z = r.z_T;
  for (int i = 0; i < steps; ++i) {
    const int t = r.timesteps[static_cast<std::size_t>(i)];
    const Matrix& target = r.target(i);
    std::vector<double> inner;
    if (optimise) {
      const Matrix eps_c = backend.predict_noise(z, t, cond);
      AdamW adam({options.inner_lr, 0.9, 0.999, 1e-8, 0.0});
      for (int j = 0; j < options.inner_steps; ++j) {
        ad::Tape tape;
        ad::Var u = tape.variable(uncond);
        ad::Var eps_u = backend.predict_noise(tape, tape.constant(z), t, u);
        // eps = eps_u + g (eps_c - eps_u) = (1 - g) eps_u + g eps_c
        ad::Var eps = ad::add(ad::scale(eps_u, 1.0 - options.guidance), tape.constant(options.guidance * eps_c));
        const double ab_t = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(t - r.step_ratio);
        // ddim_step is affine in eps: z_prev = a z + b eps.
        const double a = std::sqrt(ab_prev) / std::sqrt(ab_t);
        const double b = std::sqrt(1.0 - ab_prev) - std::sqrt(ab_prev) * std::sqrt(1.0 - ab_t) / std::sqrt(ab_t);
        ad::Var z_prev = ad::add(tape.constant(a * z), ad::scale(eps, b));
        ad::Var loss = ad::mean_square(ad::sub(z_prev, tape.constant(target)));
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value))
          throw NumericError("null-text optimisation: non-finite loss at timestep " + std::to_string(t), t);
        inner.push_back(value);
        if (value < options.early_stop_loss) break;
        tape.backward(loss);
        adam.update(uncond, tape.grad(u), &uncond);
        adam.next_step();
      }
    }
    r.null_embeddings.push_back(uncond);
    z = ddim_step(sched, z, guided_noise(backend, z, t, uncond, cond, options.guidance), t, r.step_ratio);
    const double terminal = mse(z, target);
    if (!std::isfinite(terminal))
      throw NumericError("null-text optimisation: non-finite latent at timestep " + std::to_string(t), t);
    inner.push_back(terminal);
    r.step_losses.push_back(terminal);
    r.inner_losses.push_back(std::move(inner));
  }
  return r;
}

Matrix sample_latent(DenoiserBackend& backend, const Matrix& z_T, const std::vector<int>& timesteps, int step_ratio,
                     const Matrix& cond, const std::vector<Matrix>& null_embeddings, double guidance) {
  if (null_embeddings.size() != timesteps.size())
    throw StateError("sampling needs one null embedding per step (" + std::to_string(timesteps.size()) + "), got " +
                     std::to_string(null_embeddings.size()));
  Matrix z = z_T;
  for (std::size_t i = 0; i < timesteps.size(); ++i) {
    const int t = timesteps[i];
    z = ddim_step(backend.schedule(), z, guided_noise(backend, z, t, null_embeddings[i], cond, guidance), t,
                  step_ratio);
  }
  return z;
}

Matrix reconstruct_latent(const InversionResult& inv, DenoiserBackend& backend) {
  return sample_latent(backend, inv.z_T, inv.timesteps, inv.step_ratio, backend.text_embed(inv.source_prompt),
                       inv.null_embeddings, inv.guidance);
}

Matrix reconstruct_latent_unoptimized(const InversionResult& inv, DenoiserBackend& backend) {
  const std::vector<Matrix> empty(inv.timesteps.size(), backend.text_embed(""));
  return sample_latent(backend, inv.z_T, inv.timesteps, inv.step_ratio, backend.text_embed(inv.source_prompt), empty,
                       inv.guidance);
}

void save_inversion(const fs::path& dir, const InversionResult& r) {
  fs::create_directories(dir / "trajectory");
  fs::create_directories(dir / "null");
  save_npy(dir / "z0.npy", r.z0);
  save_npy(dir / "z_T.npy", r.z_T);
  for (std::size_t i = 0; i < r.trajectory.size(); ++i)
    save_npy(dir / "trajectory" / indexed(static_cast<int>(i)), r.trajectory[i]);
  for (std::size_t i = 0; i < r.null_embeddings.size(); ++i)
    save_npy(dir / "null" / indexed(static_cast<int>(i)), r.null_embeddings[i]);
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["source_prompt"] = r.source_prompt;
  j["steps"] = r.steps();
  j["timesteps"] = r.timesteps;
  j["step_ratio"] = r.step_ratio;
  j["guidance"] = r.guidance;
  j["backend"] = r.backend_id;
  j["config_hash"] = r.config_hash;
  j["step_losses"] = r.step_losses;
  j["inner_losses"] = r.inner_losses;
  std::ofstream out(dir / "inversion.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "inversion.json").string());
  out << j.dump(2) << "\n";
}

InversionResult load_inversion(const fs::path& dir) {
  std::ifstream in(dir / "inversion.json");
  if (!in) throw IoError("no inversion.json in " + dir.string());
  InversionResult r;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    r.source_prompt = j.at("source_prompt").get<std::string>();
    r.timesteps = j.at("timesteps").get<std::vector<int>>();
    r.step_ratio = j.at("step_ratio").get<int>();
    r.guidance = j.at("guidance").get<double>();
    r.backend_id = j.value("backend", std::string());
    r.config_hash = j.value("config_hash", std::string());
    r.step_losses = j.value("step_losses", std::vector<double>{});
    r.inner_losses = j.value("inner_losses", std::vector<std::vector<double>>{});
    if (j.at("steps").get<int>() != static_cast<int>(r.timesteps.size()))
      throw ParseError("inversion.json: steps and timesteps disagree", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("inversion.json: ") + e.what(), 0);
  }
  r.z0 = load_npy(dir / "z0.npy");
  r.z_T = load_npy(dir / "z_T.npy");
  for (int i = 0; i < r.steps(); ++i) {
    r.trajectory.push_back(load_npy(dir / "trajectory" / indexed(i)));
    r.null_embeddings.push_back(load_npy(dir / "null" / indexed(i)));
  }
  return r;
}

}  // namespace ageshift
