// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic DDIM inversion and per-step optimisation of the
// unconditional ("null") text embedding so that guided sampling retraces
// the inverted trajectory.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"

namespace ageshift {

// Latents after each inversion step: latents[i] sits at timesteps[S-1-i];
// latents.back() is z_T. z0 is the encoded image.
struct DdimTrajectory {
  Matrix z0;
  std::vector<Matrix> latents;
  std::vector<int> timesteps;  // descending sampling order
  int step_ratio = 0;
};

// Deterministic sampling step (eta = 0) from t to t - ratio.
Matrix ddim_step(const NoiseSchedule& schedule, const Matrix& z, const Matrix& eps, int t, int ratio);
// Its inverse: from t - ratio up to t, with eps evaluated at t.
Matrix ddim_inverse_step(const NoiseSchedule& schedule, const Matrix& z, const Matrix& eps, int t, int ratio);

// eps_u + guidance * (eps_c - eps_u). `cond_hook` only sees the conditional
// pass. Both passes always run so every caller computes identical values.
Matrix guided_noise(DenoiserBackend& backend, const Matrix& z, int t, const Matrix& uncond, const Matrix& cond,
                    double guidance, AttentionHook* cond_hook = nullptr);

// Throws ShapeError if the image does not match the backend's size.
DdimTrajectory ddim_invert(const Image& image, const std::string& prompt, DenoiserBackend& backend, int steps);
DdimTrajectory ddim_invert_latent(const Matrix& z0, const std::string& prompt, DenoiserBackend& backend, int steps);

struct NullTextOptions {
  int inner_steps = 10;
  double inner_lr = 1.0e-2;
  double guidance = 7.5;
  double early_stop_loss = 1.0e-5;
};

struct InversionResult {
  Matrix z0;
  Matrix z_T;
  std::vector<Matrix> trajectory;       // as DdimTrajectory::latents
  std::vector<Matrix> null_embeddings;  // one per sampling step, in sampling order
  std::vector<int> timesteps;
  int step_ratio = 0;
  std::string source_prompt;
  double guidance = 1.0;
  // Loss after the last update of each step, and every inner iterate.
  std::vector<double> step_losses;
  std::vector<std::vector<double>> inner_losses;
  std::string backend_id;
  std::string config_hash;

  int steps() const { return static_cast<int>(timesteps.size()); }
  // Latent the sampling step `i` should land on.
  const Matrix& target(int i) const;
};

// Walks the sampling steps from T down, optimising each step's null
// embedding with Adam for up to inner_steps iterations (stopping early below
// early_stop_loss) and starting from the previous step's result. With
// guidance 1 the objective does not depend on the null embedding and it is
// left at the empty-prompt embedding. Throws NumericError with the timestep.
InversionResult optimize_null_text(const DdimTrajectory& trajectory, const std::string& prompt,
                                   DenoiserBackend& backend, const NullTextOptions& options);

// Guided sampling from z_T; null_embeddings[i] is used at step i.
Matrix sample_latent(DenoiserBackend& backend, const Matrix& z_T, const std::vector<int>& timesteps, int step_ratio,
                     const Matrix& cond, const std::vector<Matrix>& null_embeddings, double guidance);
// Sampling with the source prompt and the optimised null embeddings.
Matrix reconstruct_latent(const InversionResult& inversion, DenoiserBackend& backend);
// Same, with every null embedding replaced by the empty-prompt embedding.
Matrix reconstruct_latent_unoptimized(const InversionResult& inversion, DenoiserBackend& backend);

// Directory layout: inversion.json, z0.npy, z_T.npy, trajectory/NNN.npy,
// null/NNN.npy.
void save_inversion(const std::filesystem::path& dir, const InversionResult& result);
InversionResult load_inversion(const std::filesystem::path& dir);

}  // namespace ageshift
