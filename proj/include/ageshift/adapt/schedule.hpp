// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace ageshift {

// Discrete-time variance schedule shared by training and DDIM sampling.
class NoiseSchedule {
 public:
  // "scaled linear" betas: linspace(sqrt(b0), sqrt(b1), n)^2.
  static NoiseSchedule scaled_linear(int train_steps = 1000, double beta_start = 0.00085, double beta_end = 0.012);

  int train_steps() const { return static_cast<int>(alpha_bar_.size()); }
  // Cumulative alpha at t; t < 0 maps to alpha_bar(0).
  double alpha_bar(int t) const;
  int step_ratio(int steps) const;
  // Descending sampling timesteps, offset by one like the reference scheduler.
  std::vector<int> timesteps(int steps) const;

 private:
  std::vector<double> alpha_bar_;
};

}  // namespace ageshift
