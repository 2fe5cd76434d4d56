// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "ageshift/error.hpp"

namespace ageshift {

NoiseSchedule NoiseSchedule::scaled_linear(int train_steps, double beta_start, double beta_end) {
  if (train_steps < 2) throw ConfigError("noise schedule needs at least 2 training steps");
  NoiseSchedule s;
  s.alpha_bar_.resize(static_cast<std::size_t>(train_steps));
  const double a = std::sqrt(beta_start), b = std::sqrt(beta_end);
  double prod = 1.0;
  for (int i = 0; i < train_steps; ++i) {
    const double r = a + (b - a) * i / (train_steps - 1);
    prod *= 1.0 - r * r;
    s.alpha_bar_[static_cast<std::size_t>(i)] = prod;
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0) return alpha_bar_.front();
  if (t >= train_steps()) throw DomainError("timestep " + std::to_string(t) + " past the schedule");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

int NoiseSchedule::step_ratio(int steps) const {
  if (steps < 1 || steps > train_steps()) throw ConfigError("diffusion_steps must lie in [1, train steps]");
  return train_steps() / steps;
}

std::vector<int> NoiseSchedule::timesteps(int steps) const {
  const int ratio = step_ratio(steps);
  std::vector<int> ts(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) ts[static_cast<std::size_t>(i)] = std::min((steps - 1 - i) * ratio + 1, train_steps() - 1);
  return ts;
}

}  // namespace ageshift
