// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/regset/regset.hpp"

namespace ageshift {

// age = clamp(round(5 + 90 * mean_pixel), 0, 100); an all-black image is 5.
class MeanIntensityAgeEstimator : public AgeEstimator {
 public:
  static constexpr double kOffset = 5.0;
  static constexpr double kSlope = 90.0;

  std::string id() const override { return "stub"; }
  int estimate(const Image& image) const override;
  bool thread_safe() const override { return true; }
  std::unique_ptr<AgeEstimator> clone() const override { return std::make_unique<MeanIntensityAgeEstimator>(); }

  // Mean intensity at which the stub reports `age`.
  static double intensity_for(int age);
};

// Always returns the same age.
class ConstantAgeEstimator : public AgeEstimator {
 public:
  explicit ConstantAgeEstimator(int age) : age_(age) {}
  std::string id() const override { return "constant:" + std::to_string(age_); }
  int estimate(const Image&) const override { return age_; }
  bool thread_safe() const override { return true; }

 private:
  int age_;
};

// e = P (x - mean(x)) / |P (x - mean(x))| over the flattened pixels, with a
// seeded Gaussian projection P. Images without structure (|u| ~ 0) throw
// DomainError, standing in for "no face found".
class ProjectionFaceEmbedder : public FaceEmbedder {
 public:
  static constexpr int kDim = 32;

  explicit ProjectionFaceEmbedder(long seed = 0, int pixels = 16 * 16 * 3);
  std::string id() const override { return "stub:" + std::to_string(seed_); }
  Vector embed(const Image& image) const override;
  bool differentiable() const override { return true; }
  Matrix embed_vjp(const Image& image, const Vector& grad) const override;

 private:
  Vector centred(const Image& image) const;

  long seed_;
  Matrix projection_;  // kDim x pixels
};

}  // namespace ageshift
