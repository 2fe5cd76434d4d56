// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/fixtures/stubs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ageshift/error.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

namespace {
constexpr double kMinNorm = 1e-9;
}

int MeanIntensityAgeEstimator::estimate(const Image& image) const {
  if (image.pixels.size() == 0) throw DomainError("stub estimator: empty image");
  const double age = std::round(kOffset + kSlope * image.mean());
  return static_cast<int>(std::clamp(age, 0.0, 100.0));
}

double MeanIntensityAgeEstimator::intensity_for(int age) { return (age - kOffset) / kSlope; }

ProjectionFaceEmbedder::ProjectionFaceEmbedder(long seed, int pixels) : seed_(seed), projection_(kDim, pixels) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed) ^ 0xFACEull);
  const double sd = 1.0 / std::sqrt(static_cast<double>(pixels));
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = sd * standard_normal(rng);
}

Vector ProjectionFaceEmbedder::centred(const Image& image) const {
  if (image.pixels.size() != projection_.cols())
    throw ShapeError("stub embedder: expected " + std::to_string(projection_.cols()) + " pixel values");
  // Row-major flattening of the H*W x 3 pixel matrix.
  Vector x(image.pixels.size());
  for (Eigen::Index r = 0; r < image.pixels.rows(); ++r)
    for (Eigen::Index c = 0; c < 3; ++c) x(r * 3 + c) = image.pixels(r, c);
  return x.array() - x.mean();
}

Vector ProjectionFaceEmbedder::embed(const Image& image) const {
  const Vector u = projection_ * centred(image);
  const double n = u.norm();
  if (!(n > kMinNorm)) throw DomainError("stub embedder: no face structure in image");
  return u / n;
}

Matrix ProjectionFaceEmbedder::embed_vjp(const Image& image, const Vector& grad) const {
  const Vector u = projection_ * centred(image);
  const double n = u.norm();
  if (!(n > kMinNorm)) throw DomainError("stub embedder: no face structure in image");
  const Vector e = u / n;
  const Vector gu = (grad - e * e.dot(grad)) / n;
  Vector gx = projection_.transpose() * gu;
  gx.array() -= gx.mean();
  Matrix out(image.pixels.rows(), 3);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < 3; ++c) out(r, c) = gx(r * 3 + c);
  return out;
}

}  // namespace ageshift
