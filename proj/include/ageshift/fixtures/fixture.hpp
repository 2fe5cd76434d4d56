// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic toy assets for running the whole pipeline in seconds.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ageshift/core/config.hpp"
#include "ageshift/core/types.hpp"
#include "ageshift/fixtures/stubs.hpp"
#include "ageshift/fixtures/tiny_backend.hpp"
#include "ageshift/fixtures/wordpiece.hpp"
#include "ageshift/tensor/image.hpp"

namespace ageshift {

// Appearance of one synthetic identity.
struct FaceStyle {
  double skin[3];
  double hair[3];
  double face_rx;
  double face_ry;
  double eye_dx;
  double eye_y;
  double mouth_w;
};

FaceStyle face_style(long identity_seed);
// A face-like pattern whose mean intensity tracks `age` through the stub
// estimator's formula, so estimated ages follow the rendered age.
Image synthetic_face(const FaceStyle& style, int age, int size = TinyBackend::kImageSize);

// Group-labelled entries, `per_group` for each of the six groups, with
// images put into `images`. Ages are the config's representative ages.
AgeLabeledManifest synthetic_group_set(int per_group, long seed, MemoryImageStore& images,
                                       const std::string& prefix = "reg/");

struct Fixture {
  long seed = 0;
  std::unique_ptr<TinyBackend> backend;
  const WordpieceTokenizer* tokenizer = nullptr;
  MeanIntensityAgeEstimator estimator;
  ProjectionFaceEmbedder embedder;
  MemoryImageStore images;
  IdentityProfile profile;
  AgeLabeledManifest groups;  // as labelled by the source dataset
  AgeLabeledManifest regset;  // integer ages from the stub estimator
  std::vector<ManifestEntry> inputs;
  PipelineConfig config;

  // Covers backend weights, tokenizer, images, profile, manifests, config.
  std::string hash() const;
};

// Toy-scale pipeline settings: 16 px images, 5 sampling steps, rank 4.
PipelineConfig fixture_config(long seed = 0);
Fixture make_fixture(long seed = 0);

// Writes vocab.txt, config.txt, profile.json, regset_groups.tsv, regset.tsv,
// skip.txt, inputs.tsv and images/. Returns the written paths relative to dir.
std::vector<std::filesystem::path> write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace ageshift
