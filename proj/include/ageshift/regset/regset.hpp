// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Regularisation-set refinement: replaces coarse group labels with integer
// ages predicted by an age estimator.

#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ageshift/core/config.hpp"
#include "ageshift/core/types.hpp"
#include "ageshift/tensor/image.hpp"

namespace ageshift {

// Predicts an integer age in [0, 100] from a face image. Must be
// deterministic for a fixed model and input.
class AgeEstimator {
 public:
  virtual ~AgeEstimator() = default;
  virtual std::string id() const = 0;
  virtual int estimate(const Image& image) const = 0;
  // A backend either tolerates concurrent estimate() calls or can be cloned
  // per worker; one of the two must hold for parallel refinement.
  virtual bool thread_safe() const { return false; }
  virtual std::unique_ptr<AgeEstimator> clone() const { return nullptr; }
};

// Calls the estimator and enforces the [0, 100] contract.
int checked_estimate(const AgeEstimator& estimator, const Image& image);

struct SkippedEntry {
  std::string image_ref;
  std::string reason;
};

struct RefinementResult {
  AgeLabeledManifest manifest;
  std::vector<SkippedEntry> skipped;
};

// One image path per line; blank lines ignored.
std::set<std::string> load_skip_list(const std::filesystem::path& path);

// Every input entry must carry a source group. Entries on the skip list,
// or whose estimation fails, are reported in `skipped`; the rest keep their
// path and group and get age = estimator(image).
RefinementResult refine_regularization_set(const AgeLabeledManifest& groups, const AgeEstimator& estimator,
                                           const ImageStore& images, const std::set<std::string>& skip_list = {},
                                           int workers = 1);

// Exactly `per_group` entries of each of the six groups, drawn uniformly
// without replacement with a seeded generator. Output keeps input order.
AgeLabeledManifest sample_balanced(const AgeLabeledManifest& manifest, int per_group, long seed);

// Non-refined baseline: every entry labelled with its group's representative age.
AgeLabeledManifest label_with_group_ages(const AgeLabeledManifest& manifest, const PipelineConfig& config);

}  // namespace ageshift
