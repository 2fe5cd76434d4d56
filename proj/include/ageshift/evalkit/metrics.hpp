// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/tensor/image.hpp"

namespace ageshift {

struct EvalRecord {
  std::string identity;
  std::string method = "ours";
  std::string input_ref;
  std::string output_ref;
  int target_age = 0;
  int estimated_age = 0;
  // Absent when the face embedder failed on either image.
  std::optional<double> id_distance;

  bool operator==(const EvalRecord&) const = default;
};

struct AgeMetric {
  std::map<int, double> per_target;
  std::map<int, std::size_t> counts;
  double all = 0.0;
};

// AGE(t) = mean |estimated - t| over records with target t; ALL over every
// record. Throws ValidationError when `records` is empty.
AgeMetric age_metric(const std::vector<EvalRecord>& records);

// 1 - cos(a, b), clamped to [0, 2].
double cosine_distance(const Vector& a, const Vector& b);

struct ImagePair {
  std::string input_ref;
  std::string output_ref;
  Image input;
  Image output;
};

struct Exclusion {
  std::string input_ref;
  std::string output_ref;
  std::string reason;
};

struct IdMetric {
  // Mean of 1 - cosine over the pairs that embedded; absent if none did.
  std::optional<double> value;
  std::vector<std::optional<double>> distances;  // per pair
  std::vector<Exclusion> excluded;
};

IdMetric id_metric(const std::vector<ImagePair>& pairs, const FaceEmbedder& embedder);

}  // namespace ageshift
