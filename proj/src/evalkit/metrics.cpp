// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "ageshift/error.hpp"

namespace ageshift {

AgeMetric age_metric(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ValidationError("age_metric: no records");
  AgeMetric m;
  std::map<int, long> sums;
  long total = 0;
  for (const auto& r : records) {
    const long d = std::labs(static_cast<long>(r.estimated_age) - r.target_age);
    sums[r.target_age] += d;
    ++m.counts[r.target_age];
    total += d;
  }
  for (const auto& [t, s] : sums) m.per_target[t] = static_cast<double>(s) / static_cast<double>(m.counts[t]);
  m.all = static_cast<double>(total) / static_cast<double>(records.size());
  return m;
}

double cosine_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_distance: embedding sizes differ");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_distance: zero embedding");
  return std::clamp(1.0 - a.dot(b) / (na * nb), 0.0, 2.0);
}

IdMetric id_metric(const std::vector<ImagePair>& pairs, const FaceEmbedder& embedder) {
  IdMetric m;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& p : pairs) {
    try {
      const double d = cosine_distance(embedder.embed(p.input), embedder.embed(p.output));
      m.distances.emplace_back(d);
      sum += d;
      ++used;
    } catch (const std::exception& e) {
      m.distances.emplace_back(std::nullopt);
      m.excluded.push_back({p.input_ref, p.output_ref, e.what()});
    }
  }
  if (used > 0) m.value = sum / static_cast<double>(used);
  return m;
}

}  // namespace ageshift
