// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/regset/regset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <random>
#include <thread>

#include "ageshift/error.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

int checked_estimate(const AgeEstimator& estimator, const Image& image) {
  const int age = estimator.estimate(image);
  if (!age_in_range(age))
    throw ValidationError("estimator '" + estimator.id() + "' returned age " + std::to_string(age) +
                          " outside [0, 100]");
  return age;
}

std::set<std::string> load_skip_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skip list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

RefinementResult refine_regularization_set(const AgeLabeledManifest& groups, const AgeEstimator& estimator,
                                           const ImageStore& images, const std::set<std::string>& skip_list,
                                           int workers) {
  for (const auto& e : groups.entries)
    if (!e.source_group)
      throw ValidationError("refine_regularization_set: entry '" + e.image_ref + "' has no source group");

  struct Outcome {
    std::optional<int> age;
    std::string reason;
  };
  std::vector<Outcome> outcomes(groups.size());
  auto run_range = [&](const AgeEstimator& est, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = groups.entries[i];
      if (skip_list.count(e.image_ref)) {
        outcomes[i].reason = "skip-list";
        continue;
      }
      try {
        outcomes[i].age = checked_estimate(est, images.load(e.image_ref));
      } catch (const std::exception& ex) {
        outcomes[i].reason = std::string("estimator failure: ") + ex.what();
      }
    }
  };

  const std::size_t n = groups.size();
  const std::size_t nworkers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
  const bool parallel = nworkers > 1 && (estimator.thread_safe() || estimator.clone() != nullptr);
  if (!parallel) {
    run_range(estimator, 0, n);
  } else {
    std::vector<std::unique_ptr<AgeEstimator>> clones;
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + nworkers - 1) / nworkers;
    for (std::size_t w = 0; w < nworkers; ++w) {
      const std::size_t b = w * chunk, e = std::min(n, b + chunk);
      if (b >= e) break;
      const AgeEstimator* est = &estimator;
      if (!estimator.thread_safe()) {
        clones.push_back(estimator.clone());
        est = clones.back().get();
      }
      pool.emplace_back([&run_range, est, b, e] { run_range(*est, b, e); });
    }
    for (auto& t : pool) t.join();
  }

  RefinementResult result;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = groups.entries[i];
    if (outcomes[i].age) {
      result.manifest.entries.push_back({e.image_ref, *outcomes[i].age, e.source_group});
    } else {
      result.skipped.push_back({e.image_ref, outcomes[i].reason});
    }
  }
  return result;
}

AgeLabeledManifest sample_balanced(const AgeLabeledManifest& manifest, int per_group, long seed) {
  if (per_group < 0) throw ValidationError("sample_balanced: per_group must be >= 0");
  if (per_group == 0) return {};
  std::array<std::vector<std::size_t>, 6> by_group;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& g = manifest.entries[i].source_group;
    if (!g) throw ValidationError("sample_balanced: entry '" + manifest.entries[i].image_ref + "' has no source group");
    by_group[static_cast<std::size_t>(*g)].push_back(i);
  }
  for (AgeGroup g : kAllAgeGroups) {
    const auto count = by_group[static_cast<std::size_t>(g)].size();
    if (count < static_cast<std::size_t>(per_group))
      throw ValidationError("sample_balanced: group '" + std::string(to_string(g)) + "' has " +
                            std::to_string(count) + " entries, need " + std::to_string(per_group));
  }
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::vector<std::size_t> chosen;
  for (AgeGroup g : kAllAgeGroups) {
    auto pool = by_group[static_cast<std::size_t>(g)];
    // Partial Fisher-Yates over the group's indices.
    for (std::size_t k = 0; k < static_cast<std::size_t>(per_group); ++k) {
      const std::size_t j = k + uniform_index(rng, pool.size() - k);
      std::swap(pool[k], pool[j]);
      chosen.push_back(pool[k]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  AgeLabeledManifest out;
  for (std::size_t i : chosen) out.entries.push_back(manifest.entries[i]);
  return out;
}

AgeLabeledManifest label_with_group_ages(const AgeLabeledManifest& manifest, const PipelineConfig& config) {
  AgeLabeledManifest out = manifest;
  for (auto& e : out.entries) {
    if (!e.source_group)
      throw ValidationError("entry '" + e.image_ref + "' has no source group; cannot use group labels");
    e.age = config.group_age(*e.source_group);
  }
  return out;
}

}  // namespace ageshift
