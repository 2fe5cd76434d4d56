// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "ageshift/core/manifest.hpp"
#include "ageshift/error.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/fixtures/stubs.hpp"
#include "ageshift/regset/regset.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ageshift;

namespace {

class ThrowingEstimator : public AgeEstimator {
 public:
  std::string id() const override { return "throwing"; }
  int estimate(const Image& image) const override {
    if (image.mean() > 0.5) throw DomainError("no face");
    return 20;
  }
};

class OutOfRangeEstimator : public AgeEstimator {
 public:
  std::string id() const override { return "broken"; }
  int estimate(const Image&) const override { return 130; }
};

}  // namespace

TEST_CASE("612 entries with an 18-entry skip list give 594 relabelled entries") {
  MemoryImageStore images;
  const auto groups = synthetic_group_set(102, 11, images);
  REQUIRE(groups.size() == 612);
  std::set<std::string> skip;
  for (std::size_t i = 0; i < groups.size() && skip.size() < 18; i += 33) skip.insert(groups.entries[i].image_ref);
  REQUIRE(skip.size() == 18);

  MeanIntensityAgeEstimator est;
  const auto result = refine_regularization_set(groups, est, images, skip, 4);
  CHECK(result.manifest.size() == 594);
  CHECK(result.skipped.size() == 18);

  std::set<std::string> input_refs;
  for (const auto& e : groups.entries) input_refs.insert(e.image_ref);
  for (const auto& e : result.manifest.entries) {
    CHECK(input_refs.count(e.image_ref) == 1);
    CHECK(skip.count(e.image_ref) == 0);
    CHECK(age_in_range(e.age));
    CHECK(e.age == est.estimate(images.load(e.image_ref)));
    CHECK(e.source_group.has_value());
  }
  // The same run on one worker is identical.
  CHECK(refine_regularization_set(groups, est, images, skip, 1).manifest == result.manifest);
}

TEST_CASE("refinement edge cases") {
  MemoryImageStore images;
  const auto groups = synthetic_group_set(3, 2, images);
  SUBCASE("empty input") {
    CHECK(refine_regularization_set({}, MeanIntensityAgeEstimator{}, images).manifest.empty());
  }
  SUBCASE("constant estimator") {
    const auto r = refine_regularization_set(groups, ConstantAgeEstimator(30), images);
    CHECK(r.manifest.size() == groups.size());
    for (const auto& e : r.manifest.entries) CHECK(e.age == 30);
  }
  SUBCASE("estimator failures are routed to the skip report") {
    MemoryImageStore store;
    AgeLabeledManifest m;
    Image dark(4, 4), bright(4, 4);
    bright.pixels.setConstant(0.9);
    store.put("dark.png", dark);
    store.put("bright.png", bright);
    m.entries = {{"dark.png", 10, AgeGroup::child}, {"bright.png", 10, AgeGroup::child}};
    const auto r = refine_regularization_set(m, ThrowingEstimator{}, store);
    REQUIRE(r.manifest.size() == 1);
    REQUIRE(r.skipped.size() == 1);
    CHECK(r.skipped[0].image_ref == "bright.png");
    CHECK(r.skipped[0].reason.find("no face") != std::string::npos);

    const auto bad = refine_regularization_set(m, OutOfRangeEstimator{}, store);
    CHECK(bad.manifest.empty());
    CHECK(bad.skipped.size() == 2);
  }
  SUBCASE("missing source group is rejected") {
    AgeLabeledManifest m;
    m.entries = {{"x.png", 10, std::nullopt}};
    CHECK_THROWS_AS(refine_regularization_set(m, ConstantAgeEstimator(3), images), ValidationError);
  }
}

TEST_CASE("balanced sampling") {
  MemoryImageStore images;
  const auto pool = synthetic_group_set(102, 5, images);
  const auto all = sample_balanced(pool, 102, 1);
  CHECK(all.size() == 612);
  CHECK(sample_balanced(pool, 0, 1).empty());

  const auto a = sample_balanced(pool, 40, 9);
  const auto b = sample_balanced(pool, 40, 9);
  CHECK(format_manifest(a) == format_manifest(b));
  CHECK(format_manifest(a) != format_manifest(sample_balanced(pool, 40, 10)));
  std::map<AgeGroup, int> counts;
  std::set<std::string> seen;
  for (const auto& e : a.entries) {
    ++counts[*e.source_group];
    CHECK(seen.insert(e.image_ref).second);
  }
  for (AgeGroup g : kAllAgeGroups) CHECK(counts[g] == 40);

  try {
    sample_balanced(pool, 103, 1);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("102") != std::string::npos);
  }
}

TEST_CASE("group-age baseline labels") {
  MemoryImageStore images;
  const auto pool = synthetic_group_set(2, 5, images);
  PipelineConfig c;
  const auto m = label_with_group_ages(pool, c);
  for (const auto& e : m.entries) CHECK(e.age == c.group_age(*e.source_group));
}

TEST_CASE("skip list file") {
  const auto dir = testing::scratch_dir("skip");
  std::ofstream(dir / "skip.txt") << "a.png\n\nb.png\r\n";
  const auto s = load_skip_list(dir / "skip.txt");
  CHECK(s == std::set<std::string>{"a.png", "b.png"});
  CHECK_THROWS_AS(load_skip_list(dir / "missing.txt"), IoError);
}
