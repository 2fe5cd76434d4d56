// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ageshift {

inline constexpr int kMinAge = 0;
inline constexpr int kMaxAge = 100;

constexpr bool age_in_range(long age) { return age >= kMinAge && age <= kMaxAge; }

enum class Gender { male, female };

std::string_view to_string(Gender g);
Gender parse_gender(std::string_view s);

// The six coarse labels of the group-annotated face dataset.
enum class AgeGroup { child, teenager, young_adults, middle_aged, elderly, old };

inline constexpr std::array<AgeGroup, 6> kAllAgeGroups{AgeGroup::child,       AgeGroup::teenager,
                                                       AgeGroup::young_adults, AgeGroup::middle_aged,
                                                       AgeGroup::elderly,     AgeGroup::old};

// "young adults", "middle-aged", ... as written in manifests.
std::string_view to_string(AgeGroup g);
std::optional<AgeGroup> parse_age_group(std::string_view s);

struct ReferenceImage {
  std::string image_ref;
  int age = 0;

  bool operator==(const ReferenceImage&) const = default;
};

struct IdentityProfile {
  std::string token;
  Gender gender = Gender::male;
  std::vector<ReferenceImage> references;

  bool operator==(const IdentityProfile&) const = default;
};

struct ManifestEntry {
  std::string image_ref;
  int age = 0;
  std::optional<AgeGroup> source_group;

  bool operator==(const ManifestEntry&) const = default;
};

struct AgeLabeledManifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const AgeLabeledManifest&) const = default;
};

struct EditRequest {
  std::string input_image;
  std::optional<int> alpha_in;
  int alpha_tar = 0;
  long seed = 0;
};

enum class ViolationKind {
  missing_references,
  too_many_references,
  age_out_of_range,
  empty_token,
  token_has_whitespace,
  token_is_vocabulary_word,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

// Words the prompt grammar itself uses; an identity token must not be one.
const std::vector<std::string>& prompt_vocabulary();

// Returns every broken IdentityProfile invariant; empty when the profile is
// valid. `is_vocabulary_word` defaults to membership in prompt_vocabulary().
std::vector<Violation> validate_profile(
    const IdentityProfile& profile, std::size_t max_references = 5,
    const std::function<bool(std::string_view)>& is_vocabulary_word = {});

// Throws ValidationError on the first broken invariant.
void validate_edit_request(const EditRequest& request);

}  // namespace ageshift
