// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/core/types.hpp"

#include <algorithm>
#include <cctype>

#include "ageshift/error.hpp"

namespace ageshift {

std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

Gender parse_gender(std::string_view s) {
  if (s == "male" || s == "m") return Gender::male;
  if (s == "female" || s == "f") return Gender::female;
  throw ValidationError("unknown gender '" + std::string(s) + "' (expected male or female)");
}

std::string_view to_string(AgeGroup g) {
  switch (g) {
    case AgeGroup::child: return "child";
    case AgeGroup::teenager: return "teenager";
    case AgeGroup::young_adults: return "young adults";
    case AgeGroup::middle_aged: return "middle-aged";
    case AgeGroup::elderly: return "elderly";
    case AgeGroup::old: return "old";
  }
  return "";
}

std::optional<AgeGroup> parse_age_group(std::string_view s) {
  for (AgeGroup g : kAllAgeGroups)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

const std::vector<std::string>& prompt_vocabulary() {
  static const std::vector<std::string> words{"photo", "of",   "a",     "as",    "person", "man",
                                              "woman", "boy",  "girl",  "baby",  "elderly", "year",
                                              "old",   "year-old"};
  return words;
}

std::vector<Violation> validate_profile(const IdentityProfile& profile, std::size_t max_references,
                                        const std::function<bool(std::string_view)>& is_vocabulary_word) {
  std::vector<Violation> out;
  if (profile.references.empty()) {
    out.push_back({ViolationKind::missing_references, "profile has no self-reference images"});
  } else if (profile.references.size() > max_references) {
    out.push_back({ViolationKind::too_many_references,
                   "profile has " + std::to_string(profile.references.size()) +
                       " self-reference images, maximum is " + std::to_string(max_references)});
  }
  for (const auto& ref : profile.references) {
    if (!age_in_range(ref.age))
      out.push_back({ViolationKind::age_out_of_range,
                     "reference '" + ref.image_ref + "' has age " + std::to_string(ref.age) + " outside [0, 100]"});
  }
  if (profile.token.empty()) {
    out.push_back({ViolationKind::empty_token, "identity token is empty"});
  } else {
    if (std::any_of(profile.token.begin(), profile.token.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; }))
      out.push_back({ViolationKind::token_has_whitespace, "identity token contains whitespace"});
    const bool in_vocab =
        is_vocabulary_word
            ? is_vocabulary_word(profile.token)
            : std::find(prompt_vocabulary().begin(), prompt_vocabulary().end(), profile.token) !=
                  prompt_vocabulary().end();
    if (in_vocab)
      out.push_back({ViolationKind::token_is_vocabulary_word,
                     "identity token '" + profile.token + "' is a prompt vocabulary word"});
  }
  return out;
}

void validate_edit_request(const EditRequest& request) {
  if (!age_in_range(request.alpha_tar))
    throw ValidationError("target age " + std::to_string(request.alpha_tar) + " outside [0, 100]");
  if (request.alpha_in && !age_in_range(*request.alpha_in))
    throw ValidationError("input age " + std::to_string(*request.alpha_in) + " outside [0, 100]");
}

}  // namespace ageshift
