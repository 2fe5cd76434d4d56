// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Line-delimited manifests (`path<TAB>age<TAB>group?`) and JSON identity
// profiles.

#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "ageshift/core/types.hpp"

namespace ageshift {

// Blank lines and lines starting with '#' are skipped. Throws ParseError
// (with line number) for malformed records and ValidationError for ages
// outside [0, 100] or duplicate image references.
AgeLabeledManifest parse_manifest(std::istream& in, const std::string& source = "<stream>");
AgeLabeledManifest load_manifest(const std::filesystem::path& path);

std::string format_manifest(const AgeLabeledManifest& manifest);
void save_manifest(const std::filesystem::path& path, const AgeLabeledManifest& manifest);

// Throws ValidationError if ages or uniqueness are violated.
void validate_manifest(const AgeLabeledManifest& manifest);

// {"token": "sks", "gender": "male", "references": [{"image": "a.png", "age": 25}]}
IdentityProfile parse_profile(const std::string& json_text);
IdentityProfile load_profile(const std::filesystem::path& path);
std::string format_profile(const IdentityProfile& profile);
void save_profile(const std::filesystem::path& path, const IdentityProfile& profile);

}  // namespace ageshift
