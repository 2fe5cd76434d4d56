// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/core/manifest.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

AgeLabeledManifest parse_manifest(std::istream& in, const std::string& source) {
  AgeLabeledManifest manifest;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError(where + ": expected path<TAB>age<TAB>group?, got " + std::to_string(fields.size()) + " fields",
                       line_no);
    ManifestEntry e;
    e.image_ref = fields[0];
    if (e.image_ref.empty()) throw ParseError(where + ": empty image path", line_no);
    long age = 0;
    const std::string& a = fields[1];
    auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), age);
    if (ec != std::errc() || ptr != a.data() + a.size() || a.empty())
      throw ParseError(where + ": age '" + a + "' is not an integer", line_no);
    if (!age_in_range(age))
      throw ValidationError(where + ": age " + std::to_string(age) + " outside [0, 100]");
    e.age = static_cast<int>(age);
    if (fields.size() == 3 && !fields[2].empty()) {
      e.source_group = parse_age_group(fields[2]);
      if (!e.source_group) throw ParseError(where + ": unknown age group '" + fields[2] + "'", line_no);
    }
    if (!seen.insert(e.image_ref).second)
      throw ValidationError(where + ": duplicate image reference '" + e.image_ref + "'");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

AgeLabeledManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in, path.string());
}

std::string format_manifest(const AgeLabeledManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    out += e.image_ref;
    out += '\t';
    out += std::to_string(e.age);
    out += '\t';
    if (e.source_group) out += to_string(*e.source_group);
    out += '\n';
  }
  return out;
}

void save_manifest(const std::filesystem::path& path, const AgeLabeledManifest& manifest) {
  validate_manifest(manifest);
  write_file(path, format_manifest(manifest));
}

void validate_manifest(const AgeLabeledManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (!age_in_range(e.age))
      throw ValidationError("manifest entry '" + e.image_ref + "' has age " + std::to_string(e.age) +
                            " outside [0, 100]");
    if (e.image_ref.empty() || e.image_ref.find_first_of("\t\n") != std::string::npos)
      throw ValidationError("manifest entry has an empty image reference or one containing tab/newline");
    if (!seen.insert(e.image_ref).second)
      throw ValidationError("duplicate image reference '" + e.image_ref + "'");
  }
}

IdentityProfile parse_profile(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("profile: ") + e.what(), 0);
  }
  IdentityProfile p;
  try {
    p.token = j.value("token", std::string("sks"));
    p.gender = parse_gender(j.at("gender").get<std::string>());
    for (const auto& r : j.at("references")) {
      const long age = r.at("age").get<long>();
      p.references.push_back({r.at("image").get<std::string>(), static_cast<int>(age)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what(), 0);
  }
  return p;
}

IdentityProfile load_profile(const std::filesystem::path& path) { return parse_profile(read_file(path)); }

std::string format_profile(const IdentityProfile& profile) {
  nlohmann::ordered_json j;
  j["token"] = profile.token;
  j["gender"] = std::string(to_string(profile.gender));
  j["references"] = nlohmann::ordered_json::array();
  for (const auto& r : profile.references) j["references"].push_back({{"image", r.image_ref}, {"age", r.age}});
  return j.dump(2) + "\n";
}

void save_profile(const std::filesystem::path& path, const IdentityProfile& profile) {
  write_file(path, format_profile(profile));
}

}  // namespace ageshift
