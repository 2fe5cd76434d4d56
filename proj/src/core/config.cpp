// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/core/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "ageshift/error.hpp"
#include "ageshift/util/hash.hpp"

namespace ageshift {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

long parse_long(std::string_view key, std::string_view v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("config key '" + std::string(key) + "': '" + s + "' is not a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

template <typename T>
Field int_field(std::string key, T PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return std::to_string(c.*m); },
          [m, key](PipelineConfig& c, std::string_view v) { c.*m = static_cast<T>(parse_long(key, v)); }};
}

Field double_field(std::string key, double PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return fmt_double(c.*m); },
          [m, key](PipelineConfig& c, std::string_view v) { c.*m = parse_double(key, v); }};
}

Field bool_field(std::string key, bool PipelineConfig::*m) {
  return {key, [m](const PipelineConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m, key](PipelineConfig& c, std::string_view v) { c.*m = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("iterations", &PipelineConfig::iterations));
    f.push_back(int_field("batch_size", &PipelineConfig::batch_size));
    f.push_back(double_field("learning_rate", &PipelineConfig::learning_rate));
    f.push_back(int_field("lora_rank", &PipelineConfig::lora_rank));
    f.push_back(double_field("lora_scale", &PipelineConfig::lora_scale));
    f.push_back(int_field("image_size", &PipelineConfig::image_size));
    f.push_back(int_field("diffusion_steps", &PipelineConfig::diffusion_steps));
    f.push_back(double_field("guidance_scale", &PipelineConfig::guidance_scale));
    f.push_back(bool_field("use_lora", &PipelineConfig::use_lora));
    f.push_back(bool_field("use_refined_regset", &PipelineConfig::use_refined_regset));
    f.push_back(bool_field("use_hyphenated_age", &PipelineConfig::use_hyphenated_age));
    f.push_back(bool_field("use_ref_age", &PipelineConfig::use_ref_age));
    f.push_back(bool_field("use_extreme_nouns", &PipelineConfig::use_extreme_nouns));
    f.push_back(double_field("lambda_reg", &PipelineConfig::lambda_reg));
    f.push_back(double_field("lambda_id", &PipelineConfig::lambda_id));
    f.push_back(double_field("temperature", &PipelineConfig::temperature));
    f.push_back(double_field("weight_decay", &PipelineConfig::weight_decay));
    f.push_back(int_field("inner_steps", &PipelineConfig::inner_steps));
    f.push_back(double_field("inner_lr", &PipelineConfig::inner_lr));
    f.push_back(double_field("early_stop_loss", &PipelineConfig::early_stop_loss));
    f.push_back(double_field("cross_replace_fraction", &PipelineConfig::cross_replace_fraction));
    f.push_back(double_field("self_replace_fraction", &PipelineConfig::self_replace_fraction));
    f.push_back(bool_field("self_attention_injection", &PipelineConfig::self_attention_injection));
    f.push_back(int_field("max_references", &PipelineConfig::max_references));
    f.push_back({"token", [](const PipelineConfig& c) { return c.token; },
                 [](PipelineConfig& c, std::string_view v) { c.token = std::string(v); }});
    f.push_back(int_field("seed", &PipelineConfig::seed));
    for (AgeGroup g : kAllAgeGroups) {
      std::string name(to_string(g));
      std::replace(name.begin(), name.end(), ' ', '_');
      std::replace(name.begin(), name.end(), '-', '_');
      const auto idx = static_cast<std::size_t>(g);
      const std::string key = "group_age." + name;
      f.push_back({key, [idx](const PipelineConfig& c) { return std::to_string(c.group_ages[idx]); },
                   [idx, key](PipelineConfig& c, std::string_view v) {
                     c.group_ages[idx] = static_cast<int>(parse_long(key, v));
                   }});
    }
    return f;
  }();
  return table;
}

}  // namespace

void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (c.iterations <= 0) fail("iterations must be > 0");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.lora_rank < 1) fail("lora_rank must be >= 1");
  if (c.diffusion_steps < 1) fail("diffusion_steps must be >= 1");
  if (c.image_size < 1) fail("image_size must be >= 1");
  if (!(c.learning_rate > 0)) fail("learning_rate must be > 0");
  if (!(c.temperature > 0)) fail("temperature must be > 0");
  if (c.inner_steps < 0) fail("inner_steps must be >= 0");
  if (c.cross_replace_fraction < 0 || c.cross_replace_fraction > 1) fail("cross_replace_fraction must lie in [0, 1]");
  if (c.self_replace_fraction < 0 || c.self_replace_fraction > 1) fail("self_replace_fraction must lie in [0, 1]");
  if (c.max_references < 1) fail("max_references must be >= 1");
  if (c.token.empty() || std::any_of(c.token.begin(), c.token.end(), [](unsigned char ch) { return std::isspace(ch); }))
    fail("token must be non-empty and contain no whitespace");
  for (int a : c.group_ages)
    if (!age_in_range(a)) fail("group ages must lie in [0, 100]");
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(base, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  validate_config(base);
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const PipelineConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_config(config);
}

PipelineConfig apply_env_overrides(PipelineConfig config, std::string_view prefix) {
  for (const auto& f : fields()) {
    std::string env(prefix);
    for (char ch : f.key) env.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (const char* v = std::getenv(env.c_str())) f.set(config, trim(v));
  }
  validate_config(config);
  return config;
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(format_config(config)); }

const std::array<std::string_view, 5>& ablation_flags() {
  static constexpr std::array<std::string_view, 5> flags{"use_lora", "use_refined_regset", "use_hyphenated_age",
                                                         "use_ref_age", "use_extreme_nouns"};
  return flags;
}

bool get_flag(const PipelineConfig& c, std::string_view flag) {
  if (flag == "use_lora") return c.use_lora;
  if (flag == "use_refined_regset") return c.use_refined_regset;
  if (flag == "use_hyphenated_age") return c.use_hyphenated_age;
  if (flag == "use_ref_age") return c.use_ref_age;
  if (flag == "use_extreme_nouns") return c.use_extreme_nouns;
  throw ConfigError("unknown ablation flag '" + std::string(flag) + "'");
}

void set_flag(PipelineConfig& c, std::string_view flag, bool value) {
  if (flag == "use_lora") c.use_lora = value;
  else if (flag == "use_refined_regset") c.use_refined_regset = value;
  else if (flag == "use_hyphenated_age") c.use_hyphenated_age = value;
  else if (flag == "use_ref_age") c.use_ref_age = value;
  else if (flag == "use_extreme_nouns") c.use_extreme_nouns = value;
  else throw ConfigError("unknown ablation flag '" + std::string(flag) + "'");
}

}  // namespace ageshift
