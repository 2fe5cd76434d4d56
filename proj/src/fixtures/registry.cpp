// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/fixtures/registry.hpp"

#include <charconv>

#include "ageshift/core/types.hpp"
#include "ageshift/error.hpp"
#include "ageshift/fixtures/stubs.hpp"
#include "ageshift/fixtures/tiny_backend.hpp"

namespace ageshift {

namespace {

// Splits "name:arg"; returns the integer argument or `fallback`.
long argument(const std::string& id, const std::string& name, long fallback) {
  if (id == name) return fallback;
  const std::string prefix = name + ":";
  const std::string rest = id.substr(prefix.size());
  long v = 0;
  auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
  if (ec != std::errc() || p != rest.data() + rest.size() || rest.empty())
    throw ConfigError("malformed backend id '" + id + "'");
  return v;
}

bool is(const std::string& id, const std::string& name) {
  return id == name || id.rfind(name + ":", 0) == 0;
}

}  // namespace

std::unique_ptr<DenoiserBackend> make_backend(const std::string& id) {
  if (is(id, "tiny")) {
    TinyOptions o;
    o.seed = argument(id, "tiny", 0);
    return std::make_unique<TinyBackend>(o);
  }
  throw ConfigError("unknown denoiser backend '" + id + "' (available: tiny[:seed])");
}

std::unique_ptr<AgeEstimator> make_estimator(const std::string& id) {
  if (id == "stub") return std::make_unique<MeanIntensityAgeEstimator>();
  if (is(id, "constant")) {
    const long age = argument(id, "constant", -1);
    if (!age_in_range(age)) throw ConfigError("constant estimator age must lie in [0, 100]");
    return std::make_unique<ConstantAgeEstimator>(static_cast<int>(age));
  }
  throw ConfigError("unknown age estimator '" + id + "' (available: stub, constant:<age>)");
}

std::unique_ptr<FaceEmbedder> make_embedder(const std::string& id) {
  if (is(id, "stub")) return std::make_unique<ProjectionFaceEmbedder>(argument(id, "stub", 0));
  throw ConfigError("unknown face embedder '" + id + "' (available: stub[:seed])");
}

std::unique_ptr<WordpieceTokenizer> make_tokenizer(const std::string& id) {
  if (id == "toy") return std::make_unique<WordpieceTokenizer>(WordpieceTokenizer::toy());
  return std::make_unique<WordpieceTokenizer>(WordpieceTokenizer::from_file(id));
}

}  // namespace ageshift
