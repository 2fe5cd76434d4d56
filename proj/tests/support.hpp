// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers and reference implementations shared by the test binaries.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ageshift/promptkit/tokenizer.hpp"
#include "ageshift/tensor/autodiff.hpp"

namespace ageshift::testing {

inline std::filesystem::path source_dir() { return AGESHIFT_SOURCE_DIR; }

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ageshift_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Characters that a replacement span must cover, found by pattern matching
// the prompt: the person noun and either the whole "<a>-year-old" phrase or
// only the digits of "<a> year old".
inline std::set<std::size_t> expected_span_chars(const std::string& prompt, bool hyphenated) {
  static const std::regex hyph(R"(^photo of (\S+) (\S+) as (\d+-year-old)$)");
  static const std::regex plain(R"(^photo of (\S+) (\S+) as (\d+) year old$)");
  std::smatch m;
  std::set<std::size_t> out;
  if (!std::regex_match(prompt, m, hyphenated ? hyph : plain)) return out;
  for (int g : {2, 3}) {
    const auto b = static_cast<std::size_t>(m.position(g));
    for (std::size_t c = b; c < b + static_cast<std::size_t>(m.length(g)); ++c) out.insert(c);
  }
  return out;
}

// Brute force: every token whose character range touches an expected
// character, in token order.
inline std::vector<int> oracle_spans(const std::string& prompt, bool hyphenated, const TokenizerAdapter& tok) {
  const auto chars = expected_span_chars(prompt, hyphenated);
  const auto offs = tok.offsets(prompt);
  std::vector<int> out;
  for (std::size_t t = 0; t < offs.size(); ++t) {
    for (std::size_t c = offs[t].begin; c < offs[t].end; ++c) {
      if (chars.count(c)) {
        out.push_back(static_cast<int>(t));
        break;
      }
    }
  }
  return out;
}

// Loop-based NT-Xent with cosine similarity, independent of the tape code.
inline double reference_ntxent(const Matrix& z, const std::vector<std::pair<int, int>>& pairs, double tau) {
  if (pairs.empty()) return 0.0;
  const Eigen::Index n = z.rows();
  auto cos = [&](Eigen::Index i, Eigen::Index j) {
    double dot = 0, ni = 0, nj = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      dot += z(i, c) * z(j, c);
      ni += z(i, c) * z(i, c);
      nj += z(j, c) * z(j, c);
    }
    return dot / std::sqrt(ni * nj);
  };
  double total = 0;
  for (auto [i, j] : pairs) {
    double denom = 0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) denom += std::exp(cos(i, k) / tau);
    total += -std::log(std::exp(cos(i, j) / tau) / denom);
  }
  return total / static_cast<double>(pairs.size());
}

inline double max_relative_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-12);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace ageshift::testing
