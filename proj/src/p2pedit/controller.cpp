// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/p2pedit/controller.hpp"

#include <cmath>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

int leading_steps(double fraction, int total) {
  return static_cast<int>(std::floor(fraction * total + 1e-9));
}

}  // namespace

AttentionController::AttentionController(const PromptBundle& bundle, ControllerOptions options, int context_offset)
    : spans_in_(bundle.replace_spans_in),
      spans_tar_(bundle.replace_spans_tar),
      alignment_(bundle.alignment),
      options_(options),
      offset_(context_offset) {
  for (const auto& a : alignment_)
    if (a.source < 0 || a.target < 0) throw SpanResolutionError("attention controller: negative span index");
}

void AttentionController::reset(int total_steps) {
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(options_.cross_replace_fraction) || !in_unit(options_.self_replace_fraction))
    throw ConfigError("attention controller: replacement fractions must lie in [0, 1]");
  cross_steps_ = leading_steps(options_.cross_replace_fraction, total_steps);
  self_steps_ = options_.self_attention_injection ? leading_steps(options_.self_replace_fraction, total_steps) : 0;
  step_ = 0;
  source_maps_.clear();
  events_.clear();
  maps_.clear();
}

void AttentionController::begin_step(int step) {
  step_ = step;
  source_maps_.clear();
}

std::optional<Matrix> AttentionController::SourceHook::on_attention(const AttentionSite& site, const Matrix& probs) {
  const bool needed = site.cross ? c_.step_ < c_.cross_steps_ : c_.step_ < c_.self_steps_;
  if (needed) c_.source_maps_[site.layer] = probs;
  return std::nullopt;
}

std::optional<Matrix> AttentionController::TargetHook::on_attention(const AttentionSite& site, const Matrix& probs) {
  const bool active = site.cross ? c_.step_ < c_.cross_steps_ : c_.step_ < c_.self_steps_;
  if (!active) return std::nullopt;
  auto it = c_.source_maps_.find(site.layer);
  if (it == c_.source_maps_.end())
    throw StateError("attention controller: no source map for " + site.layer + " at step " + std::to_string(c_.step_));
  const Matrix& src = it->second;
  if (src.rows() != probs.rows() || src.cols() != probs.cols())
    throw ShapeError("attention controller: source and target maps differ in shape at " + site.layer);

  ReplacementEvent ev{c_.step_, site.layer, site.cross, {}};
  if (!site.cross) {
    c_.events_.push_back(std::move(ev));
    return src;
  }
  Matrix out = probs;
  for (const auto& a : c_.alignment_) {
    const int tc = a.target + c_.offset_;
    const int sc = a.source + c_.offset_;
    if (tc >= out.cols() || sc >= src.cols())
      throw SpanResolutionError("attention controller: span position outside the context at " + site.layer);
    out.col(tc) = src.col(sc);
    ev.columns.push_back(tc);
  }
  if (c_.options_.record_maps) c_.maps_.push_back({c_.step_, site.layer, probs, out});
  c_.events_.push_back(std::move(ev));
  return out;
}

}  // namespace ageshift
