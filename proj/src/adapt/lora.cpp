// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/lora.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ageshift/error.hpp"
#include "ageshift/util/hash.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

LoraPair* AdapterWeights::find(const std::string& layer) {
  for (auto& p : layers)
    if (p.layer == layer) return &p;
  return nullptr;
}

const LoraPair* AdapterWeights::find(const std::string& layer) const {
  for (const auto& p : layers)
    if (p.layer == layer) return &p;
  return nullptr;
}

std::vector<Parameter*> AdapterWeights::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : layers) {
    out.push_back(&p.a);
    out.push_back(&p.b);
  }
  if (token_embedding.value.size() > 0) out.push_back(&token_embedding);
  return out;
}

Matrix DenoiserBackend::text_embed(const std::string& prompt) {
  ad::Tape tape;
  return text_embed(tape, prompt).value();
}

Matrix DenoiserBackend::predict_noise(const Matrix& latent, int timestep, const Matrix& context,
                                      AttentionHook* hook) {
  ad::Tape tape;
  return predict_noise(tape, tape.constant(latent), timestep, tape.constant(context), hook).value();
}

Matrix FaceEmbedder::embed_vjp(const Image&, const Vector&) const {
  throw StateError("face embedder '" + id() + "' does not provide gradients");
}

bool attention_projections(const LayerShape& layer) { return layer.attention; }

AdapterWeights init_adapters(const DenoiserBackend& backend, const AdapterOptions& options) {
  if (options.rank < 1) throw ConfigError("LoRA rank must be >= 1");
  AdapterWeights w;
  w.rank = options.rank;
  w.scale = options.scale;
  // Seed per layer from its name so adding targets does not reshuffle others.
  for (const auto& layer : backend.adaptable_layers()) {
    if (options.targets && !options.targets(layer)) continue;
    const int dmin = std::min(layer.in_features, layer.out_features);
    if (options.rank >= dmin)
      throw ConfigError("LoRA rank " + std::to_string(options.rank) + " must be < " + std::to_string(dmin) +
                        " (smallest dimension of layer '" + layer.name + "')");
    const std::string digest = sha256_hex(layer.name);
    std::mt19937_64 rng(static_cast<std::uint64_t>(options.seed) ^ std::stoull(digest.substr(0, 15), nullptr, 16));
    LoraPair pair;
    pair.layer = layer.name;
    pair.a.name = layer.name + ".A";
    pair.a.value.resize(layer.in_features, options.rank);
    const double sd = 1.0 / std::sqrt(static_cast<double>(layer.in_features));
    for (Eigen::Index i = 0; i < pair.a.value.size(); ++i) pair.a.value.data()[i] = sd * standard_normal(rng);
    pair.b.name = layer.name + ".B";
    pair.b.value = Matrix::Zero(options.rank, layer.out_features);
    w.layers.push_back(std::move(pair));
  }
  if (!options.token.empty()) {
    w.token = options.token;
    w.token_ids = backend.token_ids(options.token);
    w.token_embedding.name = "token_embedding";
    w.token_embedding.value = backend.token_embedding(w.token_ids);
  }
  return w;
}

void merge(AdapterWeights& adapters, DenoiserBackend& backend) {
  if (backend.merged()) throw StateError("merge: backend already merged; detach before merging again");
  if (backend.attached() && backend.attachment() != &adapters)
    throw StateError("merge: a different adapter set is attached");
  const auto layers = backend.adaptable_layers();
  for (const auto& pair : adapters.layers) {
    auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerShape& l) { return l.name == pair.layer; });
    if (it == layers.end()) throw ShapeError("merge: backend has no layer '" + pair.layer + "'");
    if (pair.a.value.rows() != it->in_features || pair.b.value.cols() != it->out_features ||
        pair.a.value.cols() != pair.b.value.rows())
      throw ShapeError("merge: adapter shapes do not match layer '" + pair.layer + "'");
  }
  if (!backend.attached()) backend.attach(adapters);
  backend.merge_attached();
}

}  // namespace ageshift
