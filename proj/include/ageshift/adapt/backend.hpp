// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ageshift/adapt/schedule.hpp"
#include "ageshift/tensor/autodiff.hpp"
#include "ageshift/tensor/image.hpp"

namespace ageshift {

// Identifies one attention layer of the denoiser.
struct AttentionSite {
  std::string layer;
  bool cross = false;
};

// Called with post-softmax attention probabilities (queries x keys) of every
// attention layer. Returning a matrix replaces the probabilities for the
// rest of the forward pass.
class AttentionHook {
 public:
  virtual ~AttentionHook() = default;
  virtual std::optional<Matrix> on_attention(const AttentionSite& site, const Matrix& probs) = 0;
};

struct LayerShape {
  std::string name;
  int in_features = 0;
  int out_features = 0;
  bool attention = false;
};

// One low-rank pair realising  delta_W = scale * A B  for a layer with
// weight d_in x d_out: A is d_in x r, B is r x d_out.
struct LoraPair {
  std::string layer;
  Parameter a;
  Parameter b;
};

struct AdapterWeights {
  int rank = 0;
  double scale = 1.0;
  std::vector<LoraPair> layers;

  // Trainable text embedding rows for the identity token's sub-word ids.
  std::string token;
  std::vector<int> token_ids;
  Parameter token_embedding;

  LoraPair* find(const std::string& layer);
  const LoraPair* find(const std::string& layer) const;
  std::vector<Parameter*> parameters();
};

// The frozen pretrained latent diffusion model, seen through the operations
// the pipeline needs. With no adapters attached (or zero-initialised ones)
// predict_noise is exactly the base model's prediction.
class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;

  virtual std::string id() const = 0;
  virtual int image_size() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  virtual Matrix encode_image(const Image& image) const = 0;
  virtual Image decode_latent(const Matrix& latent) const = 0;
  virtual ad::Var decode_latent(ad::Tape& tape, const ad::Var& latent) const = 0;

  virtual ad::Var text_embed(ad::Tape& tape, const std::string& prompt) = 0;
  virtual ad::Var predict_noise(ad::Tape& tape, const ad::Var& latent, int timestep, const ad::Var& context,
                                AttentionHook* hook = nullptr) = 0;

  Matrix text_embed(const std::string& prompt);
  Matrix predict_noise(const Matrix& latent, int timestep, const Matrix& context, AttentionHook* hook = nullptr);

  virtual std::vector<LayerShape> adaptable_layers() const = 0;
  virtual std::vector<int> token_ids(const std::string& word) const = 0;
  virtual Matrix token_embedding(const std::vector<int>& ids) const = 0;
  // Index of the first prompt token inside the context (after BOS).
  virtual int context_offset() const { return 1; }

  // The backend keeps a non-owning reference to `adapters`.
  virtual void attach(AdapterWeights& adapters) = 0;
  virtual void detach() = 0;
  virtual const AdapterWeights* attachment() const = 0;
  bool attached() const { return attachment() != nullptr; }
  // W <- W + scale * A B for every attached pair; the adapter path goes
  // inactive. Throws StateError if already merged.
  virtual void merge_attached() = 0;
  virtual bool merged() const = 0;

  // Denoiser weights updated by a full fine-tune.
  virtual std::vector<Parameter*> base_parameters() = 0;
  // Hash over every frozen weight: denoiser, text encoder, autoencoder.
  virtual std::string weights_hash() const = 0;
  // Deep copy of the weights, detached.
  virtual std::unique_ptr<DenoiserBackend> clone() const = 0;
};

// Face recognition features. embed() returns an L2-unit vector.
class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  virtual std::string id() const = 0;
  virtual Vector embed(const Image& image) const = 0;
  virtual bool differentiable() const { return false; }
  // Gradient of <grad, embed(image)> with respect to the image pixels.
  virtual Matrix embed_vjp(const Image& image, const Vector& grad) const;
};

}  // namespace ageshift
