// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// A desk-scale stand-in for a latent diffusion model.
//
//   image 16x16 RGB  --2x2 patches, fixed orthonormal projection-->  latent 64 x 4
//   denoiser: in_proj + position + time embedding, then per block
//             self-attention, cross-attention over the text context, tanh MLP
//             (all residual), then out_proj
//   text encoder: token + position embedding lookup, BOS/EOS, padded to 24
//
// Weights are drawn from a seeded generator; two instances with the same
// options are bitwise identical.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/fixtures/wordpiece.hpp"

namespace ageshift {

struct TinyOptions {
  long seed = 0;
  int hidden = 32;
  int text_dim = 32;
  int blocks = 2;
  int context_length = 24;
  // Standard deviation multipliers of the random initialisation.
  double input_gain = 0.03;
  double attention_gain = 1.0;
  double output_gain = 0.2;
};

class TinyBackend : public DenoiserBackend {
 public:
  static constexpr int kImageSize = 16;
  static constexpr int kLatentSide = 8;
  static constexpr int kLatentChannels = 4;
  static constexpr double kLatentScale = 2.0;

  explicit TinyBackend(TinyOptions options = {}, const WordpieceTokenizer* tokenizer = nullptr);

  std::string id() const override;
  int image_size() const override { return kImageSize; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  Matrix encode_image(const Image& image) const override;
  Image decode_latent(const Matrix& latent) const override;
  ad::Var decode_latent(ad::Tape& tape, const ad::Var& latent) const override;

  using DenoiserBackend::predict_noise;
  using DenoiserBackend::text_embed;
  ad::Var text_embed(ad::Tape& tape, const std::string& prompt) override;
  ad::Var predict_noise(ad::Tape& tape, const ad::Var& latent, int timestep, const ad::Var& context,
                        AttentionHook* hook = nullptr) override;

  std::vector<LayerShape> adaptable_layers() const override;
  std::vector<int> token_ids(const std::string& word) const override;
  Matrix token_embedding(const std::vector<int>& ids) const override;

  void attach(AdapterWeights& adapters) override;
  void detach() override;
  const AdapterWeights* attachment() const override { return attached_; }
  void merge_attached() override;
  bool merged() const override { return merged_; }

  std::vector<Parameter*> base_parameters() override;
  std::string weights_hash() const override;
  std::unique_ptr<DenoiserBackend> clone() const override;

  const TinyOptions& options() const { return options_; }
  const WordpieceTokenizer& tokenizer() const { return *tokenizer_; }
  // BOS, prompt ids, EOS, then PAD up to the context length (truncated).
  std::vector<int> context_ids(const std::string& prompt) const;
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;

 private:
  ad::Var linear(ad::Tape& tape, const ad::Var& x, const std::string& name);
  ad::Var attention(ad::Tape& tape, const ad::Var& x, const ad::Var& source, const std::string& prefix, bool cross,
                    AttentionHook* hook);
  Matrix time_features(int timestep) const;

  TinyOptions options_;
  const WordpieceTokenizer* tokenizer_;
  NoiseSchedule schedule_;
  std::map<std::string, Parameter> params_;
  std::vector<LayerShape> layers_;
  Matrix encoder_;       // 12 x 4, orthonormal columns
  Matrix latent_pos_;    // 64 x hidden
  AdapterWeights* attached_ = nullptr;
  bool merged_ = false;
};

}  // namespace ageshift
