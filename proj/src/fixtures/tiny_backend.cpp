// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/fixtures/tiny_backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ageshift/error.hpp"
#include "ageshift/util/hash.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

namespace {

constexpr int kPatch = 2;
constexpr int kPatchFeatures = kPatch * kPatch * 3;
constexpr int kTimeFeatures = 32;

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * standard_normal(rng);
  return m;
}

// Image pixels (H*W x 3) -> patch rows (64 x 12).
Matrix patchify(const Matrix& pixels) {
  const int side = TinyBackend::kLatentSide;
  Matrix out(side * side, kPatchFeatures);
  for (int py = 0; py < side; ++py)
    for (int px = 0; px < side; ++px)
      for (int dy = 0; dy < kPatch; ++dy)
        for (int dx = 0; dx < kPatch; ++dx)
          for (int c = 0; c < 3; ++c)
            out(py * side + px, (dy * kPatch + dx) * 3 + c) =
                pixels((py * kPatch + dy) * TinyBackend::kImageSize + px * kPatch + dx, c);
  return out;
}

Matrix unpatchify(const Matrix& patches) {
  const int side = TinyBackend::kLatentSide;
  Matrix out(TinyBackend::kImageSize * TinyBackend::kImageSize, 3);
  for (int py = 0; py < side; ++py)
    for (int px = 0; px < side; ++px)
      for (int dy = 0; dy < kPatch; ++dy)
        for (int dx = 0; dx < kPatch; ++dx)
          for (int c = 0; c < 3; ++c)
            out((py * kPatch + dy) * TinyBackend::kImageSize + px * kPatch + dx, c) =
                patches(py * side + px, (dy * kPatch + dx) * 3 + c);
  return out;
}

}  // namespace

TinyBackend::TinyBackend(TinyOptions options, const WordpieceTokenizer* tokenizer)
    : options_(options),
      tokenizer_(tokenizer ? tokenizer : &WordpieceTokenizer::toy()),
      schedule_(NoiseSchedule::scaled_linear()) {
  if (options_.hidden < 2 || options_.text_dim < 2 || options_.blocks < 1 || options_.context_length < 3)
    throw ConfigError("tiny backend: invalid options");
  std::mt19937_64 rng(static_cast<std::uint64_t>(options_.seed) * 0x9E3779B97F4A7C15ull + 0x5EEDull);
  const int d = options_.hidden;
  const int de = options_.text_dim;
  const int n = kLatentSide * kLatentSide;

  // Autoencoder: first column is the normalised all-ones direction so mean
  // brightness survives the round trip.
  Matrix basis = gaussian(rng, kPatchFeatures, kLatentChannels, 1.0);
  basis.col(0).setOnes();
  Eigen::HouseholderQR<Matrix> qr(basis);
  encoder_ = qr.householderQ() * Matrix::Identity(kPatchFeatures, kLatentChannels);
  for (int c = 0; c < kLatentChannels; ++c)
    if (encoder_.col(c).sum() < 0.0 || (c > 0 && encoder_(0, c) < 0.0)) encoder_.col(c) *= -1.0;

  auto put = [&](const std::string& name, Matrix value) { params_[name] = Parameter{name, std::move(value), false}; };

  put("text.token_embedding", gaussian(rng, tokenizer_->vocab_size(), de, 1.0));
  put("text.position_embedding", gaussian(rng, options_.context_length, de, 0.2));
  latent_pos_ = gaussian(rng, n, d, 0.3);

  auto lin = [&](const std::string& name, int in, int out, double gain, bool bias, bool attention) {
    put(name + ".weight", gaussian(rng, in, out, gain / std::sqrt(static_cast<double>(in))));
    if (bias) put(name + ".bias", gaussian(rng, 1, out, 0.02));
    layers_.push_back({name, in, out, attention});
  };
  lin("in_proj", kLatentChannels, d, options_.input_gain, true, false);
  lin("time_proj", kTimeFeatures, d, 1.0, true, false);
  for (int b = 0; b < options_.blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    lin(p + "attn1.to_q", d, d, options_.attention_gain, false, true);
    lin(p + "attn1.to_k", d, d, options_.attention_gain, false, true);
    lin(p + "attn1.to_v", d, d, 1.0, false, true);
    lin(p + "attn1.to_out", d, d, 0.5, true, true);
    lin(p + "attn2.to_q", d, d, options_.attention_gain, false, true);
    lin(p + "attn2.to_k", de, d, options_.attention_gain, false, true);
    lin(p + "attn2.to_v", de, d, 1.0, false, true);
    lin(p + "attn2.to_out", d, d, 0.5, true, true);
    lin(p + "ff.in", d, 2 * d, 1.0, true, false);
    lin(p + "ff.out", 2 * d, d, 0.5, true, false);
  }
  lin("out_proj", d, kLatentChannels, options_.output_gain, true, false);
}

std::string TinyBackend::id() const { return "tiny:" + std::to_string(options_.seed); }

Parameter& TinyBackend::parameter(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("tiny backend has no parameter '" + name + "'");
  return it->second;
}

const Parameter& TinyBackend::parameter(const std::string& name) const {
  return const_cast<TinyBackend*>(this)->parameter(name);
}

Matrix TinyBackend::encode_image(const Image& image) const {
  if (image.width != kImageSize || image.height != kImageSize || image.pixels.cols() != 3)
    throw ShapeError("tiny backend expects a " + std::to_string(kImageSize) + "x" + std::to_string(kImageSize) +
                     " RGB image, got " + std::to_string(image.width) + "x" + std::to_string(image.height));
  const Matrix centred = patchify(image.pixels).array() - 0.5;
  return kLatentScale * (centred * encoder_);
}

Image TinyBackend::decode_latent(const Matrix& latent) const {
  if (latent.rows() != kLatentSide * kLatentSide || latent.cols() != kLatentChannels)
    throw ShapeError("tiny backend: latent must be 64 x 4");
  Image img(kImageSize, kImageSize);
  const Matrix patches = (latent * encoder_.transpose() / kLatentScale).array() + 0.5;
  img.pixels = unpatchify(patches);
  return img;
}

ad::Var TinyBackend::decode_latent(ad::Tape& tape, const ad::Var& latent) const {
  if (latent.rows() != kLatentSide * kLatentSide || latent.cols() != kLatentChannels)
    throw ShapeError("tiny backend: latent must be 64 x 4");
  ad::Var patches = ad::matmul(latent, tape.constant(encoder_.transpose() / kLatentScale));
  patches = ad::add_row(patches, tape.constant(Matrix::Constant(1, kPatchFeatures, 0.5)));
  return ad::custom(patches, unpatchify(patches.value()), [](const Matrix& g) { return patchify(g); });
}

std::vector<int> TinyBackend::context_ids(const std::string& prompt) const {
  const int len = options_.context_length;
  std::vector<int> ids{WordpieceTokenizer::kBos};
  for (int id : tokenizer_->encode(prompt)) {
    if (static_cast<int>(ids.size()) >= len - 1) break;
    ids.push_back(id);
  }
  ids.push_back(WordpieceTokenizer::kEos);
  ids.resize(static_cast<std::size_t>(len), WordpieceTokenizer::kPad);
  return ids;
}

ad::Var TinyBackend::text_embed(ad::Tape& tape, const std::string& prompt) {
  const std::vector<int> ids = context_ids(prompt);
  const Matrix& table = parameter("text.token_embedding").value;
  const Matrix& pos = parameter("text.position_embedding").value;
  const Eigen::Index len = options_.context_length;
  Matrix base(len, options_.text_dim);
  for (Eigen::Index l = 0; l < len; ++l) base.row(l) = table.row(ids[static_cast<std::size_t>(l)]) + pos.row(l);

  std::vector<int> positions, rows;
  if (attached_ && !attached_->token_ids.empty() &&
      attached_->token_embedding.value.rows() == static_cast<Eigen::Index>(attached_->token_ids.size())) {
    const auto& tok = attached_->token_ids;
    const std::size_t k = tok.size();
    for (std::size_t l = 0; l + k <= ids.size(); ++l) {
      if (!std::equal(tok.begin(), tok.end(), ids.begin() + static_cast<long>(l))) continue;
      // A longer word sharing the prefix is not the token.
      if (l + k < ids.size() && tokenizer_->is_continuation(ids[l + k])) continue;
      for (std::size_t j = 0; j < k; ++j) {
        positions.push_back(static_cast<int>(l + j));
        rows.push_back(static_cast<int>(j));
        base.row(static_cast<Eigen::Index>(l + j)) = pos.row(static_cast<Eigen::Index>(l + j));
      }
      l += k - 1;
    }
  }
  ad::Var ctx = tape.constant(std::move(base));
  if (!positions.empty()) {
    ad::Var learned = ad::select_rows(tape.parameter(attached_->token_embedding), rows);
    ctx = ad::add(ctx, ad::place_rows(learned, positions, len));
  }
  return ctx;
}

Matrix TinyBackend::time_features(int timestep) const {
  Matrix f(1, kTimeFeatures);
  const int half = kTimeFeatures / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    f(0, k) = std::sin(timestep * freq);
    f(0, half + k) = std::cos(timestep * freq);
  }
  return f;
}

ad::Var TinyBackend::linear(ad::Tape& tape, const ad::Var& x, const std::string& name) {
  ad::Var y = ad::matmul(x, tape.parameter(parameter(name + ".weight")));
  if (auto it = params_.find(name + ".bias"); it != params_.end()) y = ad::add_row(y, tape.parameter(it->second));
  if (attached_ && !merged_)
    if (LoraPair* pair = attached_->find(name)) {
      ad::Var delta = ad::matmul(ad::matmul(x, tape.parameter(pair->a)), tape.parameter(pair->b));
      y = ad::add(y, ad::scale(delta, attached_->scale));
    }
  return y;
}

ad::Var TinyBackend::attention(ad::Tape& tape, const ad::Var& x, const ad::Var& source, const std::string& prefix,
                               bool cross, AttentionHook* hook) {
  ad::Var q = linear(tape, x, prefix + ".to_q");
  ad::Var k = linear(tape, source, prefix + ".to_k");
  ad::Var v = linear(tape, source, prefix + ".to_v");
  ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(options_.hidden)));
  ad::Var probs = ad::softmax_rows(scores);
  if (hook) {
    if (auto replaced = hook->on_attention({prefix, cross}, probs.value())) {
      if (replaced->rows() != probs.rows() || replaced->cols() != probs.cols())
        throw ShapeError("attention hook returned a wrongly shaped map for " + prefix);
      probs = tape.constant(std::move(*replaced));
    }
  }
  return linear(tape, ad::matmul(probs, v), prefix + ".to_out");
}

ad::Var TinyBackend::predict_noise(ad::Tape& tape, const ad::Var& latent, int timestep, const ad::Var& context,
                                   AttentionHook* hook) {
  if (latent.rows() != kLatentSide * kLatentSide || latent.cols() != kLatentChannels)
    throw ShapeError("tiny backend: latent must be 64 x 4");
  if (context.rows() != options_.context_length || context.cols() != options_.text_dim)
    throw ShapeError("tiny backend: context must be " + std::to_string(options_.context_length) + " x " +
                     std::to_string(options_.text_dim));
  ad::Var h = linear(tape, latent, "in_proj");
  h = ad::add(h, tape.constant(latent_pos_));
  h = ad::add_row(h, ad::tanh(linear(tape, tape.constant(time_features(timestep)), "time_proj")));
  for (int b = 0; b < options_.blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    h = ad::add(h, attention(tape, h, h, p + "attn1", false, hook));
    h = ad::add(h, attention(tape, h, context, p + "attn2", true, hook));
    h = ad::add(h, linear(tape, ad::tanh(linear(tape, h, p + "ff.in")), p + "ff.out"));
  }
  return linear(tape, h, "out_proj");
}

std::vector<LayerShape> TinyBackend::adaptable_layers() const { return layers_; }

std::vector<int> TinyBackend::token_ids(const std::string& word) const { return tokenizer_->encode(word); }

Matrix TinyBackend::token_embedding(const std::vector<int>& ids) const {
  const Matrix& table = parameter("text.token_embedding").value;
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw DomainError("token id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

void TinyBackend::attach(AdapterWeights& adapters) {
  if (merged_) throw StateError("tiny backend: detach merged adapters before attaching new ones");
  for (const auto& pair : adapters.layers) {
    auto it = std::find_if(layers_.begin(), layers_.end(), [&](const LayerShape& l) { return l.name == pair.layer; });
    if (it == layers_.end()) throw ShapeError("tiny backend has no layer '" + pair.layer + "'");
    if (pair.a.value.rows() != it->in_features || pair.b.value.cols() != it->out_features ||
        pair.a.value.cols() != pair.b.value.rows())
      throw ShapeError("adapter shapes do not match layer '" + pair.layer + "'");
  }
  if (!adapters.token_ids.empty() && adapters.token_embedding.value.cols() != options_.text_dim)
    throw ShapeError("token embedding width does not match the text encoder");
  attached_ = &adapters;
}

void TinyBackend::detach() {
  attached_ = nullptr;
  merged_ = false;
}

void TinyBackend::merge_attached() {
  if (merged_) throw StateError("tiny backend: adapters already merged");
  if (!attached_) throw StateError("tiny backend: nothing attached to merge");
  for (const auto& pair : attached_->layers) {
    Parameter& w = parameter(pair.layer + ".weight");
    w.value += attached_->scale * (pair.a.value * pair.b.value);
  }
  merged_ = true;
}

std::vector<Parameter*> TinyBackend::base_parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : params_)
    if (name.rfind("text.", 0) != 0) out.push_back(&p);
  return out;
}

std::string TinyBackend::weights_hash() const {
  Sha256 h;
  h.update(id());
  h.update(tokenizer_->id());
  h.update(encoder_);
  h.update(latent_pos_);
  for (const auto& [name, p] : params_) {
    h.update(name);
    h.update(p.value);
  }
  return h.hex();
}

std::unique_ptr<DenoiserBackend> TinyBackend::clone() const {
  auto copy = std::make_unique<TinyBackend>(*this);
  copy->attached_ = nullptr;
  copy->merged_ = false;
  for (auto& [name, p] : copy->params_) p.trainable = false;
  return copy;
}

}  // namespace ageshift
