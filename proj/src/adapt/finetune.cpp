// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/finetune.hpp"

#include <cmath>
#include <random>

#include "ageshift/adapt/lora.hpp"
#include "ageshift/adapt/ntxent.hpp"
#include "ageshift/adapt/optimizer.hpp"
#include "ageshift/error.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/regset/regset.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

namespace {

struct Detacher {
  DenoiserBackend& backend;
  std::vector<Parameter*> trainable;
  ~Detacher() {
    for (auto* p : trainable) p->trainable = false;
    backend.detach();
  }
};

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

ad::Var embed_on_tape(const FaceEmbedder& embedder, const ad::Var& pixels, int size) {
  Image img(size, size);
  img.pixels = pixels.value();
  Vector e = embedder.embed(img);
  Matrix row = e.transpose();
  return ad::custom(pixels, std::move(row), [&embedder, img](const Matrix& g) {
    return embedder.embed_vjp(img, g.row(0).transpose());
  });
}

}  // namespace

FinetuneResult finetune(const IdentityProfile& profile, const AgeLabeledManifest& regset,
                        const PipelineConfig& config, DenoiserBackend& backend, const FaceEmbedder* embedder,
                        const ImageStore& images) {
  validate_config(config);
  if (auto v = validate_profile(profile, config.max_references); !v.empty())
    throw ConfigError("finetune: invalid profile: " + v.front().message);
  if (regset.empty()) throw ConfigError("finetune: regularization set is empty");
  const bool use_id = config.lambda_id != 0.0;
  if (use_id && (embedder == nullptr || !embedder->differentiable()))
    throw ConfigError("finetune: lambda_id > 0 needs a differentiable face embedder");
  if (backend.merged()) throw StateError("finetune: backend has merged adapters");

  const AgeLabeledManifest reg = config.use_refined_regset ? regset : label_with_group_ages(regset, config);
  const PromptFlags flags = PromptFlags::from(config);

  FinetuneResult result;
  result.full_finetune = !config.use_lora;
  AdapterOptions opts;
  opts.rank = config.lora_rank;
  opts.scale = config.lora_scale;
  opts.seed = config.seed;
  opts.token = profile.token;
  if (!config.use_lora) opts.targets = [](const LayerShape&) { return false; };
  result.adapters = init_adapters(backend, opts);

  Detacher guard{backend, {}};
  backend.attach(result.adapters);
  guard.trainable = result.adapters.parameters();
  if (!config.use_lora)
    for (auto* p : backend.base_parameters()) guard.trainable.push_back(p);
  for (auto* p : guard.trainable) p->trainable = true;

  AdamW optimizer({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed));
  const NoiseSchedule& sched = backend.schedule();
  const int size = backend.image_size();

  // Embeddings of the real self-reference images never change.
  Matrix ref_embeddings;
  if (use_id) {
    ref_embeddings.resize(static_cast<Eigen::Index>(profile.references.size()), 0);
    for (std::size_t j = 0; j < profile.references.size(); ++j) {
      Vector e = embedder->embed(images.load(profile.references[j].image_ref));
      if (j == 0) ref_embeddings.resize(ref_embeddings.rows(), e.size());
      ref_embeddings.row(static_cast<Eigen::Index>(j)) = e.transpose();
    }
  }

  for (int step = 0; step < config.iterations; ++step) {
    ad::Tape tape;
    std::vector<ad::Var> ref_losses, reg_losses, generated;
    std::vector<Matrix> negatives;
    for (int slot = 0; slot < config.batch_size; ++slot) {
      const bool is_ref = ((static_cast<long>(step) * config.batch_size + slot) % 2) == 0;
      std::string prompt;
      Image image;
      if (is_ref) {
        const auto& r = profile.references[uniform_index(rng, profile.references.size())];
        image = images.load(r.image_ref);
        prompt = reference_prompt(profile.token, r.age, flags);
      } else {
        const auto& e = reg.entries[uniform_index(rng, reg.size())];
        image = images.load(e.image_ref);
        prompt = regularization_prompt(e.age, flags);
      }
      const Matrix z0 = backend.encode_image(image);
      const int t = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(sched.train_steps())));
      const Matrix noise = gaussian(rng, z0.rows(), z0.cols());
      const double ab = sched.alpha_bar(t);
      const Matrix zt = std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * noise;

      ad::Var zt_var = tape.constant(zt);
      ad::Var ctx = backend.text_embed(tape, prompt);
      ad::Var pred = backend.predict_noise(tape, zt_var, t, ctx);
      ad::Var rec = ad::mean_square(ad::sub(pred, tape.constant(noise)));
      (is_ref ? ref_losses : reg_losses).push_back(rec);

      if (use_id) {
        if (is_ref) {
          ad::Var x0 = ad::scale(ad::sub(zt_var, ad::scale(pred, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
          generated.push_back(embed_on_tape(*embedder, backend.decode_latent(tape, x0), size));
        } else {
          negatives.push_back(embedder->embed(image).transpose());
        }
      }
    }

    auto mean_of = [&tape](const std::vector<ad::Var>& xs) {
      if (xs.empty()) return tape.constant(Matrix::Zero(1, 1));
      ad::Var acc = xs.front();
      for (std::size_t i = 1; i < xs.size(); ++i) acc = ad::add(acc, xs[i]);
      return ad::scale(acc, 1.0 / static_cast<double>(xs.size()));
    };
    ad::Var loss_ref = mean_of(ref_losses);
    ad::Var loss_reg = mean_of(reg_losses);
    ad::Var total = ad::add(loss_ref, ad::scale(loss_reg, config.lambda_reg));
    double ntx_value = 0.0;
    if (use_id && !generated.empty()) {
      std::vector<ad::Var> rows = generated;
      rows.push_back(tape.constant(ref_embeddings));
      for (const auto& n : negatives) rows.push_back(tape.constant(n));
      ad::Var all = ad::concat_rows(rows);
      PairList pairs;
      const int ngen = static_cast<int>(generated.size());
      for (int i = 0; i < ngen; ++i)
        for (int j = 0; j < ref_embeddings.rows(); ++j) pairs.emplace_back(i, ngen + j);
      ad::Var ntx = ntxent(all, pairs, config.temperature);
      ntx_value = ntx.value()(0, 0);
      total = ad::add(total, ad::scale(ntx, config.lambda_id));
    }

    TrainingStep rec;
    rec.step = step;
    rec.total = total.value()(0, 0);
    rec.rec_ref = loss_ref.value()(0, 0);
    rec.rec_reg = loss_reg.value()(0, 0);
    rec.ntxent = ntx_value;
    if (!std::isfinite(rec.total))
      throw NumericError("finetune: non-finite loss at step " + std::to_string(step), step);

    if (total.requires_grad()) {
      tape.backward(total);
      for (auto* p : guard.trainable) {
        const Matrix g = tape.grad(*p);
        if (!g.allFinite()) throw NumericError("finetune: non-finite gradient at step " + std::to_string(step), step);
        optimizer.update(*p, g);
      }
      optimizer.next_step();
    }
    result.log.push_back(rec);
  }
  return result;
}

}  // namespace ageshift
