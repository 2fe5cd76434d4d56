// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/p2pedit/edit.hpp"

#include <json.hpp>

#include "ageshift/error.hpp"
#include "ageshift/util/hash.hpp"

namespace ageshift {

namespace {

void check_indices(const std::vector<int>& idx, std::size_t limit, const std::string& which) {
  for (int i : idx)
    if (i < 0 || static_cast<std::size_t>(i) >= limit)
      throw SpanResolutionError("edit: " + which + " span index " + std::to_string(i) + " outside the " +
                                std::to_string(limit) + "-token prompt");
}

// Runs `fn` and rethrows library errors tagged with `stage`.
template <typename F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct AttachGuard {
  DenoiserBackend& backend;
  bool attached = false;
  ~AttachGuard() {
    if (attached) backend.detach();
  }
};

}  // namespace

EditResult edit(const InversionResult& inv, const PromptBundle& bundle, AttentionController& controller,
                DenoiserBackend& backend, const TokenizerAdapter* tokenizer) {
  const int steps = inv.steps();
  if (steps < 1) throw StateError("edit: inversion has no steps");
  if (static_cast<int>(inv.null_embeddings.size()) != steps)
    throw StateError("edit: inversion is missing null embeddings (" + std::to_string(inv.null_embeddings.size()) +
                     " of " + std::to_string(steps) + ")");
  if (bundle.p_in != inv.source_prompt)
    throw SpanResolutionError("edit: bundle source prompt '" + bundle.p_in + "' differs from the inverted prompt '" +
                              inv.source_prompt + "'");
  if (controller.spans_in() != bundle.replace_spans_in || controller.spans_tar() != bundle.replace_spans_tar ||
      controller.alignment() != bundle.alignment)
    throw SpanResolutionError("edit: controller spans were not built from this bundle");
  if (tokenizer) {
    const std::size_t n_in = tokenizer->encode(bundle.p_in).size();
    const std::size_t n_tar = tokenizer->encode(bundle.p_tar).size();
    check_indices(bundle.replace_spans_in, n_in, "source");
    check_indices(bundle.replace_spans_tar, n_tar, "target");
    for (const auto& a : bundle.alignment) {
      check_indices({a.source}, n_in, "aligned source");
      check_indices({a.target}, n_tar, "aligned target");
    }
  }

  const Matrix cond_src = backend.text_embed(bundle.p_in);
  const Matrix cond_tar = backend.text_embed(bundle.p_tar);
  controller.reset(steps);
  Matrix z_src = inv.z_T;
  Matrix z_tar = inv.z_T;
  for (int i = 0; i < steps; ++i) {
    const int t = inv.timesteps[static_cast<std::size_t>(i)];
    const Matrix& u = inv.null_embeddings[static_cast<std::size_t>(i)];
    controller.begin_step(i);
    const Matrix eps_src = guided_noise(backend, z_src, t, u, cond_src, inv.guidance, &controller.source_hook());
    const Matrix eps_tar = guided_noise(backend, z_tar, t, u, cond_tar, inv.guidance, &controller.target_hook());
    z_src = ddim_step(backend.schedule(), z_src, eps_src, t, inv.step_ratio);
    z_tar = ddim_step(backend.schedule(), z_tar, eps_tar, t, inv.step_ratio);
  }

  EditResult r;
  r.latent = z_tar;
  r.source_latent = z_src;
  r.image = backend.decode_latent(z_tar);
  r.cross_steps = controller.cross_steps();
  r.self_steps = controller.self_steps();
  r.events = controller.events();
  r.recorded_maps = controller.recorded_maps();
  return r;
}

std::vector<TransformResult> transform_ages(const EditRequest& request, const std::vector<int>& target_ages,
                                            const IdentityProfile& profile, AdapterWeights* adapters,
                                            DenoiserBackend& backend, const PipelineConfig& config,
                                            const TransformContext& ctx) {
  staged("request", [&] {
    validate_config(config);
    for (int age : target_ages) {
      EditRequest r = request;
      r.alpha_tar = age;
      validate_edit_request(r);
    }
    if (!ctx.tokenizer) throw ConfigError("a tokenizer is required");
    if (!ctx.images) throw ConfigError("an image store is required");
    if (profile.references.empty()) throw ConfigError("profile has no references");
  });

  const Image input = staged("load", [&] { return ctx.images->load(request.input_image); });

  int alpha_in = 0;
  bool estimated = false;
  if (request.alpha_in) {
    alpha_in = *request.alpha_in;
  } else {
    alpha_in = staged("estimate", [&] {
      if (!ctx.estimator) throw ConfigError("alpha_in is missing and no age estimator was supplied");
      return checked_estimate(*ctx.estimator, input);
    });
    estimated = true;
  }

  AttachGuard guard{backend};
  staged("adapters", [&] {
    if (adapters && backend.attachment() != adapters) {
      if (backend.attached()) throw StateError("backend carries a different adapter set");
      backend.attach(*adapters);
      guard.attached = true;
    }
  });

  const PromptFlags flags = PromptFlags::from(config);
  const int ref_age = profile.references.front().age;
  const std::string p_in = staged("prompts", [&] {
    return build_bundle(profile, alpha_in, alpha_in, ref_age, alpha_in, flags).p_in;
  });

  const DdimTrajectory traj =
      staged("invert", [&] { return ddim_invert(input, p_in, backend, config.diffusion_steps); });
  InversionResult inversion = staged("null-text", [&] {
    NullTextOptions o{config.inner_steps, config.inner_lr, config.guidance_scale, config.early_stop_loss};
    return optimize_null_text(traj, p_in, backend, o);
  });
  inversion.config_hash = config_hash(config);

  std::vector<TransformResult> out;
  for (int age : target_ages) {
    TransformResult r;
    r.alpha_in = alpha_in;
    r.alpha_in_estimated = estimated;
    r.bundle = staged("prompts", [&] {
      return attach_spans(build_bundle(profile, alpha_in, age, ref_age, age, flags), *ctx.tokenizer);
    });
    r.edit = staged("edit", [&] {
      AttentionController controller(r.bundle, ControllerOptions::from(config), backend.context_offset());
      return edit(inversion, r.bundle, controller, backend, ctx.tokenizer);
    });
    r.image = r.edit.image;
    r.inversion = inversion;
    out.push_back(std::move(r));
  }
  return out;
}

TransformResult transform_age(const EditRequest& request, const IdentityProfile& profile, AdapterWeights* adapters,
                              DenoiserBackend& backend, const PipelineConfig& config, const TransformContext& ctx) {
  auto results = transform_ages(request, {request.alpha_tar}, profile, adapters, backend, config, ctx);
  return std::move(results.front());
}

std::string edit_sidecar_json(const TransformResult& r, const EditRequest& request, const PipelineConfig& config) {
  nlohmann::ordered_json j;
  j["input_image"] = request.input_image;
  j["alpha_in"] = r.alpha_in;
  j["alpha_in_estimated"] = r.alpha_in_estimated;
  j["alpha_tar"] = request.alpha_tar;
  j["seed"] = request.seed;
  j["prompts"] = {{"p_in", r.bundle.p_in}, {"p_tar", r.bundle.p_tar}};
  j["spans"] = {{"in", r.bundle.replace_spans_in}, {"tar", r.bundle.replace_spans_tar}};
  nlohmann::ordered_json align = nlohmann::ordered_json::array();
  for (const auto& a : r.bundle.alignment) align.push_back({a.target, a.source});
  j["alignment"] = align;
  j["cross_replace_fraction"] = config.cross_replace_fraction;
  j["self_replace_fraction"] = config.self_replace_fraction;
  j["self_attention_injection"] = config.self_attention_injection;
  j["cross_steps"] = r.edit.cross_steps;
  j["self_steps"] = r.edit.self_steps;
  j["diffusion_steps"] = config.diffusion_steps;
  j["guidance_scale"] = config.guidance_scale;
  j["config_hash"] = config_hash(config);
  j["image_sha256"] = sha256_hex(r.image.to_rgb8());
  return j.dump(2) + "\n";
}

}  // namespace ageshift
