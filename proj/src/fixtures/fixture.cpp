// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/fixtures/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "ageshift/core/manifest.hpp"
#include "ageshift/regset/regset.hpp"
#include "ageshift/util/hash.hpp"
#include "ageshift/util/random.hpp"

namespace ageshift {

namespace fs = std::filesystem;

namespace {

// Rendered age ranges per group; representative labels come from the config.
constexpr int kGroupRange[6][2] = {{2, 12}, {13, 19}, {20, 35}, {36, 55}, {56, 75}, {76, 95}};

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Round-trips through 8 bits so in-memory pixels equal the files on disk.
Image quantised(const Image& img) {
  const std::string bytes = img.to_rgb8();
  return Image::from_rgb8(img.width, img.height, reinterpret_cast<const unsigned char*>(bytes.data()));
}

std::string group_key(AgeGroup g) {
  std::string s(to_string(g));
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

}  // namespace

FaceStyle face_style(long identity_seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(identity_seed) * 0x2545F4914F6CDD1Dull + 17);
  FaceStyle s{};
  const double tone = uniform(rng, 0.45, 0.85);
  s.skin[0] = tone;
  s.skin[1] = tone * uniform(rng, 0.7, 0.9);
  s.skin[2] = tone * uniform(rng, 0.55, 0.8);
  for (double& h : s.hair) h = uniform(rng, 0.05, 0.35);
  s.face_rx = uniform(rng, 0.28, 0.38);
  s.face_ry = uniform(rng, 0.36, 0.44);
  s.eye_dx = uniform(rng, 0.10, 0.18);
  s.eye_y = uniform(rng, -0.12, -0.04);
  s.mouth_w = uniform(rng, 0.08, 0.18);
  return s;
}

Image synthetic_face(const FaceStyle& style, int age, int size) {
  Image img(size, size);
  // Hair lightens with age, as a visible cue beyond the global shift.
  const double grey = std::clamp(age / 100.0, 0.0, 1.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size - 0.5;
      const double v = (y + 0.5) / size - 0.5;
      double rgb[3] = {0.3, 0.32, 0.36};
      const double face = (u * u) / (style.face_rx * style.face_rx) + (v * v) / (style.face_ry * style.face_ry);
      if (face <= 1.0) {
        for (int c = 0; c < 3; ++c) rgb[c] = style.skin[c];
        if (v < -0.25) {
          for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - grey) * style.hair[c] + grey * 0.85;
        }
        const double ey = v - style.eye_y;
        if (std::abs(ey) < 0.05 && (std::abs(u - style.eye_dx) < 0.05 || std::abs(u + style.eye_dx) < 0.05))
          for (double& c : rgb) c = 0.05;
        if (std::abs(v - 0.2) < 0.04 && std::abs(u) < style.mouth_w) {
          rgb[0] = 0.6;
          rgb[1] = 0.15;
          rgb[2] = 0.2;
        }
      }
      for (int c = 0; c < 3; ++c) img.pixels(y * size + x, c) = rgb[c];
    }
  }
  // Shift the mean towards the stub estimator's intensity for `age`.
  const double target = std::clamp(MeanIntensityAgeEstimator::intensity_for(age), 0.05, 0.95);
  for (int it = 0; it < 4; ++it) {
    const double shift = target - img.pixels.mean();
    img.pixels = (img.pixels.array() + shift).cwiseMax(0.0).cwiseMin(1.0);
  }
  return img;
}

AgeLabeledManifest synthetic_group_set(int per_group, long seed, MemoryImageStore& images, const std::string& prefix) {
  const PipelineConfig defaults;
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed) ^ 0x5E7ull);
  AgeLabeledManifest out;
  for (AgeGroup g : kAllAgeGroups) {
    const auto gi = static_cast<std::size_t>(g);
    for (int k = 0; k < per_group; ++k) {
      const int lo = kGroupRange[gi][0], hi = kGroupRange[gi][1];
      const int age = lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
      const long identity = static_cast<long>(rng() >> 1);
      const std::string ref = prefix + group_key(g) + "_" + std::to_string(k) + ".png";
      images.put(ref, quantised(synthetic_face(face_style(identity), age)));
      out.entries.push_back({ref, defaults.group_age(g), g});
    }
  }
  return out;
}

PipelineConfig fixture_config(long seed) {
  PipelineConfig c;
  c.iterations = 10;
  c.learning_rate = 1.0e-4;
  c.lora_rank = 4;
  c.image_size = TinyBackend::kImageSize;
  c.diffusion_steps = 5;
  c.seed = seed;
  return c;
}

Fixture make_fixture(long seed) {
  Fixture f;
  f.seed = seed;
  TinyOptions opts;
  opts.seed = seed;
  f.backend = std::make_unique<TinyBackend>(opts);
  f.tokenizer = &WordpieceTokenizer::toy();
  f.embedder = ProjectionFaceEmbedder(seed);
  f.config = fixture_config(seed);

  const FaceStyle self = face_style(seed * 7919 + 1);
  f.profile.token = f.config.token;
  f.profile.gender = Gender::male;
  for (int age : {25, 40, 55}) {
    const std::string ref = "self/ref_" + std::to_string(age) + ".png";
    f.images.put(ref, quantised(synthetic_face(self, age)));
    f.profile.references.push_back({ref, age});
  }
  for (int age : {35, 60}) {
    const std::string ref = "self/input_" + std::to_string(age) + ".png";
    f.images.put(ref, quantised(synthetic_face(self, age)));
    f.inputs.push_back({ref, age, std::nullopt});
  }
  f.groups = synthetic_group_set(4, seed, f.images);
  f.regset = refine_regularization_set(f.groups, f.estimator, f.images).manifest;
  return f;
}

std::string Fixture::hash() const {
  Sha256 h;
  h.update(backend->weights_hash());
  for (const auto& piece : tokenizer->vocabulary()) h.update(piece + "\n");
  h.update(format_profile(profile));
  h.update(format_manifest(groups));
  h.update(format_manifest(regset));
  for (const auto& in : inputs) h.update(in.image_ref + "\t" + std::to_string(in.age) + "\n");
  h.update(format_config(config));
  std::vector<std::string> refs;
  for (const auto& r : profile.references) refs.push_back(r.image_ref);
  for (const auto& e : groups.entries) refs.push_back(e.image_ref);
  for (const auto& in : inputs) refs.push_back(in.image_ref);
  std::sort(refs.begin(), refs.end());
  for (const auto& r : refs) h.update(images.load(r).to_rgb8());
  return h.hex();
}

std::vector<fs::path> write_fixture(const Fixture& fixture, const fs::path& dir) {
  std::vector<fs::path> written;
  auto text = [&](const fs::path& rel, const std::string& body) {
    fs::create_directories((dir / rel).parent_path());
    std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
    out << body;
    written.push_back(rel);
  };
  std::string vocab;
  for (const auto& piece : fixture.tokenizer->vocabulary()) vocab += piece + "\n";
  text("vocab.txt", vocab);
  text("config.txt", format_config(fixture.config));

  // Image references in the files are relative to the fixture directory.
  const std::string prefix = "images/";
  IdentityProfile profile = fixture.profile;
  for (auto& r : profile.references) r.image_ref = prefix + r.image_ref;
  auto prefixed = [&](AgeLabeledManifest m) {
    for (auto& e : m.entries) e.image_ref = prefix + e.image_ref;
    return m;
  };
  text("profile.json", format_profile(profile));
  text("regset_groups.tsv", format_manifest(prefixed(fixture.groups)));
  text("regset.tsv", format_manifest(prefixed(fixture.regset)));
  text("skip.txt", "");
  std::string inputs;
  for (const auto& in : fixture.inputs) inputs += prefix + in.image_ref + "\t" + std::to_string(in.age) + "\n";
  text("inputs.tsv", inputs);

  std::vector<std::string> refs;
  for (const auto& r : fixture.profile.references) refs.push_back(r.image_ref);
  for (const auto& e : fixture.groups.entries) refs.push_back(e.image_ref);
  for (const auto& in : fixture.inputs) refs.push_back(in.image_ref);
  for (const auto& r : refs) {
    const fs::path rel = fs::path("images") / r;
    fs::create_directories((dir / rel).parent_path());
    write_image(dir / rel, fixture.images.load(r));
    written.push_back(rel);
  }
  return written;
}

}  // namespace ageshift
