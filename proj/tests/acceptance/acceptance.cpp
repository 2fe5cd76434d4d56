// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "ageshift/adapt/finetune.hpp"
#include "ageshift/adapt/lora.hpp"
#include "ageshift/adapt/ntxent.hpp"
#include "ageshift/cli/cli.hpp"
#include "ageshift/evalkit/metrics.hpp"
#include "ageshift/evalkit/report.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/invert/inversion.hpp"
#include "ageshift/p2pedit/edit.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/regset/regset.hpp"
#include "ageshift/util/hash.hpp"
#include "ageshift/util/random.hpp"
#include "support.hpp"

using namespace ageshift;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * standard_normal(rng);
  return m;
}

double mse(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (;;) {
    const auto e = line.find('\t', b);
    out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
    if (e == std::string::npos) return out;
    b = e + 1;
  }
}

void ac1(Outcome& o) {
  std::istringstream in(testing::read_text(testing::source_dir() / "tests/golden/prompts_v1.tsv"));
  std::string line;
  std::getline(in, line);
  int rows = 0, mismatches = 0;
  while (std::getline(in, line)) {
    const auto f = split_tabs(line);
    if (f.size() != 10) {
      ++mismatches;
      continue;
    }
    const IdentityProfile p{"sks", parse_gender(f[0]), {{"r.png", 30}}};
    const int age = std::stoi(f[1]);
    const PromptFlags flags{f[3] == "1", f[4] == "1", f[5] == "1"};
    const auto b = build_bundle(p, age, std::stoi(f[2]), age, age, flags);
    mismatches += (b.p_ref != f[6]) + (b.p_reg != f[7]) + (b.p_in != f[8]) + (b.p_tar != f[9]);
    ++rows;
  }
  o.detail << rows << " rows, " << mismatches << " mismatching strings";
  o.require(rows == 192, "192 golden rows");
  o.require(mismatches == 0, "exact strings");
}

void ac2(Outcome& o) {
  const auto& tok = WordpieceTokenizer::toy();
  std::mt19937_64 rng(2024);
  int agree = 0;
  const int cases = 200;
  for (int c = 0; c < cases; ++c) {
    const int a_in = static_cast<int>(uniform_index(rng, 101));
    const int a_tar = static_cast<int>(uniform_index(rng, 101));
    const Gender g = uniform_index(rng, 2) ? Gender::male : Gender::female;
    const IdentityProfile p{"sks", g, {{"r.png", 30}}};
    const auto b = build_bundle(p, a_in, a_tar, 30, a_tar);
    const auto s = replacement_spans(b, tok);
    bool ok = s.spans_in == testing::oracle_spans(b.p_in, true, tok) &&
              s.spans_tar == testing::oracle_spans(b.p_tar, true, tok);
    // Character coverage is exact: the span tokens realise precisely the noun and the age phrase.
    for (const auto& [prompt, spans] : {std::pair{b.p_in, s.spans_in}, std::pair{b.p_tar, s.spans_tar}}) {
      const auto offs = tok.offsets(prompt);
      std::set<std::size_t> covered;
      for (int t : spans)
        for (std::size_t ch = offs[t].begin; ch < offs[t].end; ++ch) covered.insert(ch);
      ok = ok && covered == testing::expected_span_chars(prompt, true);
      std::vector<std::string> tail;
      for (std::size_t k = spans.size() - 4; k < spans.size(); ++k) tail.push_back(tok.piece(tok.encode(prompt)[spans[k]]));
      ok = ok && tail == std::vector<std::string>{"-", "year", "-", "old"};
    }
    agree += ok;
  }
  o.detail << agree << "/" << cases << " cases agree with the character-offset oracle";
  o.require(agree == cases, "all cases");
}

void ac3(Outcome& o) {
  TinyBackend base;
  AdapterOptions opts;
  opts.rank = 16;
  opts.token = "sks";
  auto zero = init_adapters(base, opts);
  double worst_zero = 0;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Matrix z = random_matrix(rng, 64, 4);
    const int t = static_cast<int>(uniform_index(rng, 1000));
    const Matrix ctx = base.text_embed("photo of sks man as 35-year-old");
    const Matrix ref = base.predict_noise(z, t, ctx);
    base.attach(zero);
    const Matrix got = base.predict_noise(z, t, base.text_embed("photo of sks man as 35-year-old"));
    base.detach();
    worst_zero = std::max(worst_zero, testing::max_relative_diff(ref, got));
  }
  double worst_merge = 0;
  for (long seed = 0; seed < 100; ++seed) {
    TinyOptions to;
    to.seed = seed;
    TinyBackend b(to);
    AdapterOptions ao;
    ao.rank = 4;
    ao.seed = seed;
    auto w = init_adapters(b, ao);
    std::mt19937_64 r(static_cast<std::uint64_t>(seed) + 77);
    for (auto& p : w.layers) p.b.value = random_matrix(r, p.b.value.rows(), p.b.value.cols(), 0.3);
    const Matrix z = random_matrix(r, 64, 4);
    const int t = static_cast<int>(uniform_index(r, 1000));
    const Matrix ctx = b.text_embed("photo of person as 40-year-old");
    b.attach(w);
    const Matrix adapter_path = b.predict_noise(z, t, ctx);
    b.detach();
    TinyBackend explicit_merge(to);
    for (const auto& p : w.layers)
      explicit_merge.parameter(p.layer + ".weight").value += w.scale * p.a.value * p.b.value;
    worst_merge = std::max(worst_merge, testing::max_relative_diff(adapter_path, explicit_merge.predict_noise(z, t, ctx)));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "zero-init max rel diff %.2e, adapter vs W+AB max rel diff %.2e over 100 seeds",
                worst_zero, worst_merge);
  o.detail << buf;
  o.require(worst_zero < 1e-6, "zero-init < 1e-6");
  o.require(worst_merge < 1e-5, "merge < 1e-5");
}

void ac4(Outcome& o) {
  Fixture fx = make_fixture(0);
  const std::string before = fx.backend->weights_hash();
  const auto r = finetune(fx.profile, fx.regset, fx.config, *fx.backend, &fx.embedder, fx.images);
  bool finite = r.log.size() == 10;
  for (const auto& s : r.log) finite = finite && std::isfinite(s.total);
  const bool frozen = fx.backend->weights_hash() == before;

  Fixture full = make_fixture(0);
  full.config.use_lora = false;
  finetune(full.profile, full.regset, full.config, *full.backend, &full.embedder, full.images);
  const bool changed = full.backend->weights_hash() != before;
  o.detail << "lora: " << r.log.size() << " finite losses, base hash " << (frozen ? "unchanged" : "CHANGED")
           << "; full: base hash " << (changed ? "changed" : "UNCHANGED");
  o.require(finite, "finite losses");
  o.require(frozen, "frozen base");
  o.require(changed, "full fine-tune updates weights");
}

void ac5(Outcome& o) {
  Matrix z(3, 2);
  z << 1, 0, 1, 0, 0, 1;
  const double err = std::abs(ntxent(z, {{0, 1}}, 1.0) + std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)));
  std::mt19937_64 rng(5);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix e = random_matrix(rng, 6, 4);
    e.rowwise().normalize();
    const PairList pairs{{0, 1}, {1, 0}, {2, 3}, {4, 5}};
    ad::Tape tape;
    ad::Var v = tape.variable(e);
    tape.backward(ntxent(v, pairs, 0.5));
    const Matrix g = tape.grad(v);
    Matrix fd(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      Matrix p = e, m = e;
      p.data()[i] += 1e-5;
      m.data()[i] -= 1e-5;
      fd.data()[i] = (testing::reference_ntxent(p, pairs, 0.5) - testing::reference_ntxent(m, pairs, 0.5)) / 2e-5;
    }
    worst = std::max(worst, (g - fd).norm() / fd.norm());
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "|value - (-log(e/(e+1)))| = %.1e, worst gradient rel err %.1e", err, worst);
  o.detail << buf;
  o.require(err < 1e-6, "value");
  o.require(worst < 1e-4, "gradient");
}

void ac6(Outcome& o) {
  double worst_rt = 0;
  int improved = 0, cases = 0;
  for (long seed = 0; seed < 5; ++seed) {
    Fixture fx = make_fixture(seed);
    for (const auto& in : fx.inputs) {
      const std::string p = edit_prompt(fx.profile.token, in.age, fx.profile.gender);
      const Image img = fx.images.load(in.image_ref);
      const auto tr3 = ddim_invert(img, p, *fx.backend, 3);
      const auto g1 = optimize_null_text(tr3, p, *fx.backend, {10, 1e-2, 1.0, 1e-5});
      worst_rt = std::max(worst_rt, mse(reconstruct_latent(g1, *fx.backend), tr3.z0));

      const auto tr = ddim_invert(img, p, *fx.backend, fx.config.diffusion_steps);
      const auto inv = optimize_null_text(tr, p, *fx.backend, {10, 1e-2, 7.5, 1e-5});
      const double opt = mse(reconstruct_latent(inv, *fx.backend), tr.z0);
      const double unopt = mse(reconstruct_latent_unoptimized(inv, *fx.backend), tr.z0);
      improved += opt < unopt;
      ++cases;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "guidance 1 worst MSE %.2e (3 steps); guidance 7.5 optimized < unoptimized in %d/%d",
                worst_rt, improved, cases);
  o.detail << buf;
  o.require(worst_rt < 1e-3, "round trip MSE < 1e-3");
  o.require(improved * 10 >= cases * 9, ">= 90% improved");
}

void ac7(Outcome& o) {
  auto run = [](bool hyphenated, int alpha_tar, ControllerOptions opts, Matrix* reconstruction, Matrix* plain) {
    Fixture fx = make_fixture(0);
    fx.config.use_hyphenated_age = hyphenated;
    const PromptFlags flags = PromptFlags::from(fx.config);
    const auto b = attach_spans(build_bundle(fx.profile, 35, alpha_tar, 25, alpha_tar, flags), *fx.tokenizer);
    const auto tr = ddim_invert(fx.images.load(fx.inputs[0].image_ref), b.p_in, *fx.backend, fx.config.diffusion_steps);
    const auto inv = optimize_null_text(tr, b.p_in, *fx.backend, {10, 1e-2, 7.5, 1e-5});
    AttentionController c(b, opts, fx.backend->context_offset());
    const auto r = edit(inv, b, c, *fx.backend, fx.tokenizer);
    if (reconstruction) *reconstruction = reconstruct_latent(inv, *fx.backend);
    if (plain)
      *plain = sample_latent(*fx.backend, inv.z_T, inv.timesteps, inv.step_ratio, fx.backend->text_embed(b.p_tar),
                             inv.null_embeddings, inv.guidance);
    return r;
  };
  Matrix rec, plain;
  const bool identity = run(true, 35, {1.0, 1.0, true, false}, &rec, nullptr).latent == rec;
  const bool disabled = run(true, 80, {0.0, 0.0, true, false}, nullptr, &plain).latent == plain;
  const auto h1 = sha256_hex(run(true, 80, {}, nullptr, nullptr).image.to_rgb8());
  const auto h2 = sha256_hex(run(false, 80, {}, nullptr, nullptr).image.to_rgb8());
  o.detail << "self-replacement " << (identity ? "bitwise equal" : "DIFFERS") << ", disabled controller "
           << (disabled ? "bitwise equal" : "DIFFERS") << ", hyphenated " << h1.substr(0, 12) << " vs single-token "
           << h2.substr(0, 12);
  o.require(identity, "identity");
  o.require(disabled, "disabled");
  o.require(h1 != h2, "liveness");
}

void ac8(Outcome& o) {
  auto rec = [](int t, int e) {
    EvalRecord r;
    r.output_ref = std::to_string(t) + "_" + std::to_string(e);
    r.target_age = t;
    r.estimated_age = e;
    return r;
  };
  const auto m1 = age_metric({rec(25, 30), rec(45, 40)});
  const bool ex1 = m1.per_target.at(25) == 5.0 && m1.per_target.at(45) == 5.0 && m1.all == 5.0;
  const bool ex2 = age_metric({rec(17, 17), rec(60, 60)}).all == 0.0;
  const bool ex3 = age_metric({rec(80, 73)}).all == 7.0;

  struct Angle : FaceEmbedder {
    std::string id() const override { return "angle"; }
    Vector embed(const Image& img) const override {
      Vector v(2);
      v << std::cos(img.pixels(0, 0)), std::sin(img.pixels(0, 0));
      return v;
    }
  } angle;
  auto img = [](double a) {
    Image i(1, 1);
    i.pixels(0, 0) = a;
    return i;
  };
  const bool id1 = *id_metric({{"a", "a", img(0.4), img(0.4)}}, angle).value == 0.0;
  const bool id2 = std::abs(*id_metric({{"a", "b", img(0.0), img(M_PI / 2)}}, angle).value - 1.0) < 1e-12;
  const bool id3 =
      std::abs(*id_metric({{"a", "a", img(0.1), img(0.1)}, {"b", "c", img(0), img(std::acos(0.8))}}, angle).value -
               0.1) < 1e-12;

  Fixture fx = make_fixture(0);
  TransformContext ctx{fx.tokenizer, &fx.images, &fx.estimator};
  std::vector<BenchmarkItem> items{{"sks", fx.profile, fx.inputs[0].image_ref, fx.inputs[0].age}};
  NamedPipeline ours{"ours", [&](const BenchmarkItem& item, const std::vector<int>& ages) {
                       std::vector<Image> out;
                       for (auto& r : transform_ages({item.input_ref, item.alpha_in, 0, 0}, ages, item.profile, nullptr,
                                                     *fx.backend, fx.config, ctx))
                         out.push_back(r.image);
                       return out;
                     }};
  const auto report =
      run_benchmark(items, default_target_ages(), {ours}, fx.estimator, fx.embedder, fx.images);
  const std::string table = format_report_table(report);
  const std::string header = table.substr(0, table.find('\n'));
  const bool layout = header == "Metric\tMethod\t1\t5\t8\t12\t17\t25\t35\t45\t60\t80\tALL" &&
                      table.find("\nAGE\tours\t") != std::string::npos &&
                      table.find("\nID\tours\t") != std::string::npos;
  o.detail << "AGE examples " << (ex1 && ex2 && ex3 ? "exact" : "WRONG") << ", ID examples "
           << (id1 && id2 && id3 ? "exact" : "WRONG") << ", table header '" << header << "'";
  o.require(ex1 && ex2 && ex3, "AGE examples");
  o.require(id1 && id2 && id3, "ID examples");
  o.require(layout, "table layout");
}

void ac9(Outcome& o) {
  MemoryImageStore images;
  const auto groups = synthetic_group_set(102, 9, images);
  std::set<std::string> skip;
  for (std::size_t i = 7; skip.size() < 18; i += 31) skip.insert(groups.entries[i % groups.size()].image_ref);
  const auto r = refine_regularization_set(groups, MeanIntensityAgeEstimator{}, images, skip, 4);
  std::set<std::string> input_refs;
  for (const auto& e : groups.entries) input_refs.insert(e.image_ref);
  bool in_range = true, subset = true;
  for (const auto& e : r.manifest.entries) {
    in_range = in_range && age_in_range(e.age);
    subset = subset && input_refs.count(e.image_ref) == 1 && skip.count(e.image_ref) == 0;
  }
  o.detail << groups.size() << " entries, " << skip.size() << " skipped -> " << r.manifest.size() << " relabelled";
  o.require(groups.size() == 612 && r.manifest.size() == 594, "594 of 612");
  o.require(in_range, "ages in [0, 100]");
  o.require(subset, "no invented refs");
}

// Runs finetune -> edit -> evaluate in `dir` and returns every recorded
// output hash keyed by stage and path.
std::map<std::string, std::string> pipeline_run(const fs::path& dir, int& failures) {
  const fs::path fx = testing::source_dir() / "fixtures/v1";
  std::ostringstream out, err;
  auto cli = [&](const std::vector<std::string>& args) {
    const int code = run_cli(args, out, err);
    if (code != 0) {
      ++failures;
      std::cerr << err.str();
    }
  };
  cli({"finetune", "--profile", (fx / "profile.json").string(), "--regset", (fx / "regset.tsv").string(),
       "--config", (fx / "config.txt").string(), "--seed", "0", "--out", (dir / "ck").string()});
  cli({"edit", "--profile", (fx / "profile.json").string(), "--adapters", (dir / "ck").string(), "--image",
       (fx / "images/self/input_35.png").string(), "--age-in", "35", "--target-age", "80", "--seed", "0", "--out",
       (dir / "edit/out_80.png").string(), "--records", (dir / "edit/records.jsonl").string()});
  cli({"evaluate", "--records", (dir / "edit/records.jsonl").string(), "--out", (dir / "eval").string()});
  std::map<std::string, std::string> hashes;
  for (const char* stage : {"ck", "edit", "eval"}) {
    const fs::path manifest = dir / stage / "run_manifest.json";
    if (!fs::exists(manifest)) {
      ++failures;
      continue;
    }
    for (const auto& a : load_run_manifest(manifest).outputs) hashes[std::string(stage) + "/" + a.path] = a.sha256;
  }
  return hashes;
}

void ac10(Outcome& o) {
  int failures = 0;
  const auto a = pipeline_run(testing::scratch_dir("acceptance_run_a"), failures);
  const auto b = pipeline_run(testing::scratch_dir("acceptance_run_b"), failures);
  int differing = 0;
  for (const auto& [path, hash] : a) {
    auto it = b.find(path);
    differing += (it == b.end() || it->second != hash);
  }
  o.detail << failures << " failed commands, " << a.size() << " artifacts, " << differing << " differing hashes";
  o.require(failures == 0, "exit codes");
  o.require(!a.empty() && a.size() == b.size(), "artifacts recorded");
  o.require(differing == 0, "identical hashes");
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double budget_seconds;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "prompt grammar exactness", 1, ac1},
      {"AC2", "span mapping vs tokenizer oracle", 5, ac2},
      {"AC3", "LoRA identity and merge equivalence", 30, ac3},
      {"AC4", "frozen-base guarantee", 60, ac4},
      {"AC5", "NT-Xent correctness", 5, ac5},
      {"AC6", "inversion round trip", 60, ac6},
      {"AC7", "edit identities", 60, ac7},
      {"AC8", "metric arithmetic", 10, ac8},
      {"AC9", "regset refinement", 5, ac9},
      {"AC10", "end-to-end determinism", 180, ac10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.budget_seconds) o.require(false, "runtime budget");
    failed += !o.pass;
    std::printf("%-4s %s  %s (%.2f s, budget %.0f s): %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                c.budget_seconds, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
