// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ageshift/adapt/checkpoint.hpp"
#include "ageshift/adapt/finetune.hpp"
#include "ageshift/core/config.hpp"
#include "ageshift/core/manifest.hpp"
#include "ageshift/error.hpp"
#include "ageshift/evalkit/report.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/fixtures/registry.hpp"
#include "ageshift/invert/inversion.hpp"
#include "ageshift/p2pedit/edit.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/regset/regset.hpp"
#include "ageshift/util/hash.hpp"

namespace ageshift {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
}

fs::path parent_or_dot(const fs::path& p) {
  const fs::path parent = p.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

// Path relative to `base` when it lies below it, otherwise as given.
std::string display_path(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  const fs::path rel = fs::relative(p, base, ec);
  if (!ec && !rel.empty() && rel.native().rfind("..", 0) != 0) return rel.generic_string();
  return p.generic_string();
}

// Path relative to `base` when it lies below it, otherwise absolute.
std::string record_path(const fs::path& p, const fs::path& base) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  if (!rel.empty() && rel.native().rfind("..", 0) != 0) return rel.generic_string();
  return abs.generic_string();
}

// Run manifest and event log for one invocation.
class RunRecorder {
 public:
  RunRecorder(std::string command, std::vector<std::string> argv, std::ostream& err)
      : err_(err), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
  }

  void set_run_dir(fs::path dir) { run_dir_ = std::move(dir); }
  void set_config(const PipelineConfig& c) {
    manifest_.config_hash = config_hash(c);
    manifest_.seed = c.seed;
  }
  void set_seed(long seed) { manifest_.seed = seed; }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void outputs_under(const fs::path& dir, const std::vector<fs::path>& rels) {
    for (const auto& r : rels) outputs_.push_back(dir / r);
  }

  void log(const std::string& event, const std::string& stage, const std::string& message) {
    json j;
    j["t"] = elapsed();
    j["event"] = event;
    j["stage"] = stage;
    if (!message.empty()) j["message"] = message;
    events_.push_back(j.dump());
  }

  template <typename F>
  auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
    err_ << "[ageshift] " << name << " ...\n";
    log("stage_start", name, "");
    const double t0 = elapsed();
    auto finish = [&] {
      const double dt = elapsed() - t0;
      manifest_.timings[name] += dt;
      log("stage_end", name, "");
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f", dt);
      err_ << "[ageshift] " << name << " done (" << buf << " s)\n";
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish();
      } else {
        auto r = fn();
        finish();
        return r;
      }
    } catch (const StageError& e) {
      log("stage_error", name, e.what());
      throw;
    } catch (const std::exception& e) {
      log("stage_error", name, e.what());
      throw StageError(name, e.what());
    }
  }

  void finish(const std::string& status, const std::string& error) {
    manifest_.status = status;
    manifest_.error = error;
    if (run_dir_.empty()) return;
    fs::create_directories(run_dir_);
    auto entries = [&](const std::vector<fs::path>& paths) {
      std::vector<ArtifactEntry> out;
      for (const auto& p : paths) {
        std::string digest;
        std::error_code ec;
        if (fs::is_regular_file(p, ec)) digest = sha256_file(p);
        out.push_back({display_path(p, run_dir_), digest});
      }
      std::sort(out.begin(), out.end(), [](const ArtifactEntry& a, const ArtifactEntry& b) { return a.path < b.path; });
      return out;
    };
    manifest_.inputs = entries(inputs_);
    manifest_.outputs = entries(outputs_);
    manifest_.timings["total"] = elapsed();

    json j;
    j["command"] = manifest_.command;
    j["argv"] = manifest_.argv;
    j["status"] = manifest_.status;
    if (!error.empty()) j["error"] = error;
    j["config_hash"] = manifest_.config_hash;
    j["seed"] = manifest_.seed;
    auto list = [](const std::vector<ArtifactEntry>& xs) {
      json a = json::array();
      for (const auto& x : xs) a.push_back({{"path", x.path}, {"sha256", x.sha256}});
      return a;
    };
    j["inputs"] = list(manifest_.inputs);
    j["outputs"] = list(manifest_.outputs);
    j["timings"] = manifest_.timings;
    write_text(run_dir_ / "run_manifest.json", j.dump(2) + "\n");
    log("finish", "", status);
    std::ofstream logf(run_dir_ / "run_log.jsonl", std::ios::app);
    for (const auto& e : events_) logf << e << "\n";
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  std::ostream& err_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
  fs::path run_dir_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  std::vector<std::string> events_;
};

// Options shared by commands that read a pipeline config.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> sets;
  long seed = 0;
  bool seed_given = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "Config file (key = value)");
    app->add_option("--set", sets, "Override a config key: key=value (repeatable)");
    app->add_option("--seed", seed, "Seed (overrides the config)")->each([this](const std::string&) {
      seed_given = true;
    });
  }

  PipelineConfig resolve(const PipelineConfig& base, RunRecorder& rec) const {
    PipelineConfig c = base;
    if (!config_path.empty()) {
      c = parse_config(read_text(config_path), c);
      rec.input(config_path);
    }
    c = apply_env_overrides(c);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed_given) c.seed = seed;
    validate_config(c);
    return c;
  }
};

std::vector<ManifestEntry> load_inputs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open inputs " + path.string());
  return parse_manifest(in, path.string()).entries;
}

// ---------------------------------------------------------------- commands

struct PrepareRegsetArgs {
  std::string in, skip, estimator = "stub", out, images_root;
  int workers = 1;
  int per_group = -1;
  long seed = 0;
};

void cmd_prepare_regset(const PrepareRegsetArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(parent_or_dot(a.out));
  rec.set_seed(a.seed);
  rec.input(a.in);
  AgeLabeledManifest groups = rec.stage("load", [&] { return load_manifest(a.in); });
  std::set<std::string> skip;
  if (!a.skip.empty()) {
    rec.input(a.skip);
    skip = rec.stage("load", [&] { return load_skip_list(a.skip); });
  }
  if (a.per_group >= 0) groups = rec.stage("sample", [&] { return sample_balanced(groups, a.per_group, a.seed); });
  auto estimator = rec.stage("estimator", [&] { return make_estimator(a.estimator); });
  const DirectoryImageStore store(a.images_root.empty() ? parent_or_dot(a.in) : fs::path(a.images_root));
  const RefinementResult result = rec.stage(
      "refine", [&] { return refine_regularization_set(groups, *estimator, store, skip, a.workers); });
  rec.stage("write", [&] {
    save_manifest(a.out, result.manifest);
    std::string skipped;
    for (const auto& s : result.skipped) skipped += s.image_ref + "\t" + s.reason + "\n";
    write_text(a.out + ".skipped.tsv", skipped);
  });
  rec.output(a.out);
  rec.output(a.out + ".skipped.tsv");
  out << "relabelled " << result.manifest.size() << " of " << groups.size() << " entries (" << result.skipped.size()
      << " skipped) -> " << a.out << "\n";
}

struct PromptsArgs {
  std::string token = "sks", gender = "male", tokenizer = "toy", run_dir;
  int age_in = 0, age_tar = 0, age_ref = -1, age_reg = -1;
  bool no_hyphens = false, no_ref_age = false, no_extreme_nouns = false, as_json = false;
};

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + std::to_string(xs[i]);
  return s;
}

void cmd_prompts(const PromptsArgs& a, RunRecorder& rec, std::ostream& out) {
  if (!a.run_dir.empty()) rec.set_run_dir(a.run_dir);
  PromptFlags flags{!a.no_hyphens, !a.no_ref_age, !a.no_extreme_nouns};
  IdentityProfile profile;
  profile.token = a.token;
  profile.gender = parse_gender(a.gender);
  auto tok = rec.stage("tokenizer", [&] { return make_tokenizer(a.tokenizer); });
  const int ref_age = a.age_ref >= 0 ? a.age_ref : a.age_in;
  const int reg_age = a.age_reg >= 0 ? a.age_reg : a.age_tar;
  const PromptBundle b = rec.stage("prompts", [&] {
    return attach_spans(build_bundle(profile, a.age_in, a.age_tar, ref_age, reg_age, flags), *tok);
  });
  auto pieces = [&](const std::string& p) {
    std::string s;
    for (int id : tok->encode(p)) s += (s.empty() ? "" : " ") + tok->piece(id);
    return s;
  };
  if (a.as_json) {
    json j;
    j["p_ref"] = b.p_ref;
    j["p_reg"] = b.p_reg;
    j["p_in"] = b.p_in;
    j["p_tar"] = b.p_tar;
    j["spans_in"] = b.replace_spans_in;
    j["spans_tar"] = b.replace_spans_tar;
    json align = json::array();
    for (const auto& p : b.alignment) align.push_back({p.target, p.source});
    j["alignment"] = align;
    out << j.dump(2) << "\n";
  } else {
    out << "p_ref\t" << b.p_ref << "\n"
        << "p_reg\t" << b.p_reg << "\n"
        << "p_in\t" << b.p_in << "\n"
        << "p_tar\t" << b.p_tar << "\n"
        << "tokens_in\t" << pieces(b.p_in) << "\n"
        << "tokens_tar\t" << pieces(b.p_tar) << "\n"
        << "spans_in\t" << join(b.replace_spans_in) << "\n"
        << "spans_tar\t" << join(b.replace_spans_tar) << "\n"
        << "alignment\t";
    for (std::size_t i = 0; i < b.alignment.size(); ++i)
      out << (i ? " " : "") << b.alignment[i].target << "<-" << b.alignment[i].source;
    out << "\n";
  }
}

struct FinetuneArgs {
  std::string profile, regset, out, backend = "tiny", embedder = "stub", images_root;
  ConfigOptions config;
};

void cmd_finetune(const FinetuneArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(a.out);
  const PipelineConfig config = rec.stage("config", [&] { return a.config.resolve(PipelineConfig{}, rec); });
  rec.set_config(config);
  rec.input(a.profile);
  rec.input(a.regset);
  const IdentityProfile profile = rec.stage("load", [&] { return load_profile(a.profile); });
  const AgeLabeledManifest regset = rec.stage("load", [&] { return load_manifest(a.regset); });
  auto backend = rec.stage("backend", [&] { return make_backend(a.backend); });
  std::unique_ptr<FaceEmbedder> embedder;
  if (config.lambda_id != 0.0) embedder = rec.stage("embedder", [&] { return make_embedder(a.embedder); });
  const DirectoryImageStore store(a.images_root.empty() ? parent_or_dot(a.profile) : fs::path(a.images_root));
  const FinetuneResult result =
      rec.stage("finetune", [&] { return finetune(profile, regset, config, *backend, embedder.get(), store); });
  const auto written = rec.stage("write", [&] {
    auto files = save_checkpoint(a.out, result, *backend, config);
    save_config(fs::path(a.out) / "config.txt", config);
    files.emplace_back("config.txt");
    return files;
  });
  rec.outputs_under(a.out, written);
  const auto& last = result.log.back();
  out << "trained " << result.log.size() << " iterations; final loss " << last.total << " -> " << a.out << "\n";
}

struct EditArgs {
  std::string profile, adapters, image, out = "edited.png", backend, estimator = "stub", tokenizer = "toy",
                                         save_inversion, records, method = "ours";
  int target_age = -1;
  int age_in = -1;
  ConfigOptions config;
};

void cmd_edit(const EditArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(parent_or_dot(a.out));
  AdapterCheckpoint ck = rec.stage("load", [&] { return load_checkpoint(a.adapters); });
  rec.input(fs::path(a.adapters) / "adapter_manifest.json");
  PipelineConfig base;
  const fs::path saved_config = fs::path(a.adapters) / "config.txt";
  if (a.config.config_path.empty() && fs::exists(saved_config)) {
    base = rec.stage("config", [&] { return load_config(saved_config); });
    rec.input(saved_config);
  }
  const PipelineConfig config = rec.stage("config", [&] { return a.config.resolve(base, rec); });
  rec.set_config(config);
  rec.input(a.profile);
  rec.input(a.image);
  const IdentityProfile profile = rec.stage("load", [&] { return load_profile(a.profile); });
  auto backend = rec.stage("backend", [&] {
    auto b = make_backend(a.backend.empty() ? ck.backend_id : a.backend);
    apply_checkpoint(ck, *b);
    return b;
  });
  auto tok = rec.stage("tokenizer", [&] { return make_tokenizer(a.tokenizer); });
  auto estimator = rec.stage("estimator", [&] { return make_estimator(a.estimator); });
  MemoryImageStore store;
  rec.stage("load", [&] { store.put(a.image, read_image(a.image)); });

  EditRequest req;
  req.input_image = a.image;
  if (a.age_in >= 0) req.alpha_in = a.age_in;
  req.alpha_tar = a.target_age;
  req.seed = config.seed;
  const TransformContext ctx{tok.get(), &store, estimator.get()};
  const TransformResult result = rec.stage("transform", [&] {
    return transform_age(req, profile, &ck.adapters, *backend, config, ctx);
  });
  rec.stage("write", [&] {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    write_image(a.out, result.image);
    fs::path sidecar = a.out;
    sidecar.replace_extension(".json");
    write_text(sidecar, edit_sidecar_json(result, req, config));
    rec.output(a.out);
    rec.output(sidecar);
    if (!a.save_inversion.empty()) {
      save_inversion(a.save_inversion, result.inversion);
      for (const auto& entry : fs::recursive_directory_iterator(a.save_inversion))
        if (entry.is_regular_file()) rec.output(entry.path());
    }
    if (!a.records.empty()) {
      const fs::path base_dir = parent_or_dot(a.records);
      RecordSpec spec{profile.token, a.method, record_path(a.image, base_dir), record_path(a.out, base_dir),
                      a.target_age};
      if (fs::path(a.records).has_parent_path()) fs::create_directories(fs::path(a.records).parent_path());
      std::ofstream recf(a.records, std::ios::app);
      recf << format_record_specs_jsonl({spec});
    }
  });
  out << result.bundle.p_in << " -> " << result.bundle.p_tar << "\n"
      << "wrote " << a.out << " (sha256 " << sha256_hex(result.image.to_rgb8()) << ")\n";
}

struct EvaluateArgs {
  std::string records, estimator = "stub", embedder = "stub", out, images_root;
  std::vector<int> target_ages;
};

void cmd_evaluate(const EvaluateArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(a.out);
  rec.input(a.records);
  const auto specs = rec.stage("load", [&] { return parse_record_specs_jsonl(read_text(a.records)); });
  auto estimator = rec.stage("estimator", [&] { return make_estimator(a.estimator); });
  auto embedder = rec.stage("embedder", [&] { return make_embedder(a.embedder); });
  const DirectoryImageStore store(a.images_root.empty() ? parent_or_dot(a.records) : fs::path(a.images_root));
  std::vector<int> ages = a.target_ages.empty() ? default_target_ages() : a.target_ages;
  for (const auto& s : specs)
    if (std::find(ages.begin(), ages.end(), s.target_age) == ages.end()) ages.push_back(s.target_age);
  const BenchmarkReport report =
      rec.stage("evaluate", [&] { return evaluate_records(specs, *estimator, *embedder, store, ages); });
  const auto written = rec.stage("write", [&] { return write_report(a.out, report, store); });
  rec.outputs_under(a.out, written);
  out << format_report_table(report);
}

struct AblateArgs {
  std::string flag, profile, regset, inputs, out, backend = "tiny", estimator = "stub", embedder = "stub",
                                                 tokenizer = "toy";
  std::vector<int> target_ages;
  ConfigOptions config;
};

void cmd_ablate(const AblateArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(a.out);
  const PipelineConfig base = rec.stage("config", [&] { return a.config.resolve(PipelineConfig{}, rec); });
  rec.set_config(base);
  const auto& flags = ablation_flags();
  if (std::find(flags.begin(), flags.end(), a.flag) == flags.end())
    throw StageError("config", "unknown ablation flag '" + a.flag + "'");
  rec.input(a.profile);
  rec.input(a.regset);
  rec.input(a.inputs);
  const IdentityProfile profile = rec.stage("load", [&] { return load_profile(a.profile); });
  const AgeLabeledManifest regset = rec.stage("load", [&] { return load_manifest(a.regset); });
  const auto inputs = rec.stage("load", [&] { return load_inputs(a.inputs); });
  auto estimator = rec.stage("estimator", [&] { return make_estimator(a.estimator); });
  auto embedder = rec.stage("embedder", [&] { return make_embedder(a.embedder); });
  auto tok = rec.stage("tokenizer", [&] { return make_tokenizer(a.tokenizer); });
  const DirectoryImageStore train_store(parent_or_dot(a.profile));
  const DirectoryImageStore input_store(parent_or_dot(a.inputs));
  const std::vector<int> ages = a.target_ages.empty() ? default_target_ages() : a.target_ages;

  BenchmarkReport combined;
  for (bool value : {true, false}) {
    const std::string label = a.flag + (value ? "=on" : "=off");
    PipelineConfig config = base;
    set_flag(config, a.flag, value);
    auto backend = rec.stage("backend", [&] { return make_backend(a.backend); });
    FinetuneResult trained = rec.stage("finetune:" + label, [&] {
      return finetune(profile, regset, config, *backend, config.lambda_id != 0.0 ? embedder.get() : nullptr,
                      train_store);
    });
    std::vector<BenchmarkItem> items;
    for (const auto& in : inputs) items.push_back({profile.token, profile, in.image_ref, in.age});
    const TransformContext ctx{tok.get(), &input_store, estimator.get()};
    NamedPipeline pipe{label, [&](const BenchmarkItem& item, const std::vector<int>& targets) {
                         EditRequest req{item.input_ref, item.alpha_in, targets.front(), config.seed};
                         auto results =
                             transform_ages(req, targets, item.profile, &trained.adapters, *backend, config, ctx);
                         std::vector<Image> images;
                         for (auto& r : results) images.push_back(std::move(r.image));
                         return images;
                       }};
    const BenchmarkReport report = rec.stage("benchmark:" + label, [&] {
      return run_benchmark(items, ages, {pipe}, *estimator, *embedder, input_store);
    });
    const fs::path dir = fs::path(a.out) / label;
    rec.outputs_under(dir, rec.stage("write", [&] { return write_report(dir, report, input_store); }));
    combined.target_ages = report.target_ages;
    combined.methods.push_back(label);
    combined.records.insert(combined.records.end(), report.records.begin(), report.records.end());
    combined.outputs.insert(combined.outputs.end(), report.outputs.begin(), report.outputs.end());
    combined.estimator_id = report.estimator_id;
    combined.embedder_id = report.embedder_id;
  }
  const std::string table = format_report_table(combined);
  rec.stage("write", [&] {
    write_text(fs::path(a.out) / "ablation.tsv", table);
    const Image grid = render_grid(combined, profile.token, input_store);
    if (grid.width > 0) {
      write_image(fs::path(a.out) / "ablation_grid.png", grid);
      rec.output(fs::path(a.out) / "ablation_grid.png");
    }
  });
  rec.output(fs::path(a.out) / "ablation.tsv");
  out << table;
}

struct MakeFixtureArgs {
  std::string out;
  long seed = 0;
};

void cmd_make_fixture(const MakeFixtureArgs& a, RunRecorder& rec, std::ostream& out) {
  rec.set_run_dir(a.out);
  rec.set_seed(a.seed);
  const Fixture f = rec.stage("build", [&] { return make_fixture(a.seed); });
  rec.set_config(f.config);
  const auto written = rec.stage("write", [&] { return write_fixture(f, a.out); });
  rec.outputs_under(a.out, written);
  out << "fixture " << f.hash() << " -> " << a.out << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ageshift: personalised facial age editing with diffusion models"};
  app.name("ageshift");
  app.require_subcommand(1);
  app.fallthrough(false);

  PrepareRegsetArgs prep;
  auto* c_prep = app.add_subcommand("prepare-regset", "Relabel a group-labelled set with an age estimator");
  c_prep->add_option("--in", prep.in, "Group-labelled manifest")->required();
  c_prep->add_option("--skip", prep.skip, "Skip-list file (one path per line)");
  c_prep->add_option("--estimator", prep.estimator, "Age estimator id")->capture_default_str();
  c_prep->add_option("--out", prep.out, "Output manifest")->required();
  c_prep->add_option("--images-root", prep.images_root, "Base for relative image paths (default: manifest dir)");
  c_prep->add_option("--workers", prep.workers, "Estimator worker threads")->capture_default_str();
  c_prep->add_option("--per-group", prep.per_group, "Sample this many entries per group first");
  c_prep->add_option("--seed", prep.seed, "Sampling seed")->capture_default_str();

  PromptsArgs pr;
  auto* c_prompts = app.add_subcommand("prompts", "Print the prompt bundle and replacement spans");
  c_prompts->add_option("--token", pr.token, "Identity token")->capture_default_str();
  c_prompts->add_option("--gender", pr.gender, "male or female")->capture_default_str();
  c_prompts->add_option("--age-in", pr.age_in, "Input age")->required();
  c_prompts->add_option("--age-tar", pr.age_tar, "Target age")->required();
  c_prompts->add_option("--age-ref", pr.age_ref, "Reference age (default: input age)");
  c_prompts->add_option("--age-reg", pr.age_reg, "Regularisation age (default: target age)");
  c_prompts->add_flag("--no-hyphens", pr.no_hyphens, "Write ages as '<a> year old'");
  c_prompts->add_flag("--no-ref-age", pr.no_ref_age, "Drop the age from the reference prompt");
  c_prompts->add_flag("--no-extreme-nouns", pr.no_extreme_nouns, "Never use 'baby' or 'elderly'");
  c_prompts->add_option("--tokenizer", pr.tokenizer, "Tokenizer id or vocabulary path")->capture_default_str();
  c_prompts->add_flag("--json", pr.as_json, "Print JSON");
  c_prompts->add_option("--run-dir", pr.run_dir, "Directory for the run manifest");

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "Personalise the denoiser on self-reference images");
  c_ft->add_option("--profile", ft.profile, "Identity profile (JSON)")->required();
  c_ft->add_option("--regset", ft.regset, "Regularisation manifest")->required();
  c_ft->add_option("--out", ft.out, "Checkpoint directory")->required();
  c_ft->add_option("--backend", ft.backend, "Denoiser backend id")->capture_default_str();
  c_ft->add_option("--embedder", ft.embedder, "Face embedder id")->capture_default_str();
  c_ft->add_option("--images-root", ft.images_root, "Base for relative image paths (default: profile dir)");
  ft.config.add_to(c_ft);

  EditArgs ed;
  auto* c_edit = app.add_subcommand("edit", "Edit a face to a target age");
  c_edit->add_option("--profile", ed.profile, "Identity profile (JSON)")->required();
  c_edit->add_option("--adapters", ed.adapters, "Checkpoint directory from finetune")->required();
  c_edit->add_option("--image", ed.image, "Input image (.png or .ppm)")->required();
  c_edit->add_option("--target-age", ed.target_age, "Target age")->required();
  c_edit->add_option("--age-in", ed.age_in, "Input age (default: estimated)");
  c_edit->add_option("--out", ed.out, "Output image")->capture_default_str();
  c_edit->add_option("--backend", ed.backend, "Denoiser backend id (default: from the checkpoint)");
  c_edit->add_option("--estimator", ed.estimator, "Age estimator id")->capture_default_str();
  c_edit->add_option("--tokenizer", ed.tokenizer, "Tokenizer id or vocabulary path")->capture_default_str();
  c_edit->add_option("--save-inversion", ed.save_inversion, "Also write the inversion to this directory");
  c_edit->add_option("--records", ed.records, "Append an evaluation record to this JSONL file");
  c_edit->add_option("--method", ed.method, "Method label for the record")->capture_default_str();
  ed.config.add_to(c_edit);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score edited images (AGE and ID)");
  c_eval->add_option("--records", ev.records, "Records JSONL (input, output, target_age)")->required();
  c_eval->add_option("--estimator", ev.estimator, "Age estimator id")->capture_default_str();
  c_eval->add_option("--embedder", ev.embedder, "Face embedder id")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Report directory")->required();
  c_eval->add_option("--images-root", ev.images_root, "Base for relative image paths (default: records dir)");
  c_eval->add_option("--target-ages", ev.target_ages, "Report columns (default: 1 5 8 12 17 25 35 45 60 80)")
      ->delimiter(',');

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Train and evaluate with one flag on and off");
  c_ab->add_option("--flag", ab.flag, "use_lora | use_refined_regset | use_hyphenated_age | use_ref_age | "
                                      "use_extreme_nouns")
      ->required();
  c_ab->add_option("--profile", ab.profile, "Identity profile (JSON)")->required();
  c_ab->add_option("--regset", ab.regset, "Regularisation manifest")->required();
  c_ab->add_option("--inputs", ab.inputs, "Input images manifest (path<TAB>age)")->required();
  c_ab->add_option("--out", ab.out, "Output directory")->required();
  c_ab->add_option("--backend", ab.backend, "Denoiser backend id")->capture_default_str();
  c_ab->add_option("--estimator", ab.estimator, "Age estimator id")->capture_default_str();
  c_ab->add_option("--embedder", ab.embedder, "Face embedder id")->capture_default_str();
  c_ab->add_option("--tokenizer", ab.tokenizer, "Tokenizer id or vocabulary path")->capture_default_str();
  c_ab->add_option("--target-ages", ab.target_ages, "Target ages (default: 1 5 8 12 17 25 35 45 60 80)")
      ->delimiter(',');
  ab.config.add_to(c_ab);

  MakeFixtureArgs mf;
  auto* c_mf = app.add_subcommand("make-fixture", "Write the deterministic toy fixture set");
  c_mf->add_option("--out", mf.out, "Output directory")->required();
  c_mf->add_option("--seed", mf.seed, "Fixture seed")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (!args.empty()) err << "ageshift: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  RunRecorder rec(command, args, err);
  try {
    if (chosen == c_prep) cmd_prepare_regset(prep, rec, out);
    else if (chosen == c_prompts) cmd_prompts(pr, rec, out);
    else if (chosen == c_ft) cmd_finetune(ft, rec, out);
    else if (chosen == c_edit) cmd_edit(ed, rec, out);
    else if (chosen == c_eval) cmd_evaluate(ev, rec, out);
    else if (chosen == c_ab) cmd_ablate(ab, rec, out);
    else if (chosen == c_mf) cmd_make_fixture(mf, rec, out);
    rec.finish("ok", "");
    return 0;
  } catch (const StageError& e) {
    err << "ageshift " << command << ": error in stage '" << e.stage() << "': " << e.what() << "\n";
    try {
      rec.finish("failed", e.what());
    } catch (const std::exception&) {
    }
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "ageshift " << command << ": " << e.what() << "\n";
    try {
      rec.finish("failed", e.what());
    } catch (const std::exception&) {
    }
    return kExitFailure;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

RunManifest load_run_manifest(const fs::path& path) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.status = j.at("status").get<std::string>();
    m.error = j.value("error", std::string());
    m.config_hash = j.value("config_hash", std::string());
    m.seed = j.value("seed", 0L);
    for (const auto& e : j.at("inputs")) m.inputs.push_back({e.at("path"), e.at("sha256")});
    for (const auto& e : j.at("outputs")) m.outputs.push_back({e.at("path"), e.at("sha256")});
    for (const auto& [k, v] : j.at("timings").items()) m.timings[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return m;
}

}  // namespace ageshift
