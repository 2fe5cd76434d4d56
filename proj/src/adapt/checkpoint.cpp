// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ageshift/error.hpp"
#include "ageshift/tensor/npy.hpp"

namespace ageshift {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "adapter_manifest.json";

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string format_training_log(const std::vector<TrainingStep>& log) {
  std::string out = "step\ttotal\trec_ref\trec_reg\tntxent\n";
  for (const auto& s : log)
    out += std::to_string(s.step) + "\t" + fmt(s.total) + "\t" + fmt(s.rec_ref) + "\t" + fmt(s.rec_reg) + "\t" +
           fmt(s.ntxent) + "\n";
  return out;
}

std::vector<fs::path> save_checkpoint(const fs::path& dir, const FinetuneResult& result, DenoiserBackend& backend,
                                      const PipelineConfig& config) {
  fs::create_directories(dir / "adapters");
  std::vector<fs::path> written;
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["backend"] = backend.id();
  j["rank"] = result.adapters.rank;
  j["scale"] = result.adapters.scale;
  j["config_hash"] = config_hash(config);
  j["token"] = result.adapters.token;
  j["token_ids"] = result.adapters.token_ids;
  j["full_finetune"] = result.full_finetune;
  j["targets"] = nlohmann::ordered_json::array();
  for (const auto& pair : result.adapters.layers) {
    j["targets"].push_back(pair.layer);
    const fs::path a = fs::path("adapters") / (pair.layer + ".A.npy");
    const fs::path b = fs::path("adapters") / (pair.layer + ".B.npy");
    save_npy(dir / a, pair.a.value);
    save_npy(dir / b, pair.b.value);
    written.push_back(a);
    written.push_back(b);
  }
  if (result.adapters.token_embedding.value.size() > 0) {
    save_npy(dir / "token_embedding.npy", result.adapters.token_embedding.value);
    written.emplace_back("token_embedding.npy");
  }
  if (result.full_finetune) {
    fs::create_directories(dir / "weights");
    j["weights"] = nlohmann::ordered_json::array();
    for (const auto* p : backend.base_parameters()) {
      const fs::path w = fs::path("weights") / (p->name + ".npy");
      save_npy(dir / w, p->value);
      j["weights"].push_back(p->name);
      written.push_back(w);
    }
  }
  {
    std::ofstream log(dir / "training_log.tsv", std::ios::trunc);
    log << format_training_log(result.log);
    written.emplace_back("training_log.tsv");
  }
  std::ofstream out(dir / kManifest, std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kManifest).string());
  out << j.dump(2) << "\n";
  written.emplace_back(kManifest);
  return written;
}

AdapterCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw IoError("no adapter manifest in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("adapter manifest: ") + e.what(), 0);
  }
  AdapterCheckpoint ck;
  try {
    ck.backend_id = j.at("backend").get<std::string>();
    ck.config_hash = j.value("config_hash", std::string());
    ck.full_finetune = j.value("full_finetune", false);
    ck.adapters.rank = j.at("rank").get<int>();
    ck.adapters.scale = j.at("scale").get<double>();
    ck.adapters.token = j.value("token", std::string());
    ck.adapters.token_ids = j.value("token_ids", std::vector<int>{});
    for (const auto& name : j.at("targets")) {
      LoraPair pair;
      pair.layer = name.get<std::string>();
      pair.a.name = pair.layer + ".A";
      pair.b.name = pair.layer + ".B";
      pair.a.value = load_npy(dir / "adapters" / (pair.layer + ".A.npy"));
      pair.b.value = load_npy(dir / "adapters" / (pair.layer + ".B.npy"));
      if (pair.a.value.cols() != ck.adapters.rank || pair.b.value.rows() != ck.adapters.rank)
        throw ShapeError("checkpoint: adapter rank mismatch for layer '" + pair.layer + "'");
      ck.adapters.layers.push_back(std::move(pair));
    }
    if (!ck.adapters.token_ids.empty()) {
      ck.adapters.token_embedding.name = "token_embedding";
      ck.adapters.token_embedding.value = load_npy(dir / "token_embedding.npy");
    }
    if (ck.full_finetune)
      for (const auto& name : j.at("weights")) {
        const std::string n = name.get<std::string>();
        ck.full_weights[n] = load_npy(dir / "weights" / (n + ".npy"));
      }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("adapter manifest: ") + e.what(), 0);
  }
  if (std::ifstream log(dir / "training_log.tsv"); log) {
    std::string line;
    std::getline(log, line);
    std::size_t line_no = 1;
    while (std::getline(log, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream fields(line);
      TrainingStep s;
      if (!(fields >> s.step >> s.total >> s.rec_ref >> s.rec_reg >> s.ntxent))
        throw ParseError("training_log.tsv: malformed line " + std::to_string(line_no), line_no);
      ck.log.push_back(s);
    }
  }
  return ck;
}

void apply_checkpoint(AdapterCheckpoint& checkpoint, DenoiserBackend& backend) {
  if (!checkpoint.full_weights.empty()) {
    for (auto* p : backend.base_parameters()) {
      auto it = checkpoint.full_weights.find(p->name);
      if (it == checkpoint.full_weights.end()) throw ShapeError("checkpoint lacks weight '" + p->name + "'");
      if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
        throw ShapeError("checkpoint weight '" + p->name + "' has the wrong shape");
      p->value = it->second;
    }
  }
  backend.attach(checkpoint.adapters);
}

}  // namespace ageshift
