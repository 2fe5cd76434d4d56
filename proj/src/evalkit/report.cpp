// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/evalkit/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ageshift/error.hpp"

namespace ageshift {

namespace fs = std::filesystem;

namespace {

std::string cell(std::optional<double> v, const char* fmt) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, *v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s;
}

void add_method(std::vector<std::string>& methods, const std::string& m) {
  if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
}

}  // namespace

const std::vector<int>& default_target_ages() {
  static const std::vector<int> ages{1, 5, 8, 12, 17, 25, 35, 45, 60, 80};
  return ages;
}

BenchmarkReport evaluate_records(const std::vector<RecordSpec>& specs, const AgeEstimator& estimator,
                                 const FaceEmbedder& embedder, const ImageStore& images,
                                 std::vector<int> target_ages) {
  BenchmarkReport report;
  report.estimator_id = estimator.id();
  report.embedder_id = embedder.id();
  std::set<int> seen;
  for (const auto& s : specs) {
    add_method(report.methods, s.method);
    seen.insert(s.target_age);
    EvalRecord r{s.identity, s.method, s.input_ref, s.output_ref, s.target_age, 0, std::nullopt};
    Image input, output;
    try {
      input = images.load(s.input_ref);
      output = images.load(s.output_ref);
      r.estimated_age = checked_estimate(estimator, output);
    } catch (const std::exception& e) {
      report.failures.push_back({s.identity, s.method, s.input_ref, s.target_age, e.what()});
      continue;
    }
    const IdMetric id = id_metric({{s.input_ref, s.output_ref, input, output}}, embedder);
    r.id_distance = id.distances.front();
    report.exclusions.insert(report.exclusions.end(), id.excluded.begin(), id.excluded.end());
    report.records.push_back(std::move(r));
  }
  if (target_ages.empty()) target_ages.assign(seen.begin(), seen.end());
  report.target_ages = std::move(target_ages);
  return report;
}

BenchmarkReport run_benchmark(const std::vector<BenchmarkItem>& items, const std::vector<int>& target_ages,
                              const std::vector<NamedPipeline>& pipelines, const AgeEstimator& estimator,
                              const FaceEmbedder& embedder, const ImageStore& images) {
  MemoryImageStore produced;
  std::vector<RecordSpec> specs;
  std::vector<BenchmarkOutput> outputs;
  std::vector<FailedEdit> failures;
  for (const auto& pipe : pipelines) {
    for (const auto& item : items) {
      std::vector<Image> edited;
      try {
        edited = pipe.run(item, target_ages);
        if (edited.size() != target_ages.size())
          throw StateError("pipeline returned " + std::to_string(edited.size()) + " images for " +
                           std::to_string(target_ages.size()) + " target ages");
      } catch (const std::exception& e) {
        for (int age : target_ages) failures.push_back({item.identity, pipe.method, item.input_ref, age, e.what()});
        continue;
      }
      for (std::size_t k = 0; k < target_ages.size(); ++k) {
        const std::string ref = sanitize(item.identity) + "/" + sanitize(pipe.method) + "/" +
                                fs::path(item.input_ref).stem().string() + "_" + std::to_string(target_ages[k]) +
                                ".png";
        produced.put(ref, edited[k]);
        specs.push_back({item.identity, pipe.method, item.input_ref, ref, target_ages[k]});
        outputs.push_back({item.identity, pipe.method, item.input_ref, target_ages[k], edited[k]});
      }
    }
  }

  // Inputs come from `images`, outputs from the in-memory set.
  struct Union : ImageStore {
    const ImageStore& a;
    const MemoryImageStore& b;
    Union(const ImageStore& x, const MemoryImageStore& y) : a(x), b(y) {}
    Image load(const std::string& ref) const override { return b.contains(ref) ? b.load(ref) : a.load(ref); }
  } store(images, produced);

  BenchmarkReport report = evaluate_records(specs, estimator, embedder, store, target_ages);
  report.methods.clear();
  for (const auto& p : pipelines) add_method(report.methods, p.method);
  report.failures.insert(report.failures.begin(), failures.begin(), failures.end());
  report.outputs = std::move(outputs);
  return report;
}

std::string format_report_table(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "Metric\tMethod";
  for (int t : report.target_ages) out << "\t" << t;
  out << "\tALL\n";
  for (const char* metric : {"AGE", "ID"}) {
    const bool is_age = std::string(metric) == "AGE";
    for (const auto& method : report.methods) {
      std::map<int, std::pair<double, std::size_t>> acc;
      double all = 0.0;
      std::size_t n = 0;
      for (const auto& r : report.records) {
        if (r.method != method) continue;
        double v;
        if (is_age) {
          v = std::abs(static_cast<double>(r.estimated_age - r.target_age));
        } else {
          if (!r.id_distance) continue;
          v = *r.id_distance;
        }
        acc[r.target_age].first += v;
        ++acc[r.target_age].second;
        all += v;
        ++n;
      }
      const char* fmt = is_age ? "%.2f" : "%.4f";
      out << metric << "\t" << method;
      for (int t : report.target_ages) {
        auto it = acc.find(t);
        out << "\t"
            << cell(it == acc.end() ? std::nullopt
                                    : std::optional<double>(it->second.first / static_cast<double>(it->second.second)),
                    fmt);
      }
      out << "\t" << cell(n ? std::optional<double>(all / static_cast<double>(n)) : std::nullopt, fmt) << "\n";
    }
  }
  return out.str();
}

std::string format_records_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["identity"] = r.identity;
    j["method"] = r.method;
    j["input"] = r.input_ref;
    j["output"] = r.output_ref;
    j["target_age"] = r.target_age;
    j["estimated_age"] = r.estimated_age;
    if (r.id_distance)
      j["id_distance"] = *r.id_distance;
    else
      j["id_distance"] = nullptr;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<RecordSpec> parse_record_specs_jsonl(const std::string& text) {
  std::vector<RecordSpec> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RecordSpec s;
      s.identity = j.value("identity", std::string());
      s.method = j.value("method", std::string("ours"));
      s.input_ref = j.at("input").get<std::string>();
      s.output_ref = j.at("output").get<std::string>();
      s.target_age = j.at("target_age").get<int>();
      if (!age_in_range(s.target_age)) throw ValidationError("target_age outside [0, 100]");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("records line " + std::to_string(line_no) + ": " + e.what(), static_cast<long>(line_no));
    } catch (const ValidationError& e) {
      throw ParseError("records line " + std::to_string(line_no) + ": " + e.what(), static_cast<long>(line_no));
    }
  }
  return out;
}

std::string format_record_specs_jsonl(const std::vector<RecordSpec>& specs) {
  std::string out;
  for (const auto& s : specs) {
    nlohmann::ordered_json j;
    j["identity"] = s.identity;
    j["method"] = s.method;
    j["input"] = s.input_ref;
    j["output"] = s.output_ref;
    j["target_age"] = s.target_age;
    out += j.dump() + "\n";
  }
  return out;
}

Image render_grid(const BenchmarkReport& report, const std::string& identity, const ImageStore& images) {
  std::vector<std::vector<Image>> rows;
  std::map<std::pair<std::string, int>, const BenchmarkOutput*> by_cell;
  for (const auto& o : report.outputs)
    if (o.identity == identity) by_cell.emplace(std::make_pair(o.method, o.target_age), &o);
  std::map<std::pair<std::string, int>, std::string> by_ref;
  std::string input_ref;
  for (const auto& r : report.records)
    if (r.identity == identity) {
      by_ref.emplace(std::make_pair(r.method, r.target_age), r.output_ref);
      if (input_ref.empty()) input_ref = r.input_ref;
    }
  for (const auto& o : report.outputs)
    if (o.identity == identity && input_ref.empty()) input_ref = o.input_ref;
  for (const auto& method : report.methods) {
    std::vector<Image> row;
    Image in;
    if (!input_ref.empty()) {
      try {
        in = images.load(input_ref);
      } catch (const std::exception&) {
      }
    }
    row.push_back(in);
    for (int t : report.target_ages) {
      Image img;
      if (auto it = by_cell.find({method, t}); it != by_cell.end()) {
        img = it->second->image;
      } else if (auto jt = by_ref.find({method, t}); jt != by_ref.end()) {
        try {
          img = images.load(jt->second);
        } catch (const std::exception&) {
        }
      }
      row.push_back(std::move(img));
    }
    rows.push_back(std::move(row));
  }
  return tile_grid(rows);
}

std::vector<fs::path> write_report(const fs::path& dir, const BenchmarkReport& report, const ImageStore& images) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto text = [&](const fs::path& rel, const std::string& body) {
    std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / rel).string());
    out << body;
    written.push_back(rel);
  };
  text("report.tsv", "# estimator=" + report.estimator_id + " embedder=" + report.embedder_id + "\n" +
                         format_report_table(report));
  text("records.jsonl", format_records_jsonl(report.records));
  std::string failures, exclusions;
  for (const auto& f : report.failures) {
    nlohmann::ordered_json j{{"identity", f.identity}, {"method", f.method}, {"input", f.input_ref},
                             {"target_age", f.target_age}, {"error", f.error}};
    failures += j.dump() + "\n";
  }
  for (const auto& e : report.exclusions) {
    nlohmann::ordered_json j{{"input", e.input_ref}, {"output", e.output_ref}, {"reason", e.reason}};
    exclusions += j.dump() + "\n";
  }
  text("failures.jsonl", failures);
  text("exclusions.jsonl", exclusions);

  for (const auto& o : report.outputs) {
    auto it = std::find_if(report.records.begin(), report.records.end(), [&](const EvalRecord& r) {
      return r.identity == o.identity && r.method == o.method && r.input_ref == o.input_ref &&
             r.target_age == o.target_age;
    });
    if (it == report.records.end()) continue;
    const fs::path rel = fs::path("outputs") / it->output_ref;
    fs::create_directories((dir / rel).parent_path());
    write_image(dir / rel, o.image);
    written.push_back(rel);
  }

  std::set<std::string> identities;
  for (const auto& r : report.records) identities.insert(r.identity);
  for (const auto& o : report.outputs) identities.insert(o.identity);
  for (const auto& id : identities) {
    const Image grid = render_grid(report, id, images);
    if (grid.width == 0) continue;
    const fs::path rel = "grid_" + sanitize(id.empty() ? "all" : id) + ".png";
    write_image(dir / rel, grid);
    written.push_back(rel);
  }
  return written;
}

}  // namespace ageshift
