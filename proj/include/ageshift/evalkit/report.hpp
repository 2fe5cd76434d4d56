// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ageshift/core/types.hpp"
#include "ageshift/evalkit/metrics.hpp"
#include "ageshift/regset/regset.hpp"

namespace ageshift {

// 1, 5, 8, 12, 17, 25, 35, 45, 60, 80.
const std::vector<int>& default_target_ages();

// What to score: an edited image and where it came from.
struct RecordSpec {
  std::string identity;
  std::string method = "ours";
  std::string input_ref;
  std::string output_ref;
  int target_age = 0;
};

struct FailedEdit {
  std::string identity;
  std::string method;
  std::string input_ref;
  int target_age = 0;
  std::string error;
};

struct BenchmarkOutput {
  std::string identity;
  std::string method;
  std::string input_ref;
  int target_age = 0;
  Image image;
};

struct BenchmarkReport {
  std::vector<int> target_ages;
  std::vector<std::string> methods;
  std::vector<EvalRecord> records;
  std::vector<FailedEdit> failures;
  std::vector<Exclusion> exclusions;
  std::vector<BenchmarkOutput> outputs;
  std::string estimator_id;
  std::string embedder_id;
};

// Scores every spec: estimated age of the output and 1 - cosine between the
// input and output embeddings. Embedding failures go to `exclusions`;
// estimator or loading failures to `failures`.
BenchmarkReport evaluate_records(const std::vector<RecordSpec>& specs, const AgeEstimator& estimator,
                                 const FaceEmbedder& embedder, const ImageStore& images,
                                 std::vector<int> target_ages = {});

struct BenchmarkItem {
  std::string identity;
  IdentityProfile profile;
  std::string input_ref;
  std::optional<int> alpha_in;
};

// Edits one input to every requested age; images in target order.
using EditPipeline =
    std::function<std::vector<Image>(const BenchmarkItem& item, const std::vector<int>& target_ages)>;

struct NamedPipeline {
  std::string method;
  EditPipeline run;
};

// Edits every item to every target age with every pipeline, then scores the
// outputs. A failing edit marks its cells missing instead of aborting.
BenchmarkReport run_benchmark(const std::vector<BenchmarkItem>& items, const std::vector<int>& target_ages,
                              const std::vector<NamedPipeline>& pipelines, const AgeEstimator& estimator,
                              const FaceEmbedder& embedder, const ImageStore& images);

// Tab-separated: "Metric Method <ages...> ALL", AGE rows then ID rows, one
// per method. Missing cells are "-".
std::string format_report_table(const BenchmarkReport& report);
std::string format_records_jsonl(const std::vector<EvalRecord>& records);
std::vector<RecordSpec> parse_record_specs_jsonl(const std::string& text);
std::string format_record_specs_jsonl(const std::vector<RecordSpec>& specs);

// Rows = methods, columns = input image followed by the target ages.
Image render_grid(const BenchmarkReport& report, const std::string& identity, const ImageStore& images);

// report.tsv, records.jsonl, failures.jsonl, exclusions.jsonl,
// grid_<identity>.png and outputs/<output_ref> for in-memory outputs. Returns written paths relative to dir.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const BenchmarkReport& report,
                                                const ImageStore& images);

}  // namespace ageshift
