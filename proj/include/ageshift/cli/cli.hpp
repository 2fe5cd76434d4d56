// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ageshift {

// Entry point of the `ageshift` tool. Returns 0 on success, 1 when a
// pipeline stage fails and 2 on a usage error.
int run_cli(int argc, char** argv);
// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ArtifactEntry {
  std::string path;
  std::string sha256;
};

// Contents of run_manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string status;
  std::string error;
  std::string config_hash;
  long seed = 0;
  std::vector<ArtifactEntry> inputs;
  std::vector<ArtifactEntry> outputs;
  std::map<std::string, double> timings;
};

RunManifest load_run_manifest(const std::filesystem::path& path);

}  // namespace ageshift
