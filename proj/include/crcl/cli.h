// Copyright 2026 The CRCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef CRCL_CLI_H_
#define CRCL_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crcl::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kValidation = 3,
  kNumeric = 4,
};

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string code_version;
  std::vector<std::string> outputs;
  double wall_time_seconds = 0.0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  // Hash of everything except the wall time.
  std::string hash() const;
};

std::string code_version();

// Sibling paths used by gen-data: "ds.bin" -> "ds.val.bin", "ds.test.bin",
// "ds.manifest.json".
std::filesystem::path sibling(const std::filesystem::path& data,
                              const std::string& suffix);

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace crcl::cli

#endif  // CRCL_CLI_H_
