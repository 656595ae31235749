// Copyright 2026 The actguard Authors.
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

#ifndef ACTGUARD_TOOLS_CLI_HPP_
#define ACTGUARD_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace actguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// The only environment override; everything else comes from flags or --config.
inline constexpr const char* kSeedEnvVar = "ACTGUARD_SEED";
inline constexpr int kReportFormatVersion = 1;

struct ToolConfig {
  double top_frac = 0.125;
  int k_eigen = 256;
  double beta = 4.5;
  double eps = 1e-8;
  double delta_rel = 1e-6;
  int pca_p = 50;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // Keys absent from `j` keep their current value; unknown keys are rejected.
  void merge(const nlohmann::json& j);
  void validate() const;
};

ToolConfig load_config_file(const std::filesystem::path& file);

/// Entry point behind the `actguard` executable. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace actguard::cli

#endif  // ACTGUARD_TOOLS_CLI_HPP_
