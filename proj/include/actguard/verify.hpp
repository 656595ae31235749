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

#ifndef ACTGUARD_VERIFY_HPP_
#define ACTGUARD_VERIFY_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "actguard/subspace.hpp"

namespace actguard {

struct VerifyOptions {
  std::uint64_t seed = 0;
  // Mutation check: fit projectors from the raw generalized basis.
  bool skip_orthonormalization = false;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::string detail;
  nlohmann::json counterexample;  // first failing instance, null on success
};

/// Runs every algebraic property of the pipeline on seeded random instances.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts);

// Random instance helpers shared with the test suites.
Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index d);
Eigen::MatrixXd random_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);
Eigen::VectorXd random_unit(std::mt19937_64& rng, Eigen::Index d);
CovariancePair random_covariance_pair(std::mt19937_64& rng, Eigen::Index d);

}  // namespace actguard

#endif  // ACTGUARD_VERIFY_HPP_
