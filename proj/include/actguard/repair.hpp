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

#ifndef ACTGUARD_REPAIR_HPP_
#define ACTGUARD_REPAIR_HPP_

#include <Eigen/Dense>

#include "actguard/subspace.hpp"

namespace actguard {

struct RepairConfig {
  double beta = 4.5;               // weight of the benign-mean term
  double degenerate_weight = 0.5;  // fusion weight when neither side intervenes

  void validate() const;
};

struct RepairedActivation {
  Eigen::VectorXd h_prime;
  double w_vis = 0.5;
  Eigen::VectorXd h_vis_prime;
  Eigen::VectorXd h_txt_prime;
  double visual_magnitude = 0.0;   // ||h_vis_prime - h||
  double textual_magnitude = 0.0;  // ||h_txt_prime - h||
};

/// h' = P h + beta (I - P) mu_b.
Eigen::VectorXd repair_activation(const Eigen::VectorXd& h, const SafetySubspace& sub,
                                  const RepairConfig& cfg);

/// alpha / (alpha + m) with alpha = ||h_vis_p - h||, m = ||h_txt_p - h||.
double fusion_weight(const Eigen::VectorXd& h, const Eigen::VectorXd& h_vis_p,
                     const Eigen::VectorXd& h_txt_p, const RepairConfig& cfg);

/// w h_vis_p + (1 - w) h_txt_p. Throws std::invalid_argument unless w in [0, 1].
Eigen::VectorXd fuse(const Eigen::VectorXd& h_vis_p, const Eigen::VectorXd& h_txt_p, double w);

/// Repairs h against both subspaces in parallel and fuses the results.
RepairedActivation repair_dual(const Eigen::VectorXd& h, const SafetySubspace& sub_vis,
                               const SafetySubspace& sub_txt, const RepairConfig& cfg);

}  // namespace actguard

#endif  // ACTGUARD_REPAIR_HPP_
