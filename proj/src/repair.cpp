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

#include "actguard/repair.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace actguard {

void RepairConfig::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) {
    throw std::invalid_argument("beta must be finite and >= 0 (got " + std::to_string(beta) + ")");
  }
  if (!(degenerate_weight >= 0.0 && degenerate_weight <= 1.0)) {
    throw std::invalid_argument("degenerate_weight must lie in [0, 1]");
  }
}

Eigen::VectorXd repair_activation(const Eigen::VectorXd& h, const SafetySubspace& sub,
                                  const RepairConfig& cfg) {
  if (h.size() != sub.dim()) {
    throw std::invalid_argument("repair_activation: activation has dim " +
                                std::to_string(h.size()) + ", subspace has dim " +
                                std::to_string(sub.dim()));
  }
  return sub.project(h) + cfg.beta * sub.complement(sub.benign_mean);
}

double fusion_weight(const Eigen::VectorXd& h, const Eigen::VectorXd& h_vis_p,
                     const Eigen::VectorXd& h_txt_p, const RepairConfig& cfg) {
  if (h.size() != h_vis_p.size() || h.size() != h_txt_p.size()) {
    throw std::invalid_argument("fusion_weight: dimension mismatch");
  }
  const double alpha = (h_vis_p - h).norm();
  const double m = (h_txt_p - h).norm();
  const double total = alpha + m;
  if (total == 0.0) return cfg.degenerate_weight;
  return alpha / total;
}

Eigen::VectorXd fuse(const Eigen::VectorXd& h_vis_p, const Eigen::VectorXd& h_txt_p, double w) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw std::invalid_argument("fuse: weight " + std::to_string(w) + " outside [0, 1]");
  }
  if (h_vis_p.size() != h_txt_p.size()) throw std::invalid_argument("fuse: dimension mismatch");
  if (w == 1.0) return h_vis_p;
  if (w == 0.0) return h_txt_p;
  return w * h_vis_p + (1.0 - w) * h_txt_p;
}

RepairedActivation repair_dual(const Eigen::VectorXd& h, const SafetySubspace& sub_vis,
                               const SafetySubspace& sub_txt, const RepairConfig& cfg) {
  if (sub_vis.dim() != sub_txt.dim()) {
    throw std::invalid_argument("repair_dual: visual subspace has dim " +
                                std::to_string(sub_vis.dim()) + ", textual has dim " +
                                std::to_string(sub_txt.dim()));
  }
  if (sub_vis.layer != sub_txt.layer) {
    throw std::invalid_argument("repair_dual: visual subspace is for layer " +
                                std::to_string(sub_vis.layer) + ", textual for layer " +
                                std::to_string(sub_txt.layer));
  }
  RepairedActivation out;
  out.h_vis_prime = repair_activation(h, sub_vis, cfg);
  out.h_txt_prime = repair_activation(h, sub_txt, cfg);
  out.visual_magnitude = (out.h_vis_prime - h).norm();
  out.textual_magnitude = (out.h_txt_prime - h).norm();
  out.w_vis = fusion_weight(h, out.h_vis_prime, out.h_txt_prime, cfg);
  out.h_prime = fuse(out.h_vis_prime, out.h_txt_prime, out.w_vis);
  return out;
}

}  // namespace actguard
