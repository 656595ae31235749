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

// Kernel-based token attribution.
//
// Visual tokens are scored by how strongly their RBF similarity to the
// textual tokens deviates from the per-token mean similarity (column-centered
// cross kernel). Textual tokens are scored against their own sequence with a
// doubly centered self kernel. Both scores are min-max normalized into [0, 1].

#ifndef ACTGUARD_ATTRIBUTION_HPP_
#define ACTGUARD_ATTRIBUTION_HPP_

#include <vector>

#include <Eigen/Dense>

#include "actguard/activation_store.hpp"

namespace actguard {

inline constexpr double kDefaultEps = 1e-8;

enum class KernelMode { cross, self };

struct AttributionScores {
  Eigen::VectorXd scores;  // MI, one entry per token, in [0, 1]
  Modality modality = Modality::visual;
  // Every token index ordered by descending score, lower index first on ties.
  std::vector<int> selected;
};

struct RbfKernel {
  Eigen::MatrixXd K;
  double sigma = 0.0;
};

struct KernelIntermediate {
  Eigen::MatrixXd D;
  double sigma = 0.0;
  Eigen::MatrixXd K;
  Eigen::MatrixXd K_centered;
};

/// D(i, j) = ||a_i - b_j||^2. Throws std::invalid_argument on column mismatch.
Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Median-bandwidth RBF kernel. sigma^2 = median(D) / 2, where the median runs
/// over all entries in cross mode and over off-diagonal entries in self mode.
RbfKernel rbf_from_dist(const Eigen::MatrixXd& D, KernelMode mode, double eps = kDefaultEps);

/// K (I - 11^T / m): removes each row's mean.
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& K);

/// H K H with H = I - 11^T / m. Throws on non-square input.
Eigen::MatrixXd center_double(const Eigen::MatrixXd& K);

/// Squared row norms, min-max normalized. All-equal rows give all zeros.
Eigen::VectorXd mi_scores(const Eigen::MatrixXd& K_centered, double eps = kDefaultEps);

KernelIntermediate visual_kernel(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                                 double eps = kDefaultEps);
KernelIntermediate textual_kernel(const Eigen::MatrixXd& T, double eps = kDefaultEps);

AttributionScores attribute_visual(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                                   double eps = kDefaultEps);
AttributionScores attribute_textual(const Eigen::MatrixXd& T, double eps = kDefaultEps);

// Record overloads check modalities and throw std::invalid_argument on misuse.
AttributionScores attribute_visual(const ActivationMatrix& V, const ActivationMatrix& T,
                                   double eps = kDefaultEps);
AttributionScores attribute_textual(const ActivationMatrix& T, double eps = kDefaultEps);

/// Indices ordered by descending score; ties go to the lower index.
std::vector<int> rank_tokens(const Eigen::VectorXd& scores);

/// Top max(1, ceil(frac * n)) tokens. Requires 0 < frac <= 1.
std::vector<int> select_top_tokens(const AttributionScores& scores, double frac);

}  // namespace actguard

#endif  // ACTGUARD_ATTRIBUTION_HPP_
