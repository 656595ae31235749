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

// Layer-localization statistics: how well benign and malicious samples
// separate at each layer, and how similar samples look to each other.

#ifndef ACTGUARD_DIAGNOSTICS_HPP_
#define ACTGUARD_DIAGNOSTICS_HPP_

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "actguard/activation_store.hpp"

namespace actguard {

inline constexpr int kDefaultPcaComponents = 50;

// Labels: 0 = benign, 1 = malicious.
using BinaryLabels = std::vector<int>;

struct LayerMetrics {
  double silhouette = 0.0;
  double fisher = 0.0;
  double mahalanobis = 0.0;
  int n_benign = 0;
  int n_malicious = 0;
};

struct LayerReport {
  std::map<int, LayerMetrics> per_layer;
  std::map<int, LayerMetrics> normalized;
  std::vector<int> layers;             // ascending
  std::vector<double> combined_score;  // aligned with `layers`
  int selected_layer = 0;

  nlohmann::json to_json() const;
};

enum class ComponentTag { ffn, mhsa };

struct SimilarityReport {
  Eigen::MatrixXd matrix;
  double mean_offdiag = 0.0;
  ComponentTag component_tag = ComponentTag::ffn;
};

/// Token mean.
Eigen::VectorXd pool_sample(const ActivationMatrix& A);

/// Scores on the top principal components of the centered data, p clamped to
/// min(p, d, N - 1). Component signs follow the largest-magnitude-positive rule.
Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& X, int p);

double silhouette(const Eigen::MatrixXd& X, const BinaryLabels& labels);

/// trace(S_between) / (trace(S_within) + 1e-12).
double fisher_separation(const Eigen::MatrixXd& X, const BinaryLabels& labels);

/// Distance between class means under the pooled within-class covariance
/// plus a delta_rel * trace / p ridge.
double mahalanobis_gap(const Eigen::MatrixXd& X, const BinaryLabels& labels,
                       double delta_rel = 1e-6);

SimilarityReport pairwise_cosine(const Eigen::MatrixXd& X,
                                 ComponentTag tag = ComponentTag::ffn);

using LayerDumps = std::map<int, std::pair<std::vector<ActivationMatrix>,
                                           std::vector<ActivationMatrix>>>;

/// Pools each record to one point, reduces with PCA and scores every layer.
/// The selected layer maximizes the mean of the min-max normalized metrics;
/// ties go to the lowest layer.
LayerReport layer_profile(const LayerDumps& dumps, int p = kDefaultPcaComponents,
                          double delta_rel = 1e-6);

}  // namespace actguard

#endif  // ACTGUARD_DIAGNOSTICS_HPP_
