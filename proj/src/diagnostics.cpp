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

#include "actguard/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "actguard/subspace.hpp"

namespace actguard {

namespace {

struct ClassSplit {
  std::vector<Eigen::Index> benign;
  std::vector<Eigen::Index> malicious;
};

ClassSplit split_labels(const Eigen::MatrixXd& X, const BinaryLabels& labels,
                        const char* what) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(X.rows()) + " rows");
  }
  ClassSplit s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) {
      s.benign.push_back(static_cast<Eigen::Index>(i));
    } else if (labels[i] == 1) {
      s.malicious.push_back(static_cast<Eigen::Index>(i));
    } else {
      throw std::invalid_argument(std::string(what) + ": labels must be 0 or 1");
    }
  }
  return s;
}

void require_min_class(const ClassSplit& s, std::size_t min_size, const char* what) {
  if (s.benign.size() < min_size || s.malicious.size() < min_size) {
    throw std::invalid_argument(std::string(what) + ": each class needs at least " +
                                std::to_string(min_size) + " sample(s) (benign " +
                                std::to_string(s.benign.size()) + ", malicious " +
                                std::to_string(s.malicious.size()) + ")");
  }
}

Eigen::VectorXd class_mean(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(X.cols());
  for (auto i : idx) mu += X.row(i).transpose();
  return mu / static_cast<double>(idx.size());
}

Eigen::MatrixXd within_scatter(const Eigen::MatrixXd& X, const ClassSplit& s,
                               const Eigen::VectorXd& mu_b, const Eigen::VectorXd& mu_m) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  for (auto i : s.benign) {
    const Eigen::VectorXd r = X.row(i).transpose() - mu_b;
    S.noalias() += r * r.transpose();
  }
  for (auto i : s.malicious) {
    const Eigen::VectorXd r = X.row(i).transpose() - mu_m;
    S.noalias() += r * r.transpose();
  }
  return S;
}

}  // namespace

Eigen::VectorXd pool_sample(const ActivationMatrix& A) {
  if (A.tokens() < 1) throw std::invalid_argument("pool_sample: record has no tokens");
  return A.as_double().colwise().mean().transpose();
}

Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& X, int p) {
  if (X.rows() < 2) {
    throw std::invalid_argument("pca_reduce: need at least 2 samples, got " +
                                std::to_string(X.rows()));
  }
  const Eigen::Index limit = std::min<Eigen::Index>(X.cols(), X.rows() - 1);
  const Eigen::Index keep = std::clamp<Eigen::Index>(p, 1, limit);
  const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  Eigen::MatrixXd components = svd.matrixV().leftCols(keep);
  fix_column_signs(components);
  return centered * components;
}

double silhouette(const Eigen::MatrixXd& X, const BinaryLabels& labels) {
  const ClassSplit s = split_labels(X, labels, "silhouette");
  require_min_class(s, 1, "silhouette");
  if (X.rows() < 3) throw std::invalid_argument("silhouette: need at least 3 samples");

  const Eigen::Index n = X.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& own = labels[static_cast<std::size_t>(i)] == 0 ? s.benign : s.malicious;
    const auto& other = labels[static_cast<std::size_t>(i)] == 0 ? s.malicious : s.benign;
    if (own.size() == 1) continue;
    double a = 0.0;
    for (auto j : own) {
      if (j != i) a += (X.row(i) - X.row(j)).norm();
    }
    a /= static_cast<double>(own.size() - 1);
    double b = 0.0;
    for (auto j : other) b += (X.row(i) - X.row(j)).norm();
    b /= static_cast<double>(other.size());
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double fisher_separation(const Eigen::MatrixXd& X, const BinaryLabels& labels) {
  const ClassSplit s = split_labels(X, labels, "fisher_separation");
  require_min_class(s, 2, "fisher_separation");
  const Eigen::VectorXd mu = X.colwise().mean().transpose();
  const Eigen::VectorXd mu_b = class_mean(X, s.benign);
  const Eigen::VectorXd mu_m = class_mean(X, s.malicious);
  const double between = static_cast<double>(s.benign.size()) * (mu_b - mu).squaredNorm() +
                         static_cast<double>(s.malicious.size()) * (mu_m - mu).squaredNorm();
  double within = 0.0;
  for (auto i : s.benign) within += (X.row(i).transpose() - mu_b).squaredNorm();
  for (auto i : s.malicious) within += (X.row(i).transpose() - mu_m).squaredNorm();
  return between / (within + 1e-12);
}

double mahalanobis_gap(const Eigen::MatrixXd& X, const BinaryLabels& labels, double delta_rel) {
  const ClassSplit s = split_labels(X, labels, "mahalanobis_gap");
  require_min_class(s, 2, "mahalanobis_gap");
  const Eigen::VectorXd mu_b = class_mean(X, s.benign);
  const Eigen::VectorXd mu_m = class_mean(X, s.malicious);
  const auto dof = static_cast<double>(X.rows() - 2);
  Eigen::MatrixXd pooled = within_scatter(X, s, mu_b, mu_m) / dof;
  pooled.diagonal().array() += ridge_for(pooled, delta_rel);
  const Eigen::VectorXd diff = mu_m - mu_b;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(pooled);
  if (ldlt.info() != Eigen::Success || ldlt.isNegative()) {
    throw std::runtime_error("mahalanobis_gap: pooled covariance is singular");
  }
  return std::sqrt(std::max(0.0, diff.dot(ldlt.solve(diff))));
}

SimilarityReport pairwise_cosine(const Eigen::MatrixXd& X, ComponentTag tag) {
  if (X.rows() < 2) throw std::invalid_argument("pairwise_cosine: need at least 2 rows");
  const Eigen::VectorXd norms = X.rowwise().norm();
  Eigen::MatrixXd unit = X;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (norms(i) > 0.0) {
      unit.row(i) /= norms(i);
    } else {
      unit.row(i).setZero();
    }
  }
  SimilarityReport r;
  r.component_tag = tag;
  r.matrix = unit * unit.transpose();
  r.matrix = (0.5 * (r.matrix + r.matrix.transpose())).cwiseMax(-1.0).cwiseMin(1.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) r.matrix(i, i) = norms(i) > 0.0 ? 1.0 : 0.0;
  const double n = static_cast<double>(X.rows());
  r.mean_offdiag = (r.matrix.sum() - r.matrix.trace()) / (n * (n - 1.0));
  return r;
}

LayerReport layer_profile(const LayerDumps& dumps, int p, double delta_rel) {
  if (dumps.empty()) throw std::invalid_argument("layer_profile: no layers");
  LayerReport report;
  for (const auto& [layer, classes] : dumps) {
    const auto& [benign, malicious] = classes;
    if (benign.empty() || malicious.empty()) {
      throw std::invalid_argument("layer_profile: layer " + std::to_string(layer) +
                                  " lacks benign or malicious records");
    }
    const Eigen::Index d = benign.front().hidden_dim();
    Eigen::MatrixXd points(static_cast<Eigen::Index>(benign.size() + malicious.size()), d);
    BinaryLabels labels;
    Eigen::Index row = 0;
    for (const auto* group : {&benign, &malicious}) {
      for (const auto& rec : *group) {
        if (rec.hidden_dim() != d) {
          throw std::invalid_argument("layer_profile: layer " + std::to_string(layer) +
                                      " mixes hidden dims " + std::to_string(d) + " and " +
                                      std::to_string(rec.hidden_dim()));
        }
        points.row(row++) = pool_sample(rec).transpose();
        labels.push_back(group == &benign ? 0 : 1);
      }
    }
    const Eigen::MatrixXd reduced = pca_reduce(points, p);
    LayerMetrics m;
    m.silhouette = silhouette(reduced, labels);
    m.fisher = fisher_separation(reduced, labels);
    m.mahalanobis = mahalanobis_gap(reduced, labels, delta_rel);
    m.n_benign = static_cast<int>(benign.size());
    m.n_malicious = static_cast<int>(malicious.size());
    report.per_layer.emplace(layer, m);
    report.layers.push_back(layer);
  }

  auto normalize = [&](double LayerMetrics::*field) {
    double lo = report.per_layer.begin()->second.*field;
    double hi = lo;
    for (const auto& [layer, m] : report.per_layer) {
      lo = std::min(lo, m.*field);
      hi = std::max(hi, m.*field);
    }
    for (const auto& [layer, m] : report.per_layer) {
      report.normalized[layer].*field = hi > lo ? (m.*field - lo) / (hi - lo) : 0.0;
    }
  };
  normalize(&LayerMetrics::silhouette);
  normalize(&LayerMetrics::fisher);
  normalize(&LayerMetrics::mahalanobis);

  double best = -1.0;
  for (int layer : report.layers) {
    auto& nm = report.normalized[layer];
    nm.n_benign = report.per_layer[layer].n_benign;
    nm.n_malicious = report.per_layer[layer].n_malicious;
    const double score = (nm.silhouette + nm.fisher + nm.mahalanobis) / 3.0;
    report.combined_score.push_back(score);
    if (score > best) {
      best = score;
      report.selected_layer = layer;
    }
  }
  return report;
}

nlohmann::json LayerReport::to_json() const {
  using nlohmann::json;
  auto metrics = [](const LayerMetrics& m) {
    return json{{"silhouette", m.silhouette},
                {"fisher", m.fisher},
                {"mahalanobis", m.mahalanobis},
                {"n_benign", m.n_benign},
                {"n_malicious", m.n_malicious}};
  };
  json raw = json::object();
  json norm = json::object();
  json series = {{"layer", json::array()},
                 {"silhouette", json::array()},
                 {"fisher", json::array()},
                 {"mahalanobis", json::array()},
                 {"combined", json::array()}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int layer = layers[i];
    const auto& m = per_layer.at(layer);
    raw[std::to_string(layer)] = metrics(m);
    norm[std::to_string(layer)] = metrics(normalized.at(layer));
    series["layer"].push_back(layer);
    series["silhouette"].push_back(m.silhouette);
    series["fisher"].push_back(m.fisher);
    series["mahalanobis"].push_back(m.mahalanobis);
    series["combined"].push_back(combined_score[i]);
  }
  return {{"per_layer", raw},
          {"normalized", norm},
          {"combined_score", combined_score},
          {"selected_layer", selected_layer},
          {"series", series}};
}

}  // namespace actguard
