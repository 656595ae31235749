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

#include "actguard/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace actguard {

Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) {
    throw std::invalid_argument("pairwise_sq_dist: dimension mismatch (" +
                                std::to_string(A.cols()) + " vs " +
                                std::to_string(B.cols()) + ")");
  }
  // Explicit differences rather than the Gram expansion: exact zeros on the
  // diagonal and exact symmetry when A and B are the same matrix.
  Eigen::MatrixXd D(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    D.row(i) = (B.rowwise() - A.row(i)).rowwise().squaredNorm().transpose();
  }
  return D.cwiseMax(0.0);
}

namespace {

// Sums sorted values so the result does not depend on element order; token
// permutations then permute scores bit-exactly.
template <typename Vec>
double sorted_sum(const Vec& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

double row_sum(const Eigen::MatrixXd& M, Eigen::Index i) {
  const Eigen::RowVectorXd r = M.row(i);
  return sorted_sum(r);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

RbfKernel rbf_from_dist(const Eigen::MatrixXd& D, KernelMode mode, double eps) {
  std::vector<double> entries;
  entries.reserve(static_cast<std::size_t>(D.size()));
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      if (mode == KernelMode::self && i == j) continue;
      entries.push_back(D(i, j));
    }
  }
  RbfKernel out;
  const double sigma2 = 0.5 * median(std::move(entries));
  out.sigma = std::sqrt(sigma2);
  const double denom = 2.0 * sigma2 + eps;
  if (denom > 0.0) {
    // Scalar exp per entry: packet and tail paths may round differently.
    out.K = D.unaryExpr([denom](double x) { return std::exp(-x / denom); });
  } else {
    // sigma = 0 and eps = 0: only zero distances have a meaningful limit.
    out.K = (D.array() == 0.0).cast<double>().matrix();
  }
  if (mode == KernelMode::self) {
    const Eigen::Index m = std::min(out.K.rows(), out.K.cols());
    out.K.diagonal().head(m).setOnes();
  }
  return out;
}

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& K) {
  if (K.cols() == 0) return K;
  const auto m = static_cast<double>(K.cols());
  Eigen::VectorXd row_mean(K.rows());
  for (Eigen::Index i = 0; i < K.rows(); ++i) row_mean(i) = row_sum(K, i) / m;
  return K.colwise() - row_mean;
}

Eigen::MatrixXd center_double(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols()) {
    throw std::invalid_argument("center_double: kernel must be square (got " +
                                std::to_string(K.rows()) + "x" +
                                std::to_string(K.cols()) + ")");
  }
  if (K.rows() == 0) return K;
  const auto m = static_cast<double>(K.rows());
  Eigen::VectorXd row_mean(K.rows());
  Eigen::RowVectorXd col_mean(K.cols());
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    row_mean(i) = row_sum(K, i) / m;
    const Eigen::VectorXd c = K.col(i);
    col_mean(i) = sorted_sum(c) / m;
  }
  const double grand = sorted_sum(row_mean) / m;
  Eigen::MatrixXd out = K;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += grand;
  // H K H is symmetric for symmetric K; pin it exactly.
  return 0.5 * (out + out.transpose());
}

Eigen::VectorXd mi_scores(const Eigen::MatrixXd& K_centered, double eps) {
  const Eigen::MatrixXd squared = K_centered.cwiseAbs2();
  Eigen::VectorXd s(K_centered.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = row_sum(squared, i);
  if (s.size() == 0) return s;
  const double lo = s.minCoeff();
  const double hi = s.maxCoeff();
  const double range = hi - lo;
  if (range <= 0.0) return Eigen::VectorXd::Zero(s.size());
  Eigen::VectorXd mi = (s.array() - lo) / (range + eps);
  return mi.cwiseMax(0.0).cwiseMin(1.0);
}

KernelIntermediate visual_kernel(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                                 double eps) {
  KernelIntermediate k;
  k.D = pairwise_sq_dist(V, T);
  RbfKernel rbf = rbf_from_dist(k.D, KernelMode::cross, eps);
  k.sigma = rbf.sigma;
  k.K = std::move(rbf.K);
  k.K_centered = center_columns(k.K);
  return k;
}

KernelIntermediate textual_kernel(const Eigen::MatrixXd& T, double eps) {
  KernelIntermediate k;
  k.D = pairwise_sq_dist(T, T);
  RbfKernel rbf = rbf_from_dist(k.D, KernelMode::self, eps);
  k.sigma = rbf.sigma;
  k.K = std::move(rbf.K);
  k.K_centered = center_double(k.K);
  return k;
}

std::vector<int> rank_tokens(const Eigen::VectorXd& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

AttributionScores attribute_visual(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                                   double eps) {
  if (V.rows() < 1 || T.rows() < 1) {
    throw std::invalid_argument("attribute_visual: need at least one token per modality");
  }
  AttributionScores out;
  out.modality = Modality::visual;
  out.scores = mi_scores(visual_kernel(V, T, eps).K_centered, eps);
  out.selected = rank_tokens(out.scores);
  return out;
}

AttributionScores attribute_textual(const Eigen::MatrixXd& T, double eps) {
  if (T.rows() < 1) throw std::invalid_argument("attribute_textual: need at least one token");
  AttributionScores out;
  out.modality = Modality::textual;
  out.scores = mi_scores(textual_kernel(T, eps).K_centered, eps);
  out.selected = rank_tokens(out.scores);
  return out;
}

AttributionScores attribute_visual(const ActivationMatrix& V, const ActivationMatrix& T,
                                   double eps) {
  if (V.modality != Modality::visual || T.modality != Modality::textual) {
    throw std::invalid_argument("attribute_visual: expected a visual and a textual record (got " +
                                V.record_id() + ", " + T.record_id() + ")");
  }
  return attribute_visual(V.as_double(), T.as_double(), eps);
}

AttributionScores attribute_textual(const ActivationMatrix& T, double eps) {
  if (T.modality != Modality::textual) {
    throw std::invalid_argument("attribute_textual: record " + T.record_id() +
                                " is not textual");
  }
  return attribute_textual(T.as_double(), eps);
}

std::vector<int> select_top_tokens(const AttributionScores& scores, double frac) {
  if (!(frac > 0.0 && frac <= 1.0)) {
    throw std::invalid_argument("select_top_tokens: frac must lie in (0, 1]");
  }
  const auto n = static_cast<std::size_t>(scores.scores.size());
  if (n == 0) return {};
  // The slack keeps products like 0.1 * 30 from rounding up a whole token.
  std::size_t k =
      static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<int> order = rank_tokens(scores.scores);
  order.resize(k);
  return order;
}

}  // namespace actguard
