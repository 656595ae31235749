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

#include "actguard/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace actguard {

namespace {

constexpr double kSymmetryTol = 1e-9;

void require_symmetric(const Eigen::MatrixXd& C, const char* what) {
  if (C.rows() != C.cols()) {
    throw SubspaceError(std::string(what) + ": matrix is not square");
  }
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  const double asym = (C - C.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    throw SubspaceError(std::string(what) + ": matrix is not symmetric (max asymmetry " +
                        std::to_string(asym) + ")");
  }
}

Eigen::MatrixXd inv_sqrt_with_ridge(const Eigen::MatrixXd& C, double ridge) {
  require_symmetric(C, "inv_sqrt");
  const Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw SubspaceError("inv_sqrt: eigensolver failed");
  Eigen::VectorXd shifted = es.eigenvalues().array() + ridge;
  if (shifted.size() > 0 && shifted.minCoeff() <= 0.0) {
    throw SubspaceError("inv_sqrt: matrix is not positive definite after ridge " +
                        std::to_string(ridge));
  }
  const Eigen::VectorXd scale = shifted.array().rsqrt();
  Eigen::MatrixXd W = es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (W + W.transpose());
}

}  // namespace

Eigen::VectorXd SafetySubspace::project(const Eigen::VectorXd& h) const {
  if (h.size() != dim()) {
    throw SubspaceError("project: dimension mismatch (" + std::to_string(h.size()) +
                        " vs " + std::to_string(dim()) + ")");
  }
  if (rank() == 0) return h;
  return h - orthonormal_basis * (orthonormal_basis.transpose() * h);
}

Eigen::VectorXd SafetySubspace::complement(const Eigen::VectorXd& h) const {
  if (h.size() != dim()) {
    throw SubspaceError("complement: dimension mismatch (" + std::to_string(h.size()) +
                        " vs " + std::to_string(dim()) + ")");
  }
  if (rank() == 0) return Eigen::VectorXd::Zero(h.size());
  return orthonormal_basis * (orthonormal_basis.transpose() * h);
}

Eigen::MatrixXd SafetySubspace::project_rows(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != dim()) throw SubspaceError("project_rows: dimension mismatch");
  if (rank() == 0) return rows;
  return rows - (rows * orthonormal_basis) * orthonormal_basis.transpose();
}

Eigen::MatrixXd SafetySubspace::dense_projector() const {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim(), dim());
  if (rank() > 0) P -= orthonormal_basis * orthonormal_basis.transpose();
  return P;
}

SafetySubspace SafetySubspace::identity(const Eigen::VectorXd& benign_mean,
                                        Modality modality, int layer) {
  SafetySubspace s;
  const Eigen::Index d = benign_mean.size();
  s.harmful_basis.resize(d, 0);
  s.whitened_vectors.resize(d, 0);
  s.eigenvalues.resize(0);
  s.orthonormal_basis.resize(d, 0);
  s.benign_mean = benign_mean;
  s.modality = modality;
  s.layer = layer;
  return s;
}

MeanCovariance center_and_covariance(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) {
    throw SubspaceError("insufficient samples: need at least 2 rows, got " +
                        std::to_string(rows.rows()));
  }
  MeanCovariance out;
  out.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd X = rows.rowwise() - out.mean.transpose();
  out.cov = (X.transpose() * X) / static_cast<double>(rows.rows());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

CovariancePair CovariancePair::from_rows(const Eigen::MatrixXd& benign,
                                         const Eigen::MatrixXd& malicious) {
  if (benign.cols() != malicious.cols()) {
    throw SubspaceError("covariance pair: benign rows have dim " +
                        std::to_string(benign.cols()) + ", malicious rows have dim " +
                        std::to_string(malicious.cols()));
  }
  CovariancePair p;
  auto b = center_and_covariance(benign);
  auto m = center_and_covariance(malicious);
  p.mu_b = std::move(b.mean);
  p.C_b = std::move(b.cov);
  p.mu_m = std::move(m.mean);
  p.C_m = std::move(m.cov);
  p.N_b = benign.rows();
  p.N_m = malicious.rows();
  return p;
}

double ridge_for(const Eigen::MatrixXd& C, double delta_rel) {
  const double tr = C.trace();
  if (C.rows() == 0 || tr <= 0.0) return delta_rel;
  return delta_rel * tr / static_cast<double>(C.rows());
}

Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& C, double delta_rel) {
  return inv_sqrt_with_ridge(C, ridge_for(C, delta_rel));
}

void fix_column_signs(Eigen::MatrixXd& M) {
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    Eigen::Index arg = 0;
    M.col(c).cwiseAbs().maxCoeff(&arg);
    if (M(arg, c) < 0.0) M.col(c) *= -1.0;
  }
}

int clamp_eigen_count(int requested, Eigen::Index dim) {
  const auto budget = static_cast<int>(std::max<Eigen::Index>(1, dim - 1));
  return std::clamp(requested, 1, budget);
}

SafetySubspace harmful_basis(const CovariancePair& cov, int k, const FitOptions& opts) {
  const Eigen::Index d = cov.dim();
  if (cov.C_m.rows() != d || cov.C_m.cols() != d || cov.mu_b.size() != d) {
    throw SubspaceError("harmful_basis: inconsistent covariance pair dimensions");
  }
  if (k < 1 || k > d) {
    throw SubspaceError("harmful_basis: k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(d) + "]");
  }
  require_symmetric(cov.C_m, "harmful_basis");

  const double ridge = ridge_for(cov.C_b, opts.delta_rel);
  const Eigen::MatrixXd W = inv_sqrt_with_ridge(cov.C_b, ridge);
  Eigen::MatrixXd whitened = W * cov.C_m * W;
  whitened = 0.5 * (whitened + whitened.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(whitened);
  if (es.info() != Eigen::Success) throw SubspaceError("harmful_basis: eigensolver failed");

  // Eigen returns ascending order.
  SafetySubspace sub;
  sub.eigenvalues.resize(k);
  sub.whitened_vectors.resize(d, k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index src = d - 1 - i;
    sub.eigenvalues(i) = std::max(0.0, es.eigenvalues()(src));
    sub.whitened_vectors.col(i) = es.eigenvectors().col(src);
  }
  fix_column_signs(sub.whitened_vectors);
  sub.harmful_basis = W * sub.whitened_vectors;

  if (opts.orthonormalize) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sub.harmful_basis);
    sub.orthonormal_basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    fix_column_signs(sub.orthonormal_basis);
  } else {
    sub.orthonormal_basis = sub.harmful_basis;
  }
  sub.orthonormalized = opts.orthonormalize;
  sub.benign_mean = cov.mu_b;
  sub.modality = opts.modality;
  sub.layer = opts.layer;
  sub.ridge = ridge;
  return sub;
}

double rayleigh(const Eigen::VectorXd& u, const CovariancePair& cov, double delta_rel) {
  if (u.size() != cov.dim()) throw SubspaceError("rayleigh: dimension mismatch");
  if (u.squaredNorm() == 0.0) throw SubspaceError("rayleigh: zero vector");
  const double ridge = ridge_for(cov.C_b, delta_rel);
  const double num = u.dot(cov.C_m * u);
  const double den = u.dot(cov.C_b * u) + ridge * u.squaredNorm();
  return num / den;
}

WhitenedEnergy whitened_energy(const Eigen::VectorXd& h, const SafetySubspace& sub,
                               const CovariancePair& cov) {
  if (h.size() != cov.dim() || sub.dim() != cov.dim()) {
    throw SubspaceError("whitened_energy: dimension mismatch");
  }
  if (sub.whitened_vectors.rows() != cov.dim() ||
      sub.whitened_vectors.cols() != sub.eigenvalues.size()) {
    throw SubspaceError("whitened_energy: subspace carries no whitened eigenvectors");
  }
  const Eigen::MatrixXd W = inv_sqrt_with_ridge(cov.C_b, sub.ridge);
  Eigen::MatrixXd whitened = W * cov.C_m * W;
  whitened = 0.5 * (whitened + whitened.transpose());

  const Eigen::VectorXd hw = W * (h - sub.benign_mean);
  const Eigen::MatrixXd& V = sub.whitened_vectors;
  const Eigen::VectorXd removed = hw - V * (V.transpose() * hw);
  return {hw.dot(whitened * hw), removed.dot(whitened * removed)};
}

}  // namespace actguard
