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

#ifndef ACTGUARD_SUBSPACE_HPP_
#define ACTGUARD_SUBSPACE_HPP_

#include <filesystem>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "actguard/activation_store.hpp"

namespace actguard {

inline constexpr double kDefaultDeltaRel = 1e-6;
inline constexpr int kDefaultEigenCount = 256;

class SubspaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeanCovariance {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Benign and malicious first and second moments over the same hidden space.
struct CovariancePair {
  Eigen::VectorXd mu_b, mu_m;
  Eigen::MatrixXd C_b, C_m;
  Eigen::Index N_b = 0, N_m = 0;

  Eigen::Index dim() const { return C_b.rows(); }
  static CovariancePair from_rows(const Eigen::MatrixXd& benign,
                                  const Eigen::MatrixXd& malicious);
};

/// Fitted harmful subspace and the projector onto its orthogonal complement.
///
/// The projector is kept implicitly as I - B B^T with B = `orthonormal_basis`.
/// When built with `orthonormalize = false`, B is the raw generalized basis
/// and the operator is not a projector; that mode exists for comparison only.
struct SafetySubspace {
  Eigen::MatrixXd harmful_basis;     // U_k, columns are (C_b + ridge I)-orthonormal
  Eigen::MatrixXd whitened_vectors;  // top-k eigenvectors of the whitened problem
  Eigen::VectorXd eigenvalues;       // descending, non-negative
  Eigen::MatrixXd orthonormal_basis;  // B in I - B B^T
  bool orthonormalized = true;
  Eigen::VectorXd benign_mean;
  Modality modality = Modality::visual;
  int layer = 0;
  double ridge = 0.0;

  Eigen::Index dim() const { return benign_mean.size(); }
  Eigen::Index rank() const { return orthonormal_basis.cols(); }

  Eigen::VectorXd project(const Eigen::VectorXd& h) const;     // P h
  Eigen::VectorXd complement(const Eigen::VectorXd& h) const;  // (I - P) h
  Eigen::MatrixXd project_rows(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd dense_projector() const;

  /// Subspace with an empty harmful basis, i.e. P = I.
  static SafetySubspace identity(const Eigen::VectorXd& benign_mean, Modality modality,
                                 int layer);
};

/// Column mean and 1/N covariance. Throws SubspaceError when N < 2.
MeanCovariance center_and_covariance(const Eigen::MatrixXd& rows);

/// Ridge added before inversion: delta_rel * trace(C) / d, or delta_rel when
/// the trace vanishes.
double ridge_for(const Eigen::MatrixXd& C, double delta_rel);

/// (C + ridge I)^{-1/2} by symmetric eigendecomposition.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& C, double delta_rel = kDefaultDeltaRel);

/// Flips each column so its largest-magnitude entry is positive.
void fix_column_signs(Eigen::MatrixXd& M);

struct FitOptions {
  double delta_rel = kDefaultDeltaRel;
  bool orthonormalize = true;
  Modality modality = Modality::visual;
  int layer = 0;
};

/// Top-k generalized eigenvectors of C_m u = lambda (C_b + ridge I) u.
SafetySubspace harmful_basis(const CovariancePair& cov, int k, const FitOptions& opts = {});

/// min(requested, 256-style budget) clamped to [1, d - 1] (or 1 when d = 1).
int clamp_eigen_count(int requested, Eigen::Index dim);

double rayleigh(const Eigen::VectorXd& u, const CovariancePair& cov,
                double delta_rel = kDefaultDeltaRel);

struct WhitenedEnergy {
  double before = 0.0;
  double after = 0.0;
};

/// Malicious energy of h in whitened coordinates before and after removing
/// the top-k whitened eigencomponents. Requires a freshly fitted subspace.
WhitenedEnergy whitened_energy(const Eigen::VectorXd& h, const SafetySubspace& sub,
                               const CovariancePair& cov);

// Artifact directory: subspace.json + Q.f32 (d x k, row-major) + mu_b.f32.
inline constexpr int kSubspaceFormatVersion = 1;
void write_subspace(const SafetySubspace& sub, const std::filesystem::path& dir,
                    const nlohmann::json& provenance = nlohmann::json::object());
/// Values come back at float32 precision; the generalized basis is not stored.
SafetySubspace read_subspace(const std::filesystem::path& dir);

}  // namespace actguard

#endif  // ACTGUARD_SUBSPACE_HPP_
