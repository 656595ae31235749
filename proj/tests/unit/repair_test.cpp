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
#include <random>

#include <gtest/gtest.h>

#include "actguard/verify.hpp"

namespace actguard {
namespace {

// Harmful direction e_1 in two dimensions, so P = diag(0, 1).
SafetySubspace axis_subspace(const Eigen::VectorXd& mu) {
  SafetySubspace sub = SafetySubspace::identity(mu, Modality::visual, 0);
  sub.orthonormal_basis = Eigen::MatrixXd::Zero(mu.size(), 1);
  sub.orthonormal_basis(0, 0) = 1.0;
  sub.harmful_basis = sub.orthonormal_basis;
  sub.eigenvalues = Eigen::VectorXd::Ones(1);
  return sub;
}

SafetySubspace random_fit(std::mt19937_64& rng, Eigen::Index d, int k, Modality modality) {
  CovariancePair cov = random_covariance_pair(rng, d);
  cov.mu_b = random_normal(rng, d, 1);
  FitOptions opts;
  opts.modality = modality;
  return harmful_basis(cov, k, opts);
}

TEST(RepairActivationTest, HandExample) {
  const SafetySubspace sub = axis_subspace(Eigen::Vector2d(1, 1));
  RepairConfig cfg;
  cfg.beta = 0.5;
  const Eigen::VectorXd out = repair_activation(Eigen::Vector2d(2, 3), sub, cfg);
  EXPECT_NEAR(out(0), 0.5, 1e-15);
  EXPECT_NEAR(out(1), 3.0, 1e-15);
}

TEST(RepairActivationTest, ZeroBetaIsPureProjection) {
  std::mt19937_64 rng(1);
  const SafetySubspace sub = random_fit(rng, 9, 3, Modality::visual);
  RepairConfig cfg;
  cfg.beta = 0.0;
  const Eigen::VectorXd h = random_normal(rng, 9, 1);
  EXPECT_LE((repair_activation(h, sub, cfg) - sub.dense_projector() * h).cwiseAbs().maxCoeff(),
            1e-12);
  const Eigen::VectorXd inside = sub.project(h);
  EXPECT_LE((repair_activation(inside, sub, cfg) - inside).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RepairActivationTest, DimensionMismatchThrows) {
  const SafetySubspace sub = axis_subspace(Eigen::Vector2d(1, 1));
  EXPECT_THROW(repair_activation(Eigen::Vector3d(1, 2, 3), sub, RepairConfig{}),
               std::invalid_argument);
}

TEST(RepairActivationTest, SecondApplicationIsFixedPoint) {
  std::mt19937_64 rng(3);
  const RepairConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const SafetySubspace sub = random_fit(rng, 10, 4, Modality::textual);
    const Eigen::VectorXd h = random_normal(rng, 10, 1) * 5.0;
    const Eigen::VectorXd once = repair_activation(h, sub, cfg);
    const Eigen::VectorXd twice = repair_activation(once, sub, cfg);
    EXPECT_LE((twice - once).norm(), 1e-6 * std::max(1.0, once.norm()));
    const Eigen::VectorXd expected =
        sub.project(h) + cfg.beta * sub.complement(sub.benign_mean);
    EXPECT_LE((once - expected).norm(), 1e-10 * std::max(1.0, once.norm()));
  }
}

TEST(RepairActivationTest, HarmlessComponentsPassThrough) {
  std::mt19937_64 rng(5);
  const SafetySubspace sub = random_fit(rng, 8, 2, Modality::visual);
  const RepairConfig cfg;
  const Eigen::VectorXd h = random_normal(rng, 8, 1);
  EXPECT_LE((sub.project(repair_activation(h, sub, cfg)) - sub.project(h)).norm(), 1e-10);
}

TEST(RepairActivationTest, HarmfulCoefficientIndependentOfInput) {
  const Eigen::Vector3d mu(0.2, -0.4, 1.0);
  SafetySubspace sub = SafetySubspace::identity(mu, Modality::visual, 0);
  const Eigen::Vector3d e = Eigen::Vector3d(1, 2, 2) / 3.0;
  sub.orthonormal_basis = e;
  sub.harmful_basis = e;
  sub.eigenvalues = Eigen::VectorXd::Ones(1);
  const RepairConfig cfg;
  const Eigen::Vector3d base(0.5, 0.1, -0.3);
  for (int c = -10; c <= 10; ++c) {
    const Eigen::VectorXd out = repair_activation(base + c * e, sub, cfg);
    EXPECT_NEAR(e.dot(out), cfg.beta * e.dot(mu), 1e-12);
  }
}

TEST(FusionWeightTest, Examples) {
  const RepairConfig cfg;
  const Eigen::Vector2d h(0, 0);
  EXPECT_DOUBLE_EQ(fusion_weight(h, Eigen::Vector2d(3, 0), Eigen::Vector2d(0, 1), cfg), 0.75);
  EXPECT_EQ(fusion_weight(h, Eigen::Vector2d(2, 0), Eigen::Vector2d(0, -2), cfg), 0.5);
  EXPECT_EQ(fusion_weight(h, h, h, cfg), 0.5);
  RepairConfig skew;
  skew.degenerate_weight = 0.2;
  EXPECT_EQ(fusion_weight(h, h, h, skew), 0.2);
}

TEST(FusionWeightTest, BoundsAndLimits) {
  std::mt19937_64 rng(7);
  const RepairConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd h = random_normal(rng, 5, 1);
    const double w = fusion_weight(h, random_normal(rng, 5, 1), random_normal(rng, 5, 1), cfg);
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
  const Eigen::Vector2d h(0, 0);
  EXPECT_NEAR(fusion_weight(h, Eigen::Vector2d(1e6, 0), Eigen::Vector2d(0, 1), cfg), 1.0, 1e-5);
  EXPECT_NEAR(fusion_weight(h, Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1e6), cfg), 0.0, 1e-5);
}

TEST(FuseTest, Examples) {
  const Eigen::Vector2d v(2, 0), t(0, 2);
  EXPECT_EQ(fuse(v, t, 1.0), v);
  EXPECT_EQ(fuse(v, t, 0.0), t);
  EXPECT_TRUE(fuse(v, t, 0.5).isApprox(Eigen::Vector2d(1, 1), 1e-15));
  EXPECT_THROW(fuse(v, t, 1.5), std::invalid_argument);
  EXPECT_THROW(fuse(v, t, -0.1), std::invalid_argument);
}

TEST(RepairDualTest, IdenticalSubspacesWeighEqually) {
  std::mt19937_64 rng(9);
  const SafetySubspace sub = random_fit(rng, 6, 2, Modality::visual);
  const Eigen::VectorXd h = random_normal(rng, 6, 1);
  const RepairedActivation r = repair_dual(h, sub, sub, RepairConfig{});
  EXPECT_EQ(r.w_vis, 0.5);
  EXPECT_LE((r.h_prime - r.h_vis_prime).norm(), 1e-12);
  EXPECT_EQ(r.visual_magnitude, r.textual_magnitude);
}

TEST(RepairDualTest, EmptyTextualBasisGivesVisualWeightOne) {
  std::mt19937_64 rng(11);
  const SafetySubspace vis = random_fit(rng, 6, 2, Modality::visual);
  const SafetySubspace txt =
      SafetySubspace::identity(Eigen::VectorXd::Zero(6), Modality::textual, vis.layer);
  RepairConfig cfg;
  cfg.beta = 0.0;
  const Eigen::VectorXd h = random_normal(rng, 6, 1);
  const RepairedActivation r = repair_dual(h, vis, txt, cfg);
  EXPECT_EQ(r.h_txt_prime, h);
  EXPECT_EQ(r.textual_magnitude, 0.0);
  EXPECT_EQ(r.w_vis, 1.0);
  EXPECT_EQ(r.h_prime, r.h_vis_prime);
}

TEST(RepairDualTest, MismatchedSubspacesThrow) {
  std::mt19937_64 rng(13);
  const SafetySubspace a = random_fit(rng, 6, 2, Modality::visual);
  const SafetySubspace b = random_fit(rng, 7, 2, Modality::textual);
  EXPECT_THROW(repair_dual(Eigen::VectorXd::Zero(6), a, b, RepairConfig{}),
               std::invalid_argument);
  SafetySubspace c = a;
  c.layer = 3;
  EXPECT_THROW(repair_dual(Eigen::VectorXd::Zero(6), a, c, RepairConfig{}),
               std::invalid_argument);
}

TEST(RepairConfigTest, Validation) {
  RepairConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.beta = std::nan("");
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = RepairConfig{};
  cfg.degenerate_weight = 1.2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace actguard
