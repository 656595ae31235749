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

#include "actguard/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "actguard/activation_store.hpp"
#include "actguard/attribution.hpp"
#include "actguard/repair.hpp"

namespace actguard {

using nlohmann::json;

Eigen::MatrixXd random_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  const Eigen::MatrixXd A = random_normal(rng, d, d + 3);
  Eigen::MatrixXd C = std::exp(log_scale(rng)) * (A * A.transpose()) / static_cast<double>(d + 3);
  return 0.5 * (C + C.transpose());
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, Eigen::Index d) {
  Eigen::VectorXd u = random_normal(rng, d, 1);
  while (u.norm() == 0.0) u = random_normal(rng, d, 1);
  return u.normalized();
}

CovariancePair random_covariance_pair(std::mt19937_64& rng, Eigen::Index d) {
  CovariancePair p;
  p.C_b = random_spd(rng, d);
  p.C_m = random_spd(rng, d);
  p.mu_b = random_normal(rng, d, 1);
  p.mu_m = random_normal(rng, d, 1);
  return p;
}

namespace {

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

class Property {
 public:
  explicit Property(std::string name) { result_.name = std::move(name); }

  // Records the first failure only.
  void fail(const std::string& detail, json counterexample) {
    if (!result_.passed) return;
    result_.passed = false;
    result_.detail = detail;
    result_.counterexample = std::move(counterexample);
  }
  bool failed() const { return !result_.passed; }
  PropertyResult finish(const std::string& ok_detail) {
    if (result_.passed) result_.detail = ok_detail;
    return std::move(result_);
  }

 private:
  PropertyResult result_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

PropertyResult rayleigh_optimality(const VerifyOptions& opts) {
  Property prop("subspace.rayleigh_optimality");
  std::mt19937_64 rng(opts.seed ^ 0x5131ULL);
  double worst = -1e300;
  for (int inst = 0; inst < 100 && !prop.failed(); ++inst) {
    const int d = uniform_int(rng, 2, 16);
    const CovariancePair cov = random_covariance_pair(rng, d);
    FitOptions fit;
    fit.orthonormalize = !opts.skip_orthonormalization;
    const SafetySubspace sub = harmful_basis(cov, 1, fit);
    const double top = sub.eigenvalues(0);
    const double at_top = rayleigh(sub.harmful_basis.col(0), cov);
    if (std::abs(at_top - top) > 1e-8 * std::max(1.0, top)) {
      prop.fail("Rayleigh quotient at the top eigenvector differs from lambda_1",
                {{"instance", inst}, {"d", d}, {"lambda_1", top}, {"rayleigh", at_top}});
    }
    for (int s = 0; s < 1000; ++s) {
      const Eigen::VectorXd u = random_unit(rng, d);
      const double r = rayleigh(u, cov);
      worst = std::max(worst, r - top);
      if (r > top + 1e-9) {
        prop.fail("sampled direction beats lambda_1 by " + fmt(r - top),
                  {{"instance", inst},
                   {"d", d},
                   {"lambda_1", top},
                   {"rayleigh", r},
                   {"u", to_json(u)},
                   {"C_b", to_json(cov.C_b)},
                   {"C_m", to_json(cov.C_m)}});
        break;
      }
    }
  }
  return prop.finish("100 instances x 1000 directions, max excess " + fmt(worst));
}

PropertyResult projector_laws(const VerifyOptions& opts) {
  Property prop("projector.laws");
  std::mt19937_64 rng(opts.seed ^ 0x9a0fULL);
  double worst_idem = 0.0;
  for (int inst = 0; inst < 50 && !prop.failed(); ++inst) {
    const int d = uniform_int(rng, 2, 16);
    const int k = uniform_int(rng, 1, d - 1);
    const CovariancePair cov = random_covariance_pair(rng, d);
    FitOptions fit;
    fit.orthonormalize = !opts.skip_orthonormalization;
    const SafetySubspace sub = harmful_basis(cov, k, fit);
    const Eigen::MatrixXd P = sub.dense_projector();
    const double asym = (P - P.transpose()).norm();
    const double idem = (P * P - P).norm();
    worst_idem = std::max(worst_idem, idem);
    const Eigen::MatrixXd& Q = sub.orthonormal_basis;
    const double annihilate = (P * Q).norm();
    const double ortho = (Q.transpose() * Q - Eigen::MatrixXd::Identity(k, k)).norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
    const auto rank = (es.eigenvalues().array() > 0.5).count();
    json ce = {{"instance", inst}, {"d", d}, {"k", k}, {"P", to_json(P)}};
    if (asym > 1e-8) prop.fail("P is not symmetric: " + fmt(asym), ce);
    if (idem > 1e-8) prop.fail("||P^2 - P||_F = " + fmt(idem), ce);
    if (rank != d - k) prop.fail("rank(P) = " + std::to_string(rank) + ", expected " +
                                     std::to_string(d - k), ce);
    if (annihilate > 1e-8) prop.fail("||P Q||_F = " + fmt(annihilate), ce);
    if (ortho > 1e-8) prop.fail("||Q^T Q - I||_F = " + fmt(ortho), ce);
  }
  return prop.finish("50 fits, max ||P^2 - P||_F " + fmt(worst_idem));
}

PropertyResult suppression(const VerifyOptions& opts) {
  Property prop("subspace.suppression");
  std::mt19937_64 rng(opts.seed ^ 0x7e2ULL);
  int checked = 0;
  for (int inst = 0; inst < 20 && !prop.failed(); ++inst) {
    const int d = uniform_int(rng, 2, 16);
    const int k = uniform_int(rng, 1, d);
    const CovariancePair cov = random_covariance_pair(rng, d);
    FitOptions fit;
    fit.orthonormalize = !opts.skip_orthonormalization;
    const SafetySubspace sub = harmful_basis(cov, k, fit);
    const Eigen::MatrixXd W = inv_sqrt(cov.C_b);
    for (int s = 0; s < 10; ++s, ++checked) {
      const Eigen::VectorXd h = 3.0 * random_normal(rng, d, 1);
      const WhitenedEnergy e = whitened_energy(h, sub, cov);
      const Eigen::VectorXd hw = W * (h - sub.benign_mean);
      double removed = 0.0;
      for (int i = 0; i < k; ++i) {
        const double c = sub.whitened_vectors.col(i).dot(hw);
        removed += sub.eigenvalues(i) * c * c;
      }
      const double tol = 1e-8 * std::max(1.0, e.before);
      json ce = {{"instance", inst}, {"d", d}, {"k", k}, {"h", to_json(h)},
                 {"before", e.before}, {"after", e.after}, {"expansion", removed}};
      if (e.after > e.before + tol) prop.fail("energy increased after removal", ce);
      if (std::abs((e.before - e.after) - removed) > tol) {
        prop.fail("decomposition identity off by " +
                      fmt(std::abs((e.before - e.after) - removed)),
                  ce);
      }
    }
  }
  return prop.finish(std::to_string(checked) + " vectors");
}

PropertyResult attribution_laws(const VerifyOptions& opts) {
  Property prop("attribution.range_invariance");
  std::mt19937_64 rng(opts.seed ^ 0x3a3ULL);
  for (int inst = 0; inst < 500 && !prop.failed(); ++inst) {
    const int n = uniform_int(rng, 1, 12);
    const int m = uniform_int(rng, 1, 12);
    const int d = uniform_int(rng, 1, 8);
    std::uniform_real_distribution<double> scale_dist(0.1, 5.0);
    const double scale = scale_dist(rng);
    const Eigen::MatrixXd V = scale * random_normal(rng, n, d);
    const Eigen::MatrixXd T = scale * random_normal(rng, m, d);
    const Eigen::RowVectorXd c = 10.0 * random_normal(rng, 1, d);
    json ce = {{"instance", inst}, {"V", to_json(V)}, {"T", to_json(T)}};

    const auto vis = attribute_visual(V, T);
    const auto txt = attribute_textual(T);
    for (const auto* s : {&vis.scores, &txt.scores}) {
      if (s->minCoeff() < 0.0 || s->maxCoeff() > 1.0) prop.fail("MI outside [0, 1]", ce);
    }
    const Eigen::MatrixXd Vs = V.rowwise() + c;
    const Eigen::MatrixXd Ts = T.rowwise() + c;
    const double joint = (attribute_visual(Vs, Ts).scores - vis.scores).cwiseAbs().maxCoeff();
    if (joint > 1e-6) prop.fail("cross-modal joint shift changed MI by " + fmt(joint), ce);
    const double self = (attribute_textual(Ts).scores - txt.scores).cwiseAbs().maxCoeff();
    if (self > 1e-6) prop.fail("self-modal shift changed MI by " + fmt(self), ce);

    std::vector<int> pv(static_cast<std::size_t>(n)), pt(static_cast<std::size_t>(m));
    std::iota(pv.begin(), pv.end(), 0);
    std::iota(pt.begin(), pt.end(), 0);
    std::shuffle(pv.begin(), pv.end(), rng);
    std::shuffle(pt.begin(), pt.end(), rng);
    Eigen::MatrixXd Vp(n, d), Tp(m, d);
    for (int i = 0; i < n; ++i) Vp.row(i) = V.row(pv[static_cast<std::size_t>(i)]);
    for (int j = 0; j < m; ++j) Tp.row(j) = T.row(pt[static_cast<std::size_t>(j)]);
    const auto vis_p = attribute_visual(Vp, Tp);
    const auto txt_p = attribute_textual(Tp);
    for (int i = 0; i < n; ++i) {
      if (vis_p.scores(i) != vis.scores(pv[static_cast<std::size_t>(i)])) {
        prop.fail("visual MI not permutation equivariant", ce);
      }
    }
    for (int j = 0; j < m; ++j) {
      if (txt_p.scores(j) != txt.scores(pt[static_cast<std::size_t>(j)])) {
        prop.fail("textual MI not permutation equivariant", ce);
      }
    }
  }
  return prop.finish("500 instances");
}

PropertyResult planted_dependence(const VerifyOptions& opts) {
  Property prop("attribution.planted_dependence");
  double planted_sum = 0.0, other_sum = 0.0;
  int planted_n = 0, other_n = 0;
  for (int s = 0; s < 20; ++s) {
    SyntheticConfig cfg;
    cfg.n_benign = 1;
    cfg.n_malicious = 1;
    cfg.tokens_per_sample = 16;
    cfg.hidden_dim = 16;
    cfg.planted_gain = 0.0;
    cfg.planted_token_pairs = 2;
    cfg.noise_scale = 0.01;
    cfg.seed = opts.seed * 1000003ULL + static_cast<std::uint64_t>(s);
    const SyntheticData data = gen_synthetic(cfg);
    const auto& vis = data.benign[0];
    const auto& txt = data.benign[1];
    const auto scores = attribute_visual(vis, txt);
    const auto& planted = data.truth.planted.at(vis.sample_id).visual;
    for (int i = 0; i < scores.scores.size(); ++i) {
      if (std::find(planted.begin(), planted.end(), i) != planted.end()) {
        planted_sum += scores.scores(i);
        ++planted_n;
      } else {
        other_sum += scores.scores(i);
        ++other_n;
      }
    }
  }
  const double planted_mean = planted_sum / planted_n;
  const double other_mean = other_sum / other_n;
  if (!(planted_mean > other_mean)) {
    prop.fail("planted tokens do not score higher",
              {{"planted_mean", planted_mean}, {"independent_mean", other_mean}});
  }
  return prop.finish("mean MI planted " + fmt(planted_mean) + " vs independent " +
                     fmt(other_mean));
}

PropertyResult fusion_bounds(const VerifyOptions& opts) {
  Property prop("fusion.weight_bounds");
  std::mt19937_64 rng(opts.seed ^ 0x4f4ULL);
  const RepairConfig cfg;
  for (int inst = 0; inst < 500; ++inst) {
    const int d = uniform_int(rng, 1, 16);
    const Eigen::VectorXd h = random_normal(rng, d, 1);
    std::uniform_real_distribution<double> mag(0.0, 4.0);
    const Eigen::VectorXd hv = h + mag(rng) * random_normal(rng, d, 1);
    const Eigen::VectorXd ht = h + mag(rng) * random_normal(rng, d, 1);
    const double w = fusion_weight(h, hv, ht, cfg);
    if (!(w >= 0.0 && w <= 1.0)) {
      prop.fail("weight outside [0, 1]", {{"h", to_json(h)}, {"w", w}});
      break;
    }
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4), e2 = Eigen::VectorXd::Zero(4);
  e1(0) = 1.0;
  e2(1) = 1.0;
  const double vis_dom = fusion_weight(zero, 1e6 * e1, e2, cfg);
  const double txt_dom = fusion_weight(zero, e1, 1e6 * e2, cfg);
  if (vis_dom < 0.999) prop.fail("alpha/m = 1e6 gives w = " + fmt(vis_dom), {{"w", vis_dom}});
  if (txt_dom > 0.001) prop.fail("m/alpha = 1e6 gives w = " + fmt(txt_dom), {{"w", txt_dom}});
  // Equal magnitudes by construction: opposite offsets, exact in floating point
  // for a zero base and for small integer-valued vectors.
  std::uniform_int_distribution<int> small(-20, 20);
  for (int inst = 0; inst < 50; ++inst) {
    const Eigen::VectorXd v = random_normal(rng, 6, 1);
    const double w0 = fusion_weight(Eigen::VectorXd::Zero(6), v, -v, cfg);
    Eigen::VectorXd hi(6), vi(6);
    for (int i = 0; i < 6; ++i) {
      hi(i) = small(rng);
      vi(i) = small(rng);
    }
    if (vi.isZero()) vi(0) = 1.0;
    const double w1 = fusion_weight(hi, hi + vi, hi - vi, cfg);
    if (w0 != 0.5 || w1 != 0.5) {
      prop.fail("alpha = m gives w = " + fmt(w0 != 0.5 ? w0 : w1),
                {{"v", to_json(v)}, {"w", w0}, {"w_integer", w1}});
    }
  }
  const double degenerate = fusion_weight(e1, e1, e1, cfg);
  if (degenerate != cfg.degenerate_weight) {
    prop.fail("zero intervention did not return the degenerate weight", {{"w", degenerate}});
  }
  return prop.finish("500 random triples, limits " + fmt(vis_dom) + " / " + fmt(txt_dom));
}

PropertyResult convergence(const VerifyOptions& opts) {
  Property prop("repair.idempotency");
  std::mt19937_64 rng(opts.seed ^ 0xc0cULL);
  double worst = 0.0;
  for (int inst = 0; inst < 20 && !prop.failed(); ++inst) {
    const int d = uniform_int(rng, 2, 16);
    const int k = uniform_int(rng, 1, d - 1);
    const CovariancePair cov = random_covariance_pair(rng, d);
    FitOptions fit;
    fit.orthonormalize = !opts.skip_orthonormalization;
    const SafetySubspace sub = harmful_basis(cov, k, fit);
    RepairConfig cfg;
    cfg.beta = std::uniform_real_distribution<double>(0.0, 6.0)(rng);
    for (int s = 0; s < 10; ++s) {
      const Eigen::VectorXd h = 5.0 * random_normal(rng, d, 1);
      const Eigen::VectorXd once = repair_activation(h, sub, cfg);
      const Eigen::VectorXd twice = repair_activation(once, sub, cfg);
      const double rel = (twice - once).norm() / std::max(1.0, once.norm());
      worst = std::max(worst, rel);
      if (rel > 1e-6) {
        prop.fail("second repair moved the activation by " + fmt(rel) + " (relative)",
                  {{"d", d}, {"k", k}, {"beta", cfg.beta}, {"h", to_json(h)},
                   {"once", to_json(once)}, {"twice", to_json(twice)}});
        break;
      }
    }
  }
  return prop.finish("200 inputs, max relative drift " + fmt(worst));
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts) {
  std::vector<PropertyResult> out;
  out.push_back(rayleigh_optimality(opts));
  out.push_back(projector_laws(opts));
  out.push_back(suppression(opts));
  out.push_back(attribution_laws(opts));
  out.push_back(planted_dependence(opts));
  out.push_back(fusion_bounds(opts));
  out.push_back(convergence(opts));
  return out;
}

}  // namespace actguard
