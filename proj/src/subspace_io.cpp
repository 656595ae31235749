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

#include <fstream>
#include <string>
#include <vector>

#include "actguard/subspace.hpp"

namespace actguard {

namespace fs = std::filesystem;
using nlohmann::json;

void write_subspace(const SafetySubspace& sub, const fs::path& dir, const json& provenance) {
  const Eigen::Index d = sub.dim();
  const Eigen::Index k = sub.rank();
  if (sub.orthonormal_basis.rows() != d) {
    throw SubspaceError("write_subspace: basis has " +
                        std::to_string(sub.orthonormal_basis.rows()) + " rows, expected " +
                        std::to_string(d));
  }
  fs::create_directories(dir);

  RowMatrixF q = sub.orthonormal_basis.cast<float>();
  write_f32(dir / "Q.f32", q.data(), static_cast<std::size_t>(q.size()));
  Eigen::VectorXf mu = sub.benign_mean.cast<float>();
  write_f32(dir / "mu_b.f32", mu.data(), static_cast<std::size_t>(mu.size()));

  json j = {{"format_version", kSubspaceFormatVersion},
            {"modality", to_string(sub.modality)},
            {"layer", sub.layer},
            {"d", d},
            {"k", k},
            {"ridge", sub.ridge},
            {"orthonormalized", sub.orthonormalized},
            {"eigenvalues", std::vector<double>(sub.eigenvalues.data(),
                                                sub.eigenvalues.data() + sub.eigenvalues.size())},
            {"provenance", provenance}};
  std::ofstream out(dir / "subspace.json", std::ios::trunc);
  if (!out) throw SubspaceError("cannot write " + (dir / "subspace.json").string());
  out << j.dump(2) << '\n';
}

SafetySubspace read_subspace(const fs::path& dir) {
  const fs::path meta = dir / "subspace.json";
  std::ifstream in(meta);
  if (!in) throw SubspaceError("missing subspace metadata: " + meta.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SubspaceError(meta.string() + ": " + e.what());
  }

  SafetySubspace sub;
  Eigen::Index d = 0, k = 0;
  std::vector<double> eig;
  try {
    const int version = j.at("format_version").get<int>();
    if (version > kSubspaceFormatVersion) {
      throw SubspaceError(meta.string() + ": unsupported format version " +
                          std::to_string(version) + " (reader supports <= " +
                          std::to_string(kSubspaceFormatVersion) + ")");
    }
    sub.modality = parse_modality(j.at("modality").get<std::string>());
    sub.layer = j.at("layer").get<int>();
    d = j.at("d").get<Eigen::Index>();
    k = j.at("k").get<Eigen::Index>();
    sub.ridge = j.at("ridge").get<double>();
    sub.orthonormalized = j.value("orthonormalized", true);
    eig = j.at("eigenvalues").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw SubspaceError(meta.string() + ": schema error: " + e.what());
  } catch (const SchemaError& e) {
    throw SubspaceError(meta.string() + ": schema error: " + e.what());
  }
  if (d < 1 || k < 0 || k > d) {
    throw SubspaceError(meta.string() + ": invalid shape d=" + std::to_string(d) +
                        " k=" + std::to_string(k));
  }
  if (static_cast<Eigen::Index>(eig.size()) != k) {
    throw SubspaceError(meta.string() + ": " + std::to_string(eig.size()) +
                        " eigenvalues for k=" + std::to_string(k));
  }

  const std::vector<float> q = read_f32(dir / "Q.f32");
  if (static_cast<Eigen::Index>(q.size()) != d * k) {
    throw SubspaceError((dir / "Q.f32").string() + ": length mismatch: " +
                        std::to_string(q.size() * 4) + " bytes, expected " +
                        std::to_string(d * k * 4));
  }
  const std::vector<float> mu = read_f32(dir / "mu_b.f32");
  if (static_cast<Eigen::Index>(mu.size()) != d) {
    throw SubspaceError((dir / "mu_b.f32").string() + ": length mismatch: " +
                        std::to_string(mu.size() * 4) + " bytes, expected " +
                        std::to_string(d * 4));
  }

  sub.orthonormal_basis =
      Eigen::Map<const RowMatrixF>(q.data(), d, k).cast<double>();
  sub.benign_mean = Eigen::Map<const Eigen::VectorXf>(mu.data(), d).cast<double>();
  sub.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eig.data(), k);
  if (!sub.orthonormal_basis.allFinite() || !sub.benign_mean.allFinite()) {
    throw SubspaceError(dir.string() + ": non-finite values in subspace artifact");
  }
  sub.harmful_basis.resize(d, 0);
  sub.whitened_vectors.resize(d, 0);
  return sub;
}

}  // namespace actguard
