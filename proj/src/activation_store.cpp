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

#include "actguard/activation_store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace actguard {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Modality m) {
  return m == Modality::visual ? "visual" : "textual";
}

std::string_view to_string(Label l) {
  return l == Label::benign ? "benign" : "malicious";
}

Modality parse_modality(std::string_view s) {
  if (s == "visual") return Modality::visual;
  if (s == "textual") return Modality::textual;
  throw SchemaError("unknown modality '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
  if (s == "benign") return Label::benign;
  if (s == "malicious") return Label::malicious;
  throw SchemaError("unknown label '" + std::string(s) + "'");
}

std::string ActivationMatrix::record_id() const {
  if (!id.empty()) return id;
  return sample_id + "_" + std::string(to_string(modality));
}

bool operator==(const ActivationMatrix& a, const ActivationMatrix& b) {
  if (a.modality != b.modality || a.label != b.label || a.layer != b.layer ||
      a.sample_id != b.sample_id || a.record_id() != b.record_id() ||
      a.data.rows() != b.data.rows() || a.data.cols() != b.data.cols()) {
    return false;
  }
  return std::memcmp(a.data.data(), b.data.data(),
                     sizeof(float) * static_cast<std::size_t>(a.data.size())) == 0;
}

namespace {

std::string join_lines(const std::vector<std::string>& problems) {
  std::ostringstream os;
  os << "invalid dump (" << problems.size() << " problem"
     << (problems.size() == 1 ? "" : "s") << ")";
  for (const auto& p : problems) os << "\n  " << p;
  return os.str();
}

bool valid_record_id(const std::string& id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '-' || c == '.';
  });
}

// Relative, no parent traversal.
bool safe_relative(const std::string& file) {
  fs::path p(file);
  if (file.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

}  // namespace

DumpError::DumpError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

void write_f32(const fs::path& file, const float* data, std::size_t count) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint32_t>(data[i]);
      unsigned char bytes[4] = {
          static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
          static_cast<unsigned char>(bits >> 16),
          static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<float> read_f32(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    throw std::runtime_error(file.string() + ": length " +
                             std::to_string(bytes.size()) +
                             " is not a multiple of 4");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::uint32_t(bytes[4 * i]) |
                         std::uint32_t(bytes[4 * i + 1]) << 8 |
                         std::uint32_t(bytes[4 * i + 2]) << 16 |
                         std::uint32_t(bytes[4 * i + 3]) << 24;
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

DumpManifest write_dump(const std::vector<ActivationMatrix>& records,
                        const fs::path& dir, const std::string& model) {
  if (records.empty()) throw DumpError({"empty dump"});

  std::vector<std::string> problems;
  const auto& first = records.front();
  std::set<std::string> ids;
  for (const auto& r : records) {
    const std::string id = r.record_id();
    if (!valid_record_id(id)) problems.push_back("record '" + id + "': invalid id");
    if (!ids.insert(id).second) problems.push_back("record '" + id + "': duplicate id");
    if (r.tokens() < 1 || r.hidden_dim() < 1) {
      problems.push_back("record '" + id + "': empty matrix");
    }
    if (r.hidden_dim() != first.hidden_dim()) {
      problems.push_back("heterogeneous hidden_dim: record '" + first.record_id() +
                         "' has " + std::to_string(first.hidden_dim()) +
                         ", record '" + id + "' has " +
                         std::to_string(r.hidden_dim()));
    }
    if (r.layer != first.layer) {
      problems.push_back("heterogeneous layer: record '" + first.record_id() +
                         "' has " + std::to_string(first.layer) + ", record '" +
                         id + "' has " + std::to_string(r.layer));
    }
    if (!r.data.allFinite()) problems.push_back("record '" + id + "': non-finite entry");
  }
  if (!problems.empty()) throw DumpError(std::move(problems));

  fs::create_directories(dir);
  DumpManifest manifest;
  manifest.model = model;
  manifest.layer = first.layer;
  manifest.hidden_dim = first.hidden_dim();

  json jrecords = json::array();
  for (const auto& r : records) {
    ManifestRecord entry;
    entry.id = r.record_id();
    entry.sample_id = r.sample_id.empty() ? entry.id : r.sample_id;
    entry.modality = r.modality;
    entry.label = r.label;
    entry.tokens = r.tokens();
    entry.file = entry.id + ".f32";
    write_f32(dir / entry.file, r.data.data(), static_cast<std::size_t>(r.data.size()));
    jrecords.push_back({{"id", entry.id},
                        {"sample_id", entry.sample_id},
                        {"modality", to_string(entry.modality)},
                        {"label", to_string(entry.label)},
                        {"tokens", entry.tokens},
                        {"file", entry.file}});
    manifest.records.push_back(std::move(entry));
  }

  json j = {{"version", manifest.version},
            {"model", manifest.model},
            {"layer", manifest.layer},
            {"hidden_dim", manifest.hidden_dim},
            {"records", jrecords}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << '\n';
  return manifest;
}

namespace {

template <typename T>
bool get_field(const json& j, const char* key, T& out, std::vector<std::string>& problems,
               const std::string& where) {
  if (!j.contains(key)) {
    problems.push_back("schema error: " + where + ": missing field '" + key + "'");
    return false;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    problems.push_back("schema error: " + where + ": field '" + key +
                       "' has wrong type");
    return false;
  }
  return true;
}

}  // namespace

Dump read_dump(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DumpError({"missing manifest: " + manifest_path.string()});

  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DumpError({"schema error: " + manifest_path.string() + ": " + e.what()});
  }
  if (!j.is_object()) throw DumpError({"schema error: manifest is not an object"});

  std::vector<std::string> problems;
  Dump dump;
  DumpManifest& m = dump.manifest;
  get_field(j, "version", m.version, problems, "manifest");
  if (problems.empty() && m.version > DumpManifest::kSupportedVersion) {
    throw DumpError({"unsupported dump version " + std::to_string(m.version) +
                     " (reader supports <= " +
                     std::to_string(DumpManifest::kSupportedVersion) + ")"});
  }
  if (j.contains("model")) get_field(j, "model", m.model, problems, "manifest");
  get_field(j, "layer", m.layer, problems, "manifest");
  if (get_field(j, "hidden_dim", m.hidden_dim, problems, "manifest") &&
      m.hidden_dim < 1) {
    problems.push_back("schema error: manifest: hidden_dim must be >= 1");
  }
  if (!j.contains("records") || !j["records"].is_array()) {
    problems.push_back("schema error: manifest: 'records' must be an array");
    throw DumpError(std::move(problems));
  }
  if (j["records"].empty()) problems.push_back("empty dump");
  if (!problems.empty()) throw DumpError(std::move(problems));

  std::set<std::string> ids;
  std::set<std::string> files;
  for (std::size_t i = 0; i < j["records"].size(); ++i) {
    const json& jr = j["records"][i];
    std::string where = "record #" + std::to_string(i);
    if (!jr.is_object()) {
      problems.push_back("schema error: " + where + " is not an object");
      continue;
    }
    ManifestRecord r;
    std::string modality, label;
    bool ok = get_field(jr, "id", r.id, problems, where);
    if (ok) where = "record '" + r.id + "'";
    ok &= get_field(jr, "modality", modality, problems, where);
    ok &= get_field(jr, "label", label, problems, where);
    ok &= get_field(jr, "tokens", r.tokens, problems, where);
    ok &= get_field(jr, "file", r.file, problems, where);
    if (jr.contains("sample_id")) {
      ok &= get_field(jr, "sample_id", r.sample_id, problems, where);
    } else {
      r.sample_id = r.id;
    }
    if (!ok) continue;
    try {
      r.modality = parse_modality(modality);
      r.label = parse_label(label);
    } catch (const SchemaError& e) {
      problems.push_back("schema error: " + where + ": " + e.what());
      continue;
    }
    if (!ids.insert(r.id).second) {
      problems.push_back(where + ": duplicate id");
      continue;
    }
    if (!safe_relative(r.file)) {
      problems.push_back(where + ": file path '" + r.file + "' escapes the dump directory");
      continue;
    }
    if (!files.insert(fs::path(r.file).lexically_normal().string()).second) {
      problems.push_back(where + ": blob '" + r.file + "' referenced by more than one record");
      continue;
    }
    if (r.tokens < 1) {
      problems.push_back(where + ": tokens must be >= 1");
      continue;
    }
    const fs::path blob = dir / r.file;
    std::error_code ec;
    if (!fs::is_regular_file(blob, ec)) {
      problems.push_back(where + ": missing blob " + blob.string());
      continue;
    }
    const auto expected = static_cast<std::uintmax_t>(r.tokens) *
                          static_cast<std::uintmax_t>(m.hidden_dim) * 4u;
    const auto actual = fs::file_size(blob, ec);
    if (ec || actual != expected) {
      problems.push_back(where + ": length mismatch: blob has " +
                         std::to_string(actual) + " bytes, expected " +
                         std::to_string(expected));
      continue;
    }
    std::vector<float> values = read_f32(blob);
    ActivationMatrix a;
    a.data = Eigen::Map<const RowMatrixF>(values.data(), r.tokens, m.hidden_dim);
    if (!a.data.allFinite()) {
      problems.push_back(where + ": non-finite entry in blob");
      continue;
    }
    a.modality = r.modality;
    a.label = r.label;
    a.layer = m.layer;
    a.sample_id = r.sample_id;
    a.id = r.id;
    dump.records.push_back(std::move(a));
    m.records.push_back(std::move(r));
  }

  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() != ".f32") continue;
    const auto name = entry.path().filename().string();
    if (!files.count(name)) {
      problems.push_back("unreferenced blob " + entry.path().string());
    }
  }

  if (!problems.empty()) throw DumpError(std::move(problems));
  return dump;
}

void SyntheticConfig::validate() const {
  std::vector<std::string> errors;
  auto positive = [&](const char* name, long long v) {
    if (v < 1) errors.push_back(std::string(name) + " must be >= 1 (got " + std::to_string(v) + ")");
  };
  positive("n_benign", n_benign);
  positive("n_malicious", n_malicious);
  positive("tokens_per_sample", tokens_per_sample);
  positive("hidden_dim", hidden_dim);
  positive("planted_dirs", planted_dirs);
  if (planted_dirs > hidden_dim) {
    errors.push_back("planted_dirs " + std::to_string(planted_dirs) +
                     " exceeds hidden_dim " + std::to_string(hidden_dim));
  }
  if (planted_token_pairs < 0 || planted_token_pairs > tokens_per_sample) {
    errors.push_back("planted_token_pairs " + std::to_string(planted_token_pairs) +
                     " must lie in [0, tokens_per_sample=" +
                     std::to_string(tokens_per_sample) + "]");
  }
  if (!(planted_gain >= 0.0) || !std::isfinite(planted_gain)) {
    errors.push_back("planted_gain must be finite and >= 0");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    errors.push_back("noise_scale must be finite and >= 0");
  }
  if (!std::isfinite(planted_shift)) errors.push_back("planted_shift must be finite");
  if (errors.empty()) return;
  std::string msg = "invalid synthetic config:";
  for (const auto& e : errors) msg += " " + e + ";";
  throw std::invalid_argument(msg);
}

namespace {

Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order keeps the stream layout independent of Eigen storage.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

std::string sample_name(Label label, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d", label == Label::benign ? "benign" : "malicious",
                index);
  return buf;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int d = cfg.hidden_dim;
  const int n = cfg.tokens_per_sample;

  SyntheticData out;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(normal_matrix(rng, d, cfg.planted_dirs));
  Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, cfg.planted_dirs);
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }
  out.truth.planted_basis = basis;
  const Eigen::RowVectorXd shift =
      cfg.planted_shift * basis.rowwise().sum().transpose();

  auto make = [&](Label label, int count, std::vector<ActivationMatrix>& dst) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < count; ++s) {
      Eigen::MatrixXd text = normal_matrix(rng, n, d);
      Eigen::MatrixXd vis = normal_matrix(rng, n, d);
      if (label == Label::malicious) {
        text += cfg.planted_gain * normal_matrix(rng, n, cfg.planted_dirs) * basis.transpose();
        vis += cfg.planted_gain * normal_matrix(rng, n, cfg.planted_dirs) * basis.transpose();
        text.rowwise() += shift;
        vis.rowwise() += shift;
      }
      PlantedTokens planted;
      if (cfg.planted_token_pairs > 0) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (int i = 0; i < cfg.planted_token_pairs; ++i) {
          std::uniform_int_distribution<int> pick(i, n - 1);
          std::swap(order[i], order[pick(rng)]);
        }
        std::uniform_int_distribution<int> source(0, n - 1);
        for (int i = 0; i < cfg.planted_token_pairs; ++i) {
          const int v = order[i];
          const int t = source(rng);
          Eigen::RowVectorXd noise(d);
          for (int c = 0; c < d; ++c) noise(c) = normal(rng);
          vis.row(v) = text.row(t) + cfg.noise_scale * noise;
          planted.visual.push_back(v);
          planted.textual_source.push_back(t);
        }
      }
      const std::string id = sample_name(label, s);
      ActivationMatrix tm{text.cast<float>(), Modality::textual, label, cfg.layer, id, ""};
      ActivationMatrix vm{vis.cast<float>(), Modality::visual, label, cfg.layer, id, ""};
      dst.push_back(std::move(vm));
      dst.push_back(std::move(tm));
      out.truth.planted.emplace(id, std::move(planted));
    }
  };
  make(Label::benign, cfg.n_benign, out.benign);
  make(Label::malicious, cfg.n_malicious, out.malicious);
  return out;
}

}  // namespace actguard
