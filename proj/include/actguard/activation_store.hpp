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

#ifndef ACTGUARD_ACTIVATION_STORE_HPP_
#define ACTGUARD_ACTIVATION_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace actguard {

enum class Modality { visual, textual };
enum class Label { benign, malicious };

std::string_view to_string(Modality m);
std::string_view to_string(Label l);
// Both throw SchemaError on unknown names.
Modality parse_modality(std::string_view s);
Label parse_label(std::string_view s);

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Hidden activations of one sample, one modality, one layer.
/// Rows are tokens, columns are hidden units.
struct ActivationMatrix {
  RowMatrixF data;
  Modality modality = Modality::textual;
  Label label = Label::benign;
  int layer = 0;
  std::string sample_id;
  // Record id inside a dump. Derived from sample_id and modality when empty.
  std::string id;

  Eigen::Index tokens() const { return data.rows(); }
  Eigen::Index hidden_dim() const { return data.cols(); }
  Eigen::MatrixXd as_double() const { return data.cast<double>(); }
  std::string record_id() const;

  friend bool operator==(const ActivationMatrix& a, const ActivationMatrix& b);
};

struct ManifestRecord {
  std::string id;
  std::string sample_id;
  Modality modality = Modality::textual;
  Label label = Label::benign;
  std::int64_t tokens = 0;
  std::string file;
};

struct DumpManifest {
  static constexpr int kSupportedVersion = 1;

  int version = kSupportedVersion;
  std::string model;
  int layer = 0;
  std::int64_t hidden_dim = 0;
  std::vector<ManifestRecord> records;
};

struct Dump {
  DumpManifest manifest;
  std::vector<ActivationMatrix> records;
};

/// Raised for any malformed dump. `problems()` lists one entry per failing
/// record (or per schema violation), in manifest order.
class DumpError : public std::runtime_error {
 public:
  explicit DumpError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw little-endian float32 blobs, row-major.
void write_f32(const std::filesystem::path& file, const float* data,
               std::size_t count);
std::vector<float> read_f32(const std::filesystem::path& file);

/// Writes `manifest.json` plus one `<record-id>.f32` blob per record.
/// Records must be non-empty, finite, and share hidden_dim and layer.
DumpManifest write_dump(const std::vector<ActivationMatrix>& records,
                        const std::filesystem::path& dir,
                        const std::string& model = "unknown");

/// Strict reader. Every failing record is reported in a single DumpError.
Dump read_dump(const std::filesystem::path& dir);

struct SyntheticConfig {
  int n_benign = 100;
  int n_malicious = 100;
  int tokens_per_sample = 16;
  int hidden_dim = 32;
  int planted_dirs = 1;
  double planted_gain = 5.0;
  int planted_token_pairs = 2;
  double noise_scale = 0.01;
  // Constant offset of malicious tokens along the sum of planted directions.
  double planted_shift = 0.0;
  int layer = 0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending values.
  void validate() const;
};

struct PlantedTokens {
  std::vector<int> visual;         // planted visual token indices
  std::vector<int> textual_source;  // textual token each one copies
};

struct SyntheticGroundTruth {
  Eigen::MatrixXd planted_basis;  // hidden_dim x planted_dirs, orthonormal
  std::map<std::string, PlantedTokens> planted;  // keyed by sample_id
};

struct SyntheticData {
  std::vector<ActivationMatrix> benign;
  std::vector<ActivationMatrix> malicious;
  SyntheticGroundTruth truth;
};

/// Spiked-covariance generator. Every sample yields one visual and one
/// textual record of `tokens_per_sample` rows. Benign tokens are i.i.d.
/// standard normal; malicious tokens add `planted_gain` times standard normal
/// coefficients along the planted directions. In each sample some visual
/// tokens are replaced by a textual token plus `noise_scale` gaussian noise.
SyntheticData gen_synthetic(const SyntheticConfig& cfg);

}  // namespace actguard

#endif  // ACTGUARD_ACTIVATION_STORE_HPP_
