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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>

#include "actguard/activation_store.hpp"
#include "actguard/attribution.hpp"
#include "actguard/diagnostics.hpp"
#include "actguard/repair.hpp"
#include "actguard/subspace.hpp"
#include "actguard/verify.hpp"

namespace actguard::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace

json ToolConfig::to_json() const {
  return {{"top_frac", top_frac}, {"k_eigen", k_eigen},     {"beta", beta},
          {"eps", eps},           {"delta_rel", delta_rel}, {"pca_p", pca_p},
          {"seed", seed}};
}

void ToolConfig::merge(const json& j) {
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  static const std::set<std::string> known = {"top_frac", "k_eigen", "beta", "eps",
                                              "delta_rel", "pca_p", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw UsageError("config: unknown key '" + key + "'");
  }
  try {
    top_frac = j.value("top_frac", top_frac);
    k_eigen = j.value("k_eigen", k_eigen);
    beta = j.value("beta", beta);
    eps = j.value("eps", eps);
    delta_rel = j.value("delta_rel", delta_rel);
    pca_p = j.value("pca_p", pca_p);
    seed = j.value("seed", seed);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

void ToolConfig::validate() const {
  if (!(top_frac > 0.0 && top_frac <= 1.0)) {
    throw UsageError("top_frac must lie in (0, 1], got " + std::to_string(top_frac));
  }
  if (k_eigen < 1) throw UsageError("k_eigen must be >= 1, got " + std::to_string(k_eigen));
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw UsageError("beta must be finite and >= 0, got " + std::to_string(beta));
  }
  if (!(eps >= 0.0)) throw UsageError("eps must be >= 0");
  if (!(delta_rel > 0.0)) throw UsageError("delta_rel must be > 0");
  if (pca_p < 1) throw UsageError("pca_p must be >= 1, got " + std::to_string(pca_p));
}

ToolConfig load_config_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + file.string() + ": " + e.what());
  }
  ToolConfig cfg;
  cfg.merge(j);
  return cfg;
}

namespace {

// Precedence: flags > ACTGUARD_SEED (seed only) > --config file > defaults.
struct ConfigFlags {
  std::string config_file;
  std::optional<double> top_frac, beta, eps, delta_rel;
  std::optional<int> k_eigen, pca_p;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--top-frac", top_frac, "fraction of tokens kept per sample");
    app->add_option("--k", k_eigen, "harmful subspace dimension (clamped to d - 1)");
    app->add_option("--beta", beta, "benign-mean regularization strength");
    app->add_option("--eps", eps, "kernel and normalization stabilizer");
    app->add_option("--delta-rel", delta_rel, "relative ridge added before whitening");
    app->add_option("--pca-p", pca_p, "principal components used by diagnose");
    app->add_option("--seed", seed, "random seed");
  }

  ToolConfig resolve() const {
    ToolConfig cfg = config_file.empty() ? ToolConfig{} : load_config_file(config_file);
    if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
      try {
        std::size_t used = 0;
        cfg.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw UsageError(std::string(kSeedEnvVar) + " is not an unsigned integer: " + env);
      }
    }
    if (top_frac) cfg.top_frac = *top_frac;
    if (k_eigen) cfg.k_eigen = *k_eigen;
    if (beta) cfg.beta = *beta;
    if (eps) cfg.eps = *eps;
    if (delta_rel) cfg.delta_rel = *delta_rel;
    if (pca_p) cfg.pca_p = *pca_p;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  SyntheticConfig synth;
};

int cmd_synth(const SynthArgs& args, const ToolConfig& cfg, std::ostream& out) {
  SyntheticConfig sc = args.synth;
  sc.seed = cfg.seed;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SyntheticData data = gen_synthetic(sc);
  const fs::path root(args.out);
  write_dump(data.benign, root / "benign", "synthetic");
  write_dump(data.malicious, root / "malicious", "synthetic");

  json planted = json::object();
  for (const auto& [sample, p] : data.truth.planted) {
    planted[sample] = {{"visual", p.visual}, {"textual_source", p.textual_source}};
  }
  json basis = json::array();
  for (Eigen::Index c = 0; c < data.truth.planted_basis.cols(); ++c) {
    basis.push_back(vec_json(data.truth.planted_basis.col(c)));
  }
  const json truth = {
      {"format_version", kReportFormatVersion},
      {"planted_basis", basis},
      {"planted_tokens", planted},
      {"synthetic", {{"n_benign", sc.n_benign},
                     {"n_malicious", sc.n_malicious},
                     {"tokens_per_sample", sc.tokens_per_sample},
                     {"hidden_dim", sc.hidden_dim},
                     {"planted_dirs", sc.planted_dirs},
                     {"planted_gain", sc.planted_gain},
                     {"planted_token_pairs", sc.planted_token_pairs},
                     {"noise_scale", sc.noise_scale},
                     {"planted_shift", sc.planted_shift},
                     {"layer", sc.layer},
                     {"seed", sc.seed}}},
      {"config", cfg.to_json()}};
  write_json(root / "ground_truth.json", truth);
  out << "wrote " << data.benign.size() << " benign and " << data.malicious.size()
      << " malicious records to " << root.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- attribution

// Visual records are scored against the textual record of the same sample.
std::map<std::string, const ActivationMatrix*> textual_by_sample(const Dump& dump) {
  std::map<std::string, const ActivationMatrix*> by_sample;
  for (const auto& r : dump.records) {
    if (r.modality == Modality::textual) by_sample[r.sample_id] = &r;
  }
  return by_sample;
}

AttributionScores score_record(const ActivationMatrix& rec,
                               const std::map<std::string, const ActivationMatrix*>& texts,
                               double eps, const fs::path& dir) {
  if (rec.modality == Modality::textual) return attribute_textual(rec, eps);
  const auto it = texts.find(rec.sample_id);
  if (it == texts.end()) {
    throw std::runtime_error(dir.string() + ": visual record '" + rec.record_id() +
                             "' has no textual record for sample '" + rec.sample_id + "'");
  }
  if (it->second->hidden_dim() != rec.hidden_dim()) {
    throw std::runtime_error(dir.string() + ": record '" + rec.record_id() +
                             "' dimension mismatch with its textual partner");
  }
  return attribute_visual(rec, *it->second, eps);
}

struct AttributeArgs {
  std::string dump;
  std::string out;
};

int cmd_attribute(const AttributeArgs& args, const ToolConfig& cfg, std::ostream& out) {
  const Dump dump = read_dump(args.dump);
  const auto texts = textual_by_sample(dump);
  json records = json::object();
  for (const auto& rec : dump.records) {
    const AttributionScores s = score_record(rec, texts, cfg.eps, args.dump);
    records[rec.record_id()] = {{"modality", to_string(rec.modality)},
                                {"label", to_string(rec.label)},
                                {"sample_id", rec.sample_id},
                                {"mi", vec_json(s.scores)},
                                {"selected", select_top_tokens(s, cfg.top_frac)}};
  }
  write_json(args.out, {{"format_version", kReportFormatVersion},
                        {"dump", args.dump},
                        {"layer", dump.manifest.layer},
                        {"config", cfg.to_json()},
                        {"records", records}});
  out << "scored " << dump.records.size() << " records -> " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string benign;
  std::string malicious;
  std::string modality;
  std::string out;
  bool literal_projector = false;
};

struct Gathered {
  Eigen::MatrixXd rows;
  int layer = 0;
};

Gathered gather_selected(const fs::path& dir, Modality modality, const ToolConfig& cfg) {
  const Dump dump = read_dump(dir);
  const auto texts = textual_by_sample(dump);
  std::vector<Eigen::RowVectorXd> rows;
  for (const auto& rec : dump.records) {
    if (rec.modality != modality) continue;
    const AttributionScores s = score_record(rec, texts, cfg.eps, dir);
    for (int idx : select_top_tokens(s, cfg.top_frac)) {
      rows.push_back(rec.data.row(idx).cast<double>());
    }
  }
  if (rows.empty()) {
    throw std::runtime_error(dir.string() + ": no " + std::string(to_string(modality)) +
                             " records");
  }
  Gathered g;
  g.layer = dump.manifest.layer;
  g.rows.resize(static_cast<Eigen::Index>(rows.size()), dump.manifest.hidden_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) g.rows.row(static_cast<Eigen::Index>(i)) = rows[i];
  return g;
}

int cmd_fit(const FitArgs& args, const ToolConfig& cfg, std::ostream& out, std::ostream& err) {
  Modality modality;
  try {
    modality = parse_modality(args.modality);
  } catch (const SchemaError& e) {
    throw UsageError(e.what());
  }
  const Gathered b = gather_selected(args.benign, modality, cfg);
  const Gathered m = gather_selected(args.malicious, modality, cfg);
  if (b.layer != m.layer) {
    throw std::runtime_error("benign dump " + args.benign + " is layer " +
                             std::to_string(b.layer) + " but malicious dump " + args.malicious +
                             " is layer " + std::to_string(m.layer));
  }
  if (b.rows.cols() != m.rows.cols()) {
    throw std::runtime_error("hidden_dim mismatch: " + args.benign + " has " +
                             std::to_string(b.rows.cols()) + ", " + args.malicious + " has " +
                             std::to_string(m.rows.cols()));
  }
  if (b.rows.rows() < 2 || m.rows.rows() < 2) {
    throw std::runtime_error("fewer than 2 gathered rows per class (benign " +
                             std::to_string(b.rows.rows()) + ", malicious " +
                             std::to_string(m.rows.rows()) + ")");
  }
  const Eigen::Index d = b.rows.cols();
  const int k = clamp_eigen_count(cfg.k_eigen, d);
  if (k != cfg.k_eigen) {
    err << "warning: k_eigen " << cfg.k_eigen << " clamped to " << k << " for hidden_dim "
        << d << "\n";
  }
  const CovariancePair cov = CovariancePair::from_rows(b.rows, m.rows);
  FitOptions fit;
  fit.delta_rel = cfg.delta_rel;
  fit.orthonormalize = !args.literal_projector;
  fit.modality = modality;
  fit.layer = b.layer;
  const SafetySubspace sub = harmful_basis(cov, k, fit);
  write_subspace(sub, args.out,
                 {{"config", cfg.to_json()},
                  {"benign_dump", args.benign},
                  {"malicious_dump", args.malicious},
                  {"rows_benign", b.rows.rows()},
                  {"rows_malicious", m.rows.rows()},
                  {"k_requested", cfg.k_eigen}});
  out << "fitted " << to_string(modality) << " subspace: d=" << d << " k=" << k
      << " lambda_1=" << sub.eigenvalues(0) << " -> " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- project / fuse

RowMatrixF read_rows(const fs::path& file, Eigen::Index d) {
  const std::vector<float> values = read_f32(file);
  if (values.empty() || values.size() % static_cast<std::size_t>(d) != 0) {
    throw std::runtime_error(file.string() + ": " + std::to_string(values.size() * 4) +
                             " bytes is not a positive multiple of hidden_dim " +
                             std::to_string(d) + " x 4");
  }
  const auto n = static_cast<Eigen::Index>(values.size()) / d;
  RowMatrixF rows = Eigen::Map<const RowMatrixF>(values.data(), n, d);
  if (!rows.allFinite()) throw std::runtime_error(file.string() + ": non-finite entry");
  return rows;
}

void write_rows(const fs::path& file, const RowMatrixF& rows) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_f32(file, rows.data(), static_cast<std::size_t>(rows.size()));
}

struct ProjectArgs {
  std::string subspace;
  std::string input;
  std::string output;
  std::string report;
};

int cmd_project(const ProjectArgs& args, const ToolConfig& cfg, std::ostream& out) {
  const SafetySubspace sub = read_subspace(args.subspace);
  const RowMatrixF rows = read_rows(args.input, sub.dim());
  RepairConfig rc;
  rc.beta = cfg.beta;
  RowMatrixF repaired(rows.rows(), rows.cols());
  std::vector<double> magnitudes;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd h = rows.row(i).cast<double>().transpose();
    const Eigen::VectorXd hp = repair_activation(h, sub, rc);
    repaired.row(i) = hp.cast<float>().transpose();
    magnitudes.push_back((hp - h).norm());
  }
  write_rows(args.output, repaired);
  if (!args.report.empty()) {
    write_json(args.report, {{"format_version", kReportFormatVersion},
                             {"subspace", args.subspace},
                             {"input", args.input},
                             {"output", args.output},
                             {"tokens", rows.rows()},
                             {"intervention_magnitude", magnitudes},
                             {"config", cfg.to_json()}});
  }
  out << "repaired " << rows.rows() << " tokens -> " << args.output << "\n";
  return kExitOk;
}

struct FuseArgs {
  std::string visual_subspace;
  std::string textual_subspace;
  std::string input;
  std::string output;
  std::string report;
};

int cmd_fuse(const FuseArgs& args, const ToolConfig& cfg, std::ostream& out) {
  const SafetySubspace vis = read_subspace(args.visual_subspace);
  const SafetySubspace txt = read_subspace(args.textual_subspace);
  if (vis.dim() != txt.dim() || vis.layer != txt.layer) {
    throw std::runtime_error("subspace mismatch: " + args.visual_subspace + " (d=" +
                             std::to_string(vis.dim()) + ", layer " + std::to_string(vis.layer) +
                             ") vs " + args.textual_subspace + " (d=" +
                             std::to_string(txt.dim()) + ", layer " + std::to_string(txt.layer) +
                             ")");
  }
  const RowMatrixF rows = read_rows(args.input, vis.dim());
  RepairConfig rc;
  rc.beta = cfg.beta;
  RowMatrixF fused(rows.rows(), rows.cols());
  std::vector<double> weights, alpha, magnitude_txt;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd h = rows.row(i).cast<double>().transpose();
    const RepairedActivation r = repair_dual(h, vis, txt, rc);
    fused.row(i) = r.h_prime.cast<float>().transpose();
    weights.push_back(r.w_vis);
    alpha.push_back(r.visual_magnitude);
    magnitude_txt.push_back(r.textual_magnitude);
  }
  write_rows(args.output, fused);
  if (!args.report.empty()) {
    write_json(args.report, {{"format_version", kReportFormatVersion},
                             {"visual_subspace", args.visual_subspace},
                             {"textual_subspace", args.textual_subspace},
                             {"input", args.input},
                             {"output", args.output},
                             {"tokens", rows.rows()},
                             {"w_vis", weights},
                             {"visual_magnitude", alpha},
                             {"textual_magnitude", magnitude_txt},
                             {"config", cfg.to_json()}});
  }
  out << "fused " << rows.rows() << " tokens -> " << args.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::vector<std::string> benign;
  std::vector<std::string> malicious;
  std::string out;
};

int cmd_diagnose(const DiagnoseArgs& args, const ToolConfig& cfg, std::ostream& out) {
  if (args.benign.size() != args.malicious.size()) {
    throw UsageError("diagnose: " + std::to_string(args.benign.size()) +
                     " --benign dumps but " + std::to_string(args.malicious.size()) +
                     " --malicious dumps");
  }
  LayerDumps layers;
  for (std::size_t i = 0; i < args.benign.size(); ++i) {
    Dump b = read_dump(args.benign[i]);
    Dump m = read_dump(args.malicious[i]);
    if (b.manifest.layer != m.manifest.layer) {
      throw std::runtime_error("layer mismatch: " + args.benign[i] + " is layer " +
                               std::to_string(b.manifest.layer) + ", " + args.malicious[i] +
                               " is layer " + std::to_string(m.manifest.layer));
    }
    const int layer = b.manifest.layer;
    if (layers.count(layer)) {
      throw std::runtime_error("layer " + std::to_string(layer) + " given more than once (" +
                               args.benign[i] + ")");
    }
    layers[layer] = {std::move(b.records), std::move(m.records)};
  }
  const LayerReport report = layer_profile(layers, cfg.pca_p, cfg.delta_rel);
  json j = report.to_json();
  j["format_version"] = kReportFormatVersion;
  j["config"] = cfg.to_json();
  write_json(args.out, j);
  out << "selected layer " << report.selected_layer << " of " << report.layers.size()
      << " -> " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string mutation = "none";
  std::string out;
};

int cmd_verify(const VerifyArgs& args, const ToolConfig& cfg, std::ostream& out) {
  VerifyOptions opts;
  opts.seed = cfg.seed;
  opts.skip_orthonormalization = args.mutation == "skip-orthonormalization";
  const auto results = run_property_suite(opts);
  bool all = true;
  json summary = json::array();
  const PropertyResult* first_failure = nullptr;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    summary.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    if (!r.passed && !first_failure) first_failure = &r;
    all = all && r.passed;
  }
  if (first_failure) {
    out << "counterexample (" << first_failure->name << "): "
        << first_failure->counterexample.dump() << "\n";
  }
  if (!args.out.empty()) {
    write_json(args.out, {{"format_version", kReportFormatVersion},
                          {"seed", cfg.seed},
                          {"mutation", args.mutation},
                          {"properties", summary},
                          {"counterexample", first_failure ? first_failure->counterexample
                                                           : json(nullptr)}});
  }
  return all ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"actguard: activation attribution, harmful-subspace fitting and repair"};
  app.name("actguard");
  bool format_version = false;
  app.add_flag("--format-version", format_version,
               "print the supported artifact format versions and exit");
  app.require_subcommand(0, 1);

  ConfigFlags flags;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate planted synthetic dumps");
  flags.attach(synth_cmd);
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--n-benign", synth.synth.n_benign);
  synth_cmd->add_option("--n-malicious", synth.synth.n_malicious);
  synth_cmd->add_option("--tokens", synth.synth.tokens_per_sample);
  synth_cmd->add_option("--dim", synth.synth.hidden_dim);
  synth_cmd->add_option("--planted-dirs", synth.synth.planted_dirs);
  synth_cmd->add_option("--gain", synth.synth.planted_gain);
  synth_cmd->add_option("--token-pairs", synth.synth.planted_token_pairs);
  synth_cmd->add_option("--noise-scale", synth.synth.noise_scale);
  synth_cmd->add_option("--shift", synth.synth.planted_shift);
  synth_cmd->add_option("--layer", synth.synth.layer);

  AttributeArgs attribute;
  auto* attribute_cmd = app.add_subcommand("attribute", "score tokens of every record in a dump");
  flags.attach(attribute_cmd);
  attribute_cmd->add_option("--dump", attribute.dump)->required();
  attribute_cmd->add_option("--out", attribute.out, "report file")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a harmful subspace from two dumps");
  flags.attach(fit_cmd);
  fit_cmd->add_option("--benign", fit.benign)->required();
  fit_cmd->add_option("--malicious", fit.malicious)->required();
  fit_cmd->add_option("--modality", fit.modality)->required();
  fit_cmd->add_option("--out", fit.out)->required();
  fit_cmd->add_flag("--literal-projector", fit.literal_projector,
                    "use I - U U^T with the raw generalized basis (not a projector)");

  ProjectArgs project;
  auto* project_cmd = app.add_subcommand("project", "repair token activations with one subspace");
  flags.attach(project_cmd);
  project_cmd->add_option("--subspace", project.subspace)->required();
  project_cmd->add_option("--input", project.input, ".f32 activation blob")->required();
  project_cmd->add_option("--output", project.output)->required();
  project_cmd->add_option("--report", project.report);

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "dual-modal repair with adaptive fusion");
  flags.attach(fuse_cmd);
  fuse_cmd->add_option("--visual-subspace", fuse_args.visual_subspace)->required();
  fuse_cmd->add_option("--textual-subspace", fuse_args.textual_subspace)->required();
  fuse_cmd->add_option("--input", fuse_args.input)->required();
  fuse_cmd->add_option("--output", fuse_args.output)->required();
  fuse_cmd->add_option("--report", fuse_args.report);

  DiagnoseArgs diagnose;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "per-layer separation metrics");
  flags.attach(diagnose_cmd);
  diagnose_cmd->add_option("--benign", diagnose.benign, "benign dump, one per layer")->required();
  diagnose_cmd->add_option("--malicious", diagnose.malicious, "malicious dump, aligned with --benign")
      ->required();
  diagnose_cmd->add_option("--out", diagnose.out)->required();

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "run the algebraic property suite");
  flags.attach(verify_cmd);
  verify_cmd->add_option("--mutation", verify.mutation, "fault injection for mutation checks")
      ->check(CLI::IsMember({"none", "skip-orthonormalization"}));
  verify_cmd->add_option("--out", verify.out, "JSON summary");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (format_version) {
    out << json{{"dump", DumpManifest::kSupportedVersion},
                {"subspace", kSubspaceFormatVersion},
                {"report", kReportFormatVersion}}
               .dump()
        << "\n";
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    err << "usage error: a subcommand is required\n" << app.help();
    return kExitUsage;
  }

  try {
    const ToolConfig cfg = flags.resolve();
    if (synth_cmd->parsed()) return cmd_synth(synth, cfg, out);
    if (attribute_cmd->parsed()) return cmd_attribute(attribute, cfg, out);
    if (fit_cmd->parsed()) return cmd_fit(fit, cfg, out, err);
    if (project_cmd->parsed()) return cmd_project(project, cfg, out);
    if (fuse_cmd->parsed()) return cmd_fuse(fuse_args, cfg, out);
    if (diagnose_cmd->parsed()) return cmd_diagnose(diagnose, cfg, out);
    if (verify_cmd->parsed()) return cmd_verify(verify, cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace actguard::cli
