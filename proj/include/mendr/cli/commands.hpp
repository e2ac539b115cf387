#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mendr/autodiff/gradcheck.hpp"
#include "mendr/data/preprocess.hpp"
#include "mendr/data/synth.hpp"
#include "mendr/model/model.hpp"
#include "mendr/ssl/trainer.hpp"

// Command implementations behind tools/main.cpp. Each writes its human
// readable report to out and returns the numbers for callers and tests.
namespace mendr::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  fs::path out;
  data::SyntheticSpec spec;
  std::string profile = "mixed";
  std::string labeled;  // "", "disjoint" or "identical"
};
// Raw recordings plus truth.json with the generator's band energies.
std::size_t cmd_synth(const SynthOptions& opt, std::uint64_t seed, std::ostream& out);

struct PreprocessOptions {
  std::vector<fs::path> inputs;  // raw directories or CSV files
  fs::path out;
  data::PreprocessConfig config;
  double csv_rate = 0.0;  // required for CSV inputs
};
std::size_t cmd_preprocess(const PreprocessOptions& opt, std::ostream& out);

struct DecomposeOptions {
  fs::path input;
  fs::path out;
  bool include_high = false;
  bool verify = false;
};
struct DecomposeSummary {
  std::size_t segments = 0;
  std::map<wavelet::Band, double> energy;
  std::optional<double> max_error;
};
DecomposeSummary cmd_decompose(const DecomposeOptions& opt, std::ostream& out);

struct PretrainOptions {
  fs::path config;
  std::optional<std::uint64_t> seed;  // override of the config's seed
  std::optional<std::string> stage;
  bool include_high = false;          // forces include_high on when set
};
std::vector<ssl::StageResult> cmd_pretrain(const PretrainOptions& opt, std::ostream& out);

bool cmd_gradcheck(const std::string& module, const GradcheckOptions& opt, std::ostream& out);

enum class ExportKind { ellipsoids, tangent };

// Records per segment, patch and band (plus "combined"), schema 1.
nlohmann::json export_embeddings(const model::Model& m, const std::vector<data::Segment>& segs,
                                 ExportKind kind);

struct ExportOptions {
  fs::path checkpoint;
  fs::path input;
  fs::path out;
  ExportKind kind = ExportKind::ellipsoids;
  std::optional<fs::path> config;  // run config whose model must match the checkpoint
};
std::size_t cmd_export(const ExportOptions& opt, std::ostream& out);

struct ProbeReport {
  double accuracy = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t classes = 0;
};

// Which per-patch logs feed the probe: the combined transformer output, or
// its input (the Log-Euclidean combination of the band embeddings).
enum class ProbeSource { combined, combined_input };

// Segment-level features: mean tangent vector over patches.
std::vector<std::vector<double>> probe_features(const model::Model& m, const std::vector<data::Segment>& segs,
                                                ProbeSource source = ProbeSource::combined);

// Splits subjects of every class into train and test, standardizes with the
// training statistics and fits L2-regularized softmax regression.
ProbeReport linear_probe(const std::vector<std::vector<double>>& features, const std::vector<data::Segment>& segs,
                         std::uint64_t seed, double train_fraction = 0.5);

struct ProbeOptions {
  fs::path checkpoint;
  fs::path input;
  double train_fraction = 0.5;
  ProbeSource source = ProbeSource::combined;
  std::optional<fs::path> config;
  std::optional<fs::path> report;  // JSON copy of the result
};
ProbeReport cmd_probe(const ProbeOptions& opt, std::uint64_t seed, std::ostream& out);

// Throws ConfigError when the run config's model differs from the
// checkpoint's (subjects are ignored when the run config lists none).
void check_model_matches(const model::Model& m, const fs::path& run_config);

}  // namespace mendr::cli
