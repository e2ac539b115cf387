#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mendr/data/recording.hpp"
#include "mendr/model/model.hpp"
#include "mendr/ssl/losses.hpp"

namespace mendr::ssl {

// Declarative run description. Every key is optional except data and out;
// unknown keys are rejected.
struct RunConfig {
  std::filesystem::path data;  // segment dataset directory
  std::filesystem::path out;   // checkpoints and metrics.csv
  std::string stage = "autoencoder";  // or wavelet, combined, all
  std::uint64_t seed = 0;
  model::ModelConfig model;
  std::size_t batch_size = 256;
  std::map<Stage, std::size_t> epochs;  // default from pretrain_schedule
  std::map<Stage, double> lr;           // default from pretrain_schedule
  double weight_decay = 0.001;
  double eta_min = 1e-7;
  double clip = 1e7;

  nlohmann::json to_json() const;
  // Relative paths resolve against base.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static RunConfig from_file(const std::filesystem::path& p);

  StagePlan plan(Stage s, std::size_t steps_per_epoch) const;
};

struct StageResult {
  Stage stage = Stage::autoencoder;
  std::size_t steps = 0;
  double first_loss = 0;  // training loss at step 0
  double last_loss = 0;   // training loss at the last step
  // Loss on the whole dataset with fixed masks, negatives and no dropout,
  // before and after the stage.
  double eval_before = 0;
  double eval_after = 0;
  std::filesystem::path checkpoint;
};

// Training examples prepared once from the dataset.
struct Example {
  std::string subject;
  std::vector<double> present;
  wavelet::BandDecomposition bands;  // clean decomposition
  Matrix target;                     // reconstruction of the bands in use
};

std::vector<Example> prepare_examples(const std::vector<data::Segment>& segs, bool include_high);

// Stage losses on one example set, used for evaluation and by the CLI.
double eval_recon(const model::Model& m, const std::vector<Example>& ex);
double eval_loo(const model::Model& m, const std::vector<Example>& ex, std::uint64_t seed);
double eval_mae(const model::Model& m, const std::vector<Example>& ex, std::uint64_t seed);

// Runs one stage. Later stages load the previous stage's checkpoint from
// cfg.out (StageOrderError when it is missing). Writes <stage>.ckpt and
// appends to metrics.csv.
StageResult run_stage(const RunConfig& cfg, Stage stage);

// Stages named by cfg.stage in order; "all" runs every stage the model has.
std::vector<StageResult> run(const RunConfig& cfg);

// Stage preceding s for this model kind, if any.
std::optional<Stage> previous_stage(Stage s, model::ContextKind kind);

}  // namespace mendr::ssl
