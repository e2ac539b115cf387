#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mendr/cli/commands.hpp"
#include "mendr/error.hpp"
#include "mendr/log.hpp"

namespace {

using namespace mendr;
namespace fs = std::filesystem;

std::map<wavelet::Band, double> parse_amplitudes(const std::vector<std::string>& specs) {
  std::map<wavelet::Band, double> out;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidInput, "amplitude must be band=value: " + s);
    try {
      out[wavelet::band_from_name(s.substr(0, eq))] = std::stod(s.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      fail(ErrorKind::InvalidInput, "bad amplitude: " + s);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mendr: wavelet SPD EEG pretraining"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic raw EEG set");
  cli::SynthOptions so;
  std::vector<std::string> amps;
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--profile", so.profile, "mixed, alpha, beta or zero")->capture_default_str();
  synth->add_option("--amplitude", amps, "band=microvolts, overrides --profile");
  synth->add_option("--labeled", so.labeled, "Two labeled classes: disjoint or identical")
      ->check(CLI::IsMember({"disjoint", "identical"}));
  synth->add_option("--subjects", so.spec.n_subjects, "Subjects (per class when labeled)")->capture_default_str();
  synth->add_option("--segments", so.spec.n_segments, "Recordings per subject")->capture_default_str();
  synth->add_option("--segment-seconds", so.spec.segment_seconds)->capture_default_str();
  synth->add_option("--margin-seconds", so.spec.margin_seconds, "Extra signal at each end")
      ->capture_default_str();
  synth->add_option("--rate", so.spec.sample_rate, "Sample rate in Hz")->capture_default_str();
  synth->add_option("--noise", so.spec.noise, "Pink noise std in microvolts")->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Filter, resample and segment recordings");
  cli::PreprocessOptions po;
  pre->add_option("inputs", po.inputs, "Raw directories or CSV files")->required();
  pre->add_option("--out", po.out, "Dataset directory")->required();
  pre->add_option("--rate", po.csv_rate, "Sample rate of CSV inputs");
  pre->add_flag("--pretrain", po.config.pretrain_trim, "Skip short recordings, trim ends, cap per subject");
  pre->add_option("--segment-seconds", po.config.segment_seconds)->capture_default_str();

  // decompose
  auto* dec = app.add_subcommand("decompose", "Wavelet packet decomposition of a dataset");
  cli::DecomposeOptions dopt;
  dec->add_option("input", dopt.input, "Dataset directory")->required();
  dec->add_option("--out", dopt.out, "Output directory")->required();
  dec->add_flag("--include-high", dopt.include_high, "Keep the 64-128 Hz node");
  dec->add_flag("--verify", dopt.verify, "Recompose and report the max round-trip error");

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "Run pretraining stages from a config file");
  cli::PretrainOptions pto;
  std::string stage;
  pt->add_option("--config", pto.config, "Run config JSON")->required();
  pt->add_option("--stage", stage, "autoencoder, wavelet, combined or all");
  pt->add_flag("--include-high", pto.include_high, "Force the 64-128 Hz band on");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string module = "all";
  GradcheckOptions gco;
  gc->add_option("--module", module, "all, spd, stiefel, cholesky or losses")->capture_default_str();
  gc->add_option("--cases", gco.cases)->capture_default_str();
  gc->add_flag("--negate-coupling", gco.negate_coupling, "Flip the eigen coupling sign (negative control)");

  // export
  auto* ex = app.add_subcommand("export", "Export per-patch embeddings as JSON");
  cli::ExportOptions eo;
  std::string config_path;
  ex->add_option("checkpoint", eo.checkpoint)->required();
  ex->add_option("input", eo.input, "Dataset directory")->required();
  ex->add_option("--out", eo.out, "Output JSON file")->required();
  ex->add_option("--config", config_path, "Run config whose model must match the checkpoint");
  bool ellipsoids = false, tangent = false;
  auto* ef = ex->add_flag("--ellipsoids", ellipsoids, "Eigenvalues and top-3 axes (default)");
  ex->add_flag("--tangent", tangent, "Tangent vectors")->excludes(ef);

  // probe
  auto* pr = app.add_subcommand("probe", "Linear probe on a labeled dataset");
  cli::ProbeOptions pro;
  std::string report;
  pr->add_option("checkpoint", pro.checkpoint)->required();
  pr->add_option("input", pro.input, "Labeled dataset directory")->required();
  pr->add_option("--train-fraction", pro.train_fraction)->capture_default_str();
  pr->add_option("--config", config_path, "Run config whose model must match the checkpoint");
  pr->add_option("--report", report, "Write the result as JSON");
  std::string features = "combined";
  pr->add_option("--features", features, "combined or combined-input")
      ->check(CLI::IsMember({"combined", "combined-input"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (quiet) log().set_level(spdlog::level::warn);

  try {
    if (*synth) {
      if (!amps.empty()) so.spec.amplitudes = parse_amplitudes(amps);
      cli::cmd_synth(so, seed, std::cout);
    } else if (*pre) {
      cli::cmd_preprocess(po, std::cout);
    } else if (*dec) {
      cli::cmd_decompose(dopt, std::cout);
    } else if (*pt) {
      if (app.count("--seed")) pto.seed = seed;
      if (!stage.empty()) pto.stage = stage;
      cli::cmd_pretrain(pto, std::cout);
    } else if (*gc) {
      gco.seed = seed;
      if (!cli::cmd_gradcheck(module, gco, std::cout)) {
        std::fprintf(stderr, "error: GradcheckFailed: at least one check failed\n");
        return 1;
      }
    } else if (*ex) {
      eo.kind = tangent ? cli::ExportKind::tangent : cli::ExportKind::ellipsoids;
      if (!config_path.empty()) eo.config = config_path;
      cli::cmd_export(eo, std::cout);
    } else if (*pr) {
      if (!config_path.empty()) pro.config = config_path;
      if (!report.empty()) pro.report = report;
      if (features == "combined-input") pro.source = cli::ProbeSource::combined_input;
      cli::cmd_probe(pro, seed, std::cout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 2;
  }
  return 0;
}
