#include "mendr/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "mendr/data/dataset.hpp"
#include "mendr/error.hpp"
#include "mendr/io.hpp"
#include "mendr/log.hpp"
#include "mendr/spd/spd.hpp"

namespace mendr::cli {

using nlohmann::json;
using wavelet::Band;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_columns(const Matrix& m) {
  json cols = json::array();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    json col = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) col.push_back(m(r, c));
    cols.push_back(std::move(col));
  }
  return cols;
}

wavelet::BandDecomposition decompose_segment(const data::Segment& s, bool include_high) {
  auto bd = wavelet::packet_decompose(wavelet::trim_to_patches(s.data), include_high);
  bd.channels = s.channels;
  return bd;
}

json embedding_record(const std::string& segment, std::size_t patch, const std::string& band,
                      const Matrix& log_m, ExportKind kind) {
  json r{{"segment", segment}, {"patch_index", patch}, {"band", band}};
  if (kind == ExportKind::tangent) {
    r["vector"] = tangent_features_of_log(log_m);
    return r;
  }
  SpdMatrix a = spd_exp(SymmetricMatrix(log_m));
  Ellipsoid e = ellipsoid_axes(a, std::min<std::size_t>(3, a.dim()));
  r["eigenvalues"] = a.eigen().values;
  r["axis_lengths"] = e.axis_lengths;
  r["directions"] = matrix_columns(e.axis_directions);
  return r;
}

}  // namespace

std::size_t cmd_synth(const SynthOptions& opt, std::uint64_t seed, std::ostream& out) {
  Rng rng = Rng(seed).fork("synth");
  data::SyntheticSpec spec = opt.spec;
  std::vector<data::SyntheticRecording> recs;
  if (opt.labeled.empty()) {
    if (spec.amplitudes.empty()) spec.amplitudes = data::profile(opt.profile);
    recs = data::synth_eeg(spec, rng);
  } else {
    recs = data::synth_labeled(spec, opt.labeled, rng);
  }
  data::write_raw(opt.out, data::recordings(recs));
  json truth = json::array();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    json e = json::object();
    for (const auto& [b, v] : recs[i].band_energy) e[std::string(wavelet::name(b))] = v;
    truth.push_back({{"recording", i},
                     {"subject_id", recs[i].recording.subject_id},
                     {"label", recs[i].recording.label},
                     {"band_energy", e}});
  }
  io::write_json(opt.out / "truth.json", {{"seed", seed}, {"recordings", truth}});
  out << "wrote " << recs.size() << " recordings to " << opt.out.string() << "\n";
  return recs.size();
}

std::size_t cmd_preprocess(const PreprocessOptions& opt, std::ostream& out) {
  require(!opt.inputs.empty(), ErrorKind::InvalidInput, "no inputs given");
  std::vector<data::RawRecording> recs;
  for (const auto& in : opt.inputs) {
    require(fs::exists(in), ErrorKind::IOError, "no such input: " + in.string());
    if (fs::is_directory(in)) {
      auto r = data::read_raw(in);
      recs.insert(recs.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    } else {
      require(opt.csv_rate > 0, ErrorKind::InvalidInput, "CSV input needs --rate");
      recs.push_back(data::read_csv(in, opt.csv_rate, in.stem().string()));
    }
  }
  auto segs = data::preprocess_many(recs, opt.config);
  require(!segs.empty(), ErrorKind::EmptyInput, "no segments survived preprocessing");
  data::write_dataset(opt.out, segs);
  out << "wrote " << segs.size() << " segments from " << recs.size() << " recordings to " << opt.out.string()
      << "\n";
  return segs.size();
}

DecomposeSummary cmd_decompose(const DecomposeOptions& opt, std::ostream& out) {
  auto ids = data::list_dataset(opt.input);
  require(!ids.empty(), ErrorKind::EmptyInput, "dataset has no segments: " + opt.input.string());
  io::ensure_dir(opt.out);
  DecomposeSummary sum;
  double worst = 0;
  for (const auto& id : ids) {
    auto seg = data::read_segment(opt.input, id);
    auto bd = decompose_segment(seg, opt.include_high);
    wavelet::write_decomposition(bd, opt.out / id);
    for (const auto& [b, e] : wavelet::band_energies(bd)) sum.energy[b] += e;
    if (opt.verify) {
      Matrix x = wavelet::trim_to_patches(seg.data);
      auto full = opt.include_high ? bd : wavelet::packet_decompose(x, true);
      worst = std::max(worst, max_abs(wavelet::packet_reconstruct(full) - x));
    }
    ++sum.segments;
  }
  double total = 0;
  for (const auto& [b, e] : sum.energy) total += e;
  out << "segments " << sum.segments << "\n";
  for (const auto& [b, e] : sum.energy)
    out << "band " << wavelet::name(b) << " energy " << num(e) << " share " << num(total > 0 ? e / total : 0.0)
        << "\n";
  if (opt.verify) {
    sum.max_error = worst;
    out << "verify max_error " << num(worst) << "\n";
  }
  return sum;
}

std::vector<ssl::StageResult> cmd_pretrain(const PretrainOptions& opt, std::ostream& out) {
  auto cfg = ssl::RunConfig::from_file(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.stage) {
    if (*opt.stage != "all") ssl::stage_from_string(*opt.stage);
    cfg.stage = *opt.stage;
  }
  if (opt.include_high) cfg.model.include_high = true;
  auto results = ssl::run(cfg);
  for (const auto& r : results)
    out << "stage " << ssl::to_string(r.stage) << " steps " << r.steps << " first_loss " << num(r.first_loss)
        << " last_loss " << num(r.last_loss) << " eval_before " << num(r.eval_before) << " eval_after "
        << num(r.eval_after) << " checkpoint " << r.checkpoint.string() << "\n";
  return results;
}

bool cmd_gradcheck(const std::string& module, const GradcheckOptions& opt, std::ostream& out) {
  auto results = run_gradcheck(module, opt);
  for (const auto& r : results)
    out << (r.passed() ? "PASS " : "FAIL ") << r.suite << "." << r.check << " cases " << r.cases << " failed "
        << r.failed << " max_rel_error " << num(r.max_rel_error) << " finite " << (r.finite ? "yes" : "no")
        << "\n";
  return all_passed(results);
}

json export_embeddings(const model::Model& m, const std::vector<data::Segment>& segs, ExportKind kind) {
  json records = json::array();
  for (const auto& s : segs) {
    auto e = model::embed(m, decompose_segment(s, m.config().include_high), s.present);
    for (std::size_t p = 0; p < e.combined.size(); ++p) {
      for (const auto& [b, logs] : e.bands)
        records.push_back(embedding_record(s.id, p, std::string(wavelet::name(b)), logs[p], kind));
      records.push_back(embedding_record(s.id, p, "combined", e.combined[p], kind));
    }
  }
  return {{"schema", 1},
          {"kind", kind == ExportKind::tangent ? "tangent" : "ellipsoids"},
          {"model", m.config().to_json()},
          {"records", std::move(records)}};
}

void check_model_matches(const model::Model& m, const fs::path& run_config) {
  auto cfg = ssl::RunConfig::from_file(run_config);
  json want = cfg.model.to_json();
  json have = m.config().to_json();
  if (cfg.model.subjects.empty()) {
    want.erase("subjects");
    have.erase("subjects");
  }
  require(want == have, ErrorKind::ConfigError,
          "checkpoint model " + have.dump() + " does not match config model " + want.dump());
}

std::size_t cmd_export(const ExportOptions& opt, std::ostream& out) {
  auto m = model::load_checkpoint(opt.checkpoint);
  if (opt.config) check_model_matches(*m, *opt.config);
  auto segs = data::read_dataset(opt.input);
  require(!segs.empty(), ErrorKind::EmptyInput, "dataset has no segments: " + opt.input.string());
  json j = export_embeddings(*m, segs, opt.kind);
  j["checkpoint"] = opt.checkpoint.string();
  std::size_t n = j["records"].size();
  if (opt.out.has_parent_path()) io::ensure_dir(opt.out.parent_path());
  io::write_json(opt.out, j);
  out << "wrote " << n << " records to " << opt.out.string() << "\n";
  return n;
}

std::vector<std::vector<double>> probe_features(const model::Model& m, const std::vector<data::Segment>& segs,
                                                ProbeSource source) {
  std::vector<std::vector<double>> feats;
  feats.reserve(segs.size());
  for (const auto& s : segs) {
    auto e = model::embed(m, decompose_segment(s, m.config().include_high), s.present);
    const auto& logs = source == ProbeSource::combined ? e.combined : e.combined_in;
    require(!logs.empty(), ErrorKind::InvalidInput, "segment " + s.id + " has no patches");
    std::vector<double> mean;
    for (const auto& l : logs) {
      auto v = tangent_features_of_log(l);
      if (mean.empty()) mean.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
    }
    for (auto& v : mean) v /= static_cast<double>(logs.size());
    feats.push_back(std::move(mean));
  }
  return feats;
}

ProbeReport linear_probe(const std::vector<std::vector<double>>& features, const std::vector<data::Segment>& segs,
                         std::uint64_t seed, double train_fraction) {
  require(features.size() == segs.size() && !segs.empty(), ErrorKind::ShapeError,
          "probe needs one feature vector per segment");
  require(train_fraction > 0 && train_fraction < 1, ErrorKind::InvalidInput, "train fraction must be in (0, 1)");
  std::map<int, std::set<std::string>> subjects;
  for (const auto& s : segs)
    if (s.label >= 0) subjects[s.label].insert(s.subject_id);
  require(subjects.size() >= 2, ErrorKind::InvalidInput,
          "probe needs at least two labeled classes, found " + std::to_string(subjects.size()));

  // Subject-level split per class so no subject is in both halves.
  Rng rng = Rng(seed).fork("probe.split");
  std::set<std::pair<int, std::string>> train_subjects;
  for (const auto& [label, subs] : subjects) {
    require(subs.size() >= 2, ErrorKind::InvalidInput,
            "class " + std::to_string(label) + " needs at least two subjects");
    std::vector<std::string> v(subs.begin(), subs.end());
    std::shuffle(v.begin(), v.end(), rng.engine());
    auto k = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(v.size())));
    k = std::clamp<std::size_t>(k, 1, v.size() - 1);
    for (std::size_t i = 0; i < k; ++i) train_subjects.insert({label, v[i]});
  }

  std::vector<int> classes;
  for (const auto& [label, subs] : subjects) classes.push_back(label);
  auto class_index = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), label) - classes.begin());
  };
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].label < 0) continue;
    (train_subjects.count({segs[i].label, segs[i].subject_id}) ? train : test).push_back(i);
  }

  const std::size_t d = features[0].size();
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (auto i : train)
    for (std::size_t j = 0; j < d; ++j) mu[j] += features[i][j];
  for (auto& v : mu) v /= static_cast<double>(train.size());
  for (auto i : train)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (features[i][j] - mu[j]) * (features[i][j] - mu[j]);
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(train.size())) + 1e-12;
  auto x = [&](std::size_t i, std::size_t j) { return (features[i][j] - mu[j]) / sd[j]; };

  // Softmax regression, full-batch gradient descent.
  const std::size_t k = classes.size();
  const double lr = 0.5, l2 = 1e-3;
  const int iters = 500;
  Matrix w(k, d + 1);
  std::vector<double> p(k);
  auto scores = [&](std::size_t i) {
    for (std::size_t c = 0; c < k; ++c) {
      double z = w(c, d);
      for (std::size_t j = 0; j < d; ++j) z += w(c, j) * x(i, j);
      p[c] = z;
    }
  };
  for (int it = 0; it < iters; ++it) {
    Matrix g(k, d + 1);
    for (auto i : train) {
      scores(i);
      double mx = *std::max_element(p.begin(), p.end()), z = 0;
      for (auto& v : p) z += (v = std::exp(v - mx));
      std::size_t y = class_index(segs[i].label);
      for (std::size_t c = 0; c < k; ++c) {
        double r = p[c] / z - (c == y ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) g(c, j) += r * x(i, j);
        g(c, d) += r;
      }
    }
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j <= d; ++j)
        w(c, j) -= lr * (g(c, j) / static_cast<double>(train.size()) + (j < d ? l2 * w(c, j) : 0.0));
  }

  ProbeReport rep;
  rep.classes = k;
  rep.n_train = train.size();
  rep.n_test = test.size();
  std::size_t correct = 0;
  for (auto i : test) {
    scores(i);
    auto pred = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += pred == class_index(segs[i].label);
  }
  rep.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  return rep;
}

ProbeReport cmd_probe(const ProbeOptions& opt, std::uint64_t seed, std::ostream& out) {
  auto m = model::load_checkpoint(opt.checkpoint);
  if (opt.config) check_model_matches(*m, *opt.config);
  auto segs = data::read_dataset(opt.input);
  auto rep = linear_probe(probe_features(*m, segs, opt.source), segs, seed, opt.train_fraction);
  out << "probe classes " << rep.classes << " train " << rep.n_train << " test " << rep.n_test << " accuracy "
      << num(rep.accuracy) << "\n";
  if (opt.report)
    io::write_json(*opt.report, {{"classes", rep.classes},
                                 {"n_train", rep.n_train},
                                 {"n_test", rep.n_test},
                                 {"accuracy", rep.accuracy},
                                 {"seed", seed}});
  return rep;
}

}  // namespace mendr::cli
