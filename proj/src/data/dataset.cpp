#include "mendr/data/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mendr/error.hpp"
#include "mendr/io.hpp"

namespace mendr::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "mendr-dataset";
constexpr const char* kRawFormat = "mendr-raw";

void write_blob(const fs::path& p, const Matrix& m) {
  std::vector<float> buf(m.size());
  std::transform(m.values().begin(), m.values().end(), buf.begin(),
                 [](double v) { return static_cast<float>(v); });
  io::write_f32(p, buf);
}

Matrix read_blob(const fs::path& p, std::size_t rows, std::size_t cols) {
  require(fs::exists(p), ErrorKind::CorruptDataset, "missing blob " + p.string());
  const auto buf = io::read_f32(p);
  require(buf.size() == rows * cols, ErrorKind::CorruptDataset,
          p.string() + ": blob holds " + std::to_string(buf.size()) + " values, sidecar expects " +
              std::to_string(rows * cols));
  Matrix m(rows, cols);
  std::copy(buf.begin(), buf.end(), m.data());
  return m;
}

json read_sidecar(const fs::path& p) {
  require(fs::exists(p), ErrorKind::CorruptDataset, "missing sidecar " + p.string());
  try {
    return io::read_json(p);
  } catch (const Error& e) {
    fail(ErrorKind::CorruptDataset, std::string("unreadable sidecar: ") + e.what());
  }
}

std::vector<std::string> read_manifest(const fs::path& dir, const std::string& format,
                                       const std::string& key) {
  require(fs::is_directory(dir), ErrorKind::IOError, "not a directory: " + dir.string());
  const fs::path mp = dir / "manifest.json";
  if (!fs::exists(mp)) {
    require(fs::directory_iterator(dir) != fs::directory_iterator(), ErrorKind::EmptyInput,
            "no data in " + dir.string());
    fail(ErrorKind::CorruptDataset, "missing manifest.json in " + dir.string());
  }
  json j;
  try {
    j = io::read_json(mp);
  } catch (const Error& e) {
    fail(ErrorKind::CorruptDataset, std::string("unreadable manifest: ") + e.what());
  }
  require(j.value("format", "") == format && j.contains(key) && j[key].is_array(),
          ErrorKind::CorruptDataset, mp.string() + " is not a " + format + " manifest");
  const auto ids = j[key].get<std::vector<std::string>>();
  require(std::is_sorted(ids.begin(), ids.end()) &&
              std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
          ErrorKind::CorruptDataset, "manifest ids must be sorted and unique");
  return ids;
}

template <typename T>
T get(const json& j, const char* key, const std::string& ctx) {
  require(j.contains(key), ErrorKind::CorruptDataset, ctx + ": sidecar lacks " + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::CorruptDataset, ctx + ": bad value for " + key);
  }
}

}  // namespace

void write_dataset(const fs::path& dir, const std::vector<Segment>& segments) {
  io::ensure_dir(dir);
  std::vector<std::string> ids;
  for (const auto& s : segments) {
    require(s.data.rows() == s.channels.size() && s.present.size() == s.channels.size(),
            ErrorKind::ShapeError, "segment " + s.id + " has inconsistent channel metadata");
    write_blob(dir / (s.id + ".bin"), s.data);
    io::write_json(dir / (s.id + ".json"), {{"format", "mendr-segment"},
                                            {"schema", 1},
                                            {"id", s.id},
                                            {"subject_id", s.subject_id},
                                            {"channels", s.channels},
                                            {"present", s.present},
                                            {"sample_rate", s.sample_rate},
                                            {"scale", s.scale},
                                            {"n_samples", s.data.cols()},
                                            {"label", s.label}});
    ids.push_back(s.id);
  }
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorKind::InvalidInput,
          "duplicate segment ids");
  io::write_json(dir / "manifest.json",
                 {{"format", kDatasetFormat}, {"schema", 1}, {"segments", ids}});
}

std::vector<std::string> list_dataset(const fs::path& dir) {
  return read_manifest(dir, kDatasetFormat, "segments");
}

Segment read_segment(const fs::path& dir, const std::string& id) {
  const json j = read_sidecar(dir / (id + ".json"));
  Segment s;
  s.id = get<std::string>(j, "id", id);
  require(s.id == id, ErrorKind::CorruptDataset, "sidecar id " + s.id + " does not match " + id);
  s.subject_id = get<std::string>(j, "subject_id", id);
  s.channels = get<std::vector<std::string>>(j, "channels", id);
  s.present = get<std::vector<double>>(j, "present", id);
  s.sample_rate = get<double>(j, "sample_rate", id);
  s.scale = get<double>(j, "scale", id);
  s.label = get<int>(j, "label", id);
  require(s.present.size() == s.channels.size(), ErrorKind::CorruptDataset,
          id + ": present mask length differs from channel count");
  s.data = read_blob(dir / (id + ".bin"), s.channels.size(), get<std::size_t>(j, "n_samples", id));
  return s;
}

std::vector<Segment> read_dataset(const fs::path& dir) {
  std::vector<Segment> out;
  for (const auto& id : list_dataset(dir)) out.push_back(read_segment(dir, id));
  return out;
}

void write_raw(const fs::path& dir, const std::vector<RawRecording>& recs) {
  io::ensure_dir(dir);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    r.validate();
    char buf[16];
    std::snprintf(buf, sizeof buf, "rec%05zu", i);
    write_blob(dir / (std::string(buf) + ".bin"), r.data);
    io::write_json(dir / (std::string(buf) + ".json"), {{"format", "mendr-raw-recording"},
                                                        {"subject_id", r.subject_id},
                                                        {"channels", r.channels},
                                                        {"sample_rate", r.sample_rate},
                                                        {"n_samples", r.data.cols()},
                                                        {"label", r.label}});
    ids.emplace_back(buf);
  }
  io::write_json(dir / "manifest.json", {{"format", kRawFormat}, {"schema", 1}, {"recordings", ids}});
}

std::vector<RawRecording> read_raw(const fs::path& dir) {
  std::vector<RawRecording> out;
  for (const auto& id : read_manifest(dir, kRawFormat, "recordings")) {
    const json j = read_sidecar(dir / (id + ".json"));
    RawRecording r;
    r.subject_id = get<std::string>(j, "subject_id", id);
    r.channels = get<std::vector<std::string>>(j, "channels", id);
    r.sample_rate = get<double>(j, "sample_rate", id);
    r.label = get<int>(j, "label", id);
    r.data = read_blob(dir / (id + ".bin"), r.channels.size(), get<std::size_t>(j, "n_samples", id));
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

RawRecording read_csv(const fs::path& p, double sample_rate, const std::string& subject_id) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open " + p.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::InvalidInput,
          p.string() + ": missing header row");
  const auto header = split_csv(line);
  require(header.size() >= 2, ErrorKind::InvalidInput,
          p.string() + ": header needs a time column and at least one channel");
  for (const auto& h : header) {
    char* end = nullptr;
    std::strtod(h.c_str(), &end);
    require(h.empty() || *end != '\0', ErrorKind::InvalidInput,
            p.string() + ": first row is numeric; a header row is required");
  }
  const std::size_t nc = header.size() - 1;
  std::vector<std::vector<double>> cols(nc);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    require(cells.size() == header.size(), ErrorKind::InvalidInput,
            p.string() + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(header.size()) + " columns");
    for (std::size_t c = 0; c < nc; ++c) {
      const std::string& s = cells[c + 1];
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s.c_str(), &end);
      require(!s.empty() && *end == '\0' && errno == 0, ErrorKind::InvalidInput,
              p.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
      cols[c].push_back(v);
    }
  }
  RawRecording r;
  r.sample_rate = sample_rate;
  r.subject_id = subject_id;
  r.channels.assign(header.begin() + 1, header.end());
  r.data = Matrix(nc, cols[0].size());
  for (std::size_t c = 0; c < nc; ++c) std::copy(cols[c].begin(), cols[c].end(), r.data.row(c).begin());
  require(r.data.cols() > 0, ErrorKind::EmptyInput, p.string() + ": no samples");
  r.validate();
  return r;
}

}  // namespace mendr::data
