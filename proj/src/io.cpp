#include "mendr/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "mendr/error.hpp"

namespace mendr::io {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

template <class T>
void write_raw(const std::filesystem::path& p, std::span<const T> data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IOError, "cannot open " + p.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size_bytes()));
  require(out.good(), ErrorKind::IOError, "write failed: " + p.string());
}

template <class T>
std::vector<T> read_raw(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary | std::ios::ate);
  require(in.good(), ErrorKind::IOError, "cannot open " + p.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  require(bytes % sizeof(T) == 0, ErrorKind::IOError,
          p.string() + ": size is not a multiple of " + std::to_string(sizeof(T)));
  std::vector<T> data(bytes / sizeof(T));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  require(in.good() || bytes == 0, ErrorKind::IOError, "read failed: " + p.string());
  return data;
}

}  // namespace

void write_f64(const std::filesystem::path& p, std::span<const double> data) {
  write_raw(p, data);
}
std::vector<double> read_f64(const std::filesystem::path& p) { return read_raw<double>(p); }
void write_f32(const std::filesystem::path& p, std::span<const float> data) { write_raw(p, data); }
std::vector<float> read_f32(const std::filesystem::path& p) { return read_raw<float>(p); }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(in.good(), ErrorKind::IOError, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  require(out.good(), ErrorKind::IOError, "cannot open " + p.string() + " for writing");
  out << text;
  require(out.good(), ErrorKind::IOError, "write failed: " + p.string());
}

json read_json(const std::filesystem::path& p) {
  const std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::IOError, p.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  require(!ec, ErrorKind::IOError, "cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace mendr::io
