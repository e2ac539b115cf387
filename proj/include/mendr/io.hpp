#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mendr::io {

using json = nlohmann::json;

// Raw little-endian arrays. Errors map to IOError.
void write_f64(const std::filesystem::path& p, std::span<const double> data);
std::vector<double> read_f64(const std::filesystem::path& p);
void write_f32(const std::filesystem::path& p, std::span<const float> data);
std::vector<float> read_f32(const std::filesystem::path& p);

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);

json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const json& j);

void ensure_dir(const std::filesystem::path& p);

}  // namespace mendr::io
