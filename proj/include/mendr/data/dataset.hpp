#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mendr/data/recording.hpp"

namespace mendr::data {

// Segment datasets: <id>.bin (little-endian f32, channels-major), <id>.json
// sidecar and a manifest.json listing ids in sorted order.
void write_dataset(const std::filesystem::path& dir, const std::vector<Segment>& segments);
// Sorted ids from the manifest. Missing directory -> IOError; directory
// without any files -> EmptyInput; files but no manifest -> CorruptDataset.
std::vector<std::string> list_dataset(const std::filesystem::path& dir);
Segment read_segment(const std::filesystem::path& dir, const std::string& id);
std::vector<Segment> read_dataset(const std::filesystem::path& dir);

// Raw recordings use the same container with a "mendr-raw" manifest.
void write_raw(const std::filesystem::path& dir, const std::vector<RawRecording>& recs);
std::vector<RawRecording> read_raw(const std::filesystem::path& dir);

// Header row required; first column is time and is ignored, the rest are
// channel columns in microvolts.
RawRecording read_csv(const std::filesystem::path& p, double sample_rate,
                      const std::string& subject_id);

}  // namespace mendr::data
