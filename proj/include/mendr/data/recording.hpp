#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mendr/linalg/matrix.hpp"

namespace mendr::data {

// Continuous multichannel recording in microvolts.
struct RawRecording {
  double sample_rate = 0.0;
  std::vector<std::string> channels;
  Matrix data;  // channels x samples
  std::string subject_id;
  int label = -1;  // class for labeled synthetic sets, -1 otherwise

  double duration() const { return sample_rate > 0 ? data.cols() / sample_rate : 0.0; }
  // Throws InvalidInput on empty channels, non-positive rate, row count
  // mismatch or non-finite samples.
  void validate() const;
};

// One fixed-length window in the canonical 19-channel order after
// preprocessing. Absent channels are zero rows with present[c] == 0.
struct Segment {
  std::string id;
  std::string subject_id;
  std::vector<std::string> channels;
  std::vector<double> present;
  double sample_rate = 128.0;
  double scale = 1e5;
  int label = -1;
  Matrix data;
};

}  // namespace mendr::data
