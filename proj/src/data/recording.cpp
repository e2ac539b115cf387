#include "mendr/data/recording.hpp"

#include <cmath>

#include "mendr/error.hpp"

namespace mendr::data {

void RawRecording::validate() const {
  require(!channels.empty(), ErrorKind::InvalidInput, "recording has no channels");
  require(sample_rate > 0, ErrorKind::InvalidInput, "sample rate must be positive");
  require(data.rows() == channels.size(), ErrorKind::InvalidInput,
          "data rows do not match the channel list");
  for (double v : data.values())
    require(std::isfinite(v), ErrorKind::InvalidInput, "recording contains non-finite samples");
}

}  // namespace mendr::data
