#pragma once

#include <spdlog/spdlog.h>

namespace mendr {

// Library-wide logger ("mendr"), writing to stderr.
spdlog::logger& log();

}  // namespace mendr
