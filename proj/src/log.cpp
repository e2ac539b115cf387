#include "mendr/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

namespace mendr {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>("mendr",
                                              std::make_shared<spdlog::sinks::stderr_sink_st>());
    l->set_pattern("%l: %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *logger;
}

}  // namespace mendr
