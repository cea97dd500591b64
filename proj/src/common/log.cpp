#include "qv/common/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace qv {

void init_logging(int verbosity) {
  auto logger = spdlog::get("qv");
  if (!logger) logger = spdlog::stderr_logger_mt("qv");
  logger->set_pattern("[%H:%M:%S] [%l] %v");
  spdlog::set_default_logger(logger);
  if (verbosity <= 0) {
    spdlog::set_level(spdlog::level::warn);
  } else if (verbosity == 1) {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::debug);
  }
}

}  // namespace qv
