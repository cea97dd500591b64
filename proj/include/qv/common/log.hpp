#pragma once

namespace qv {

/// Routes the default spdlog logger to stderr. verbosity: 0 warn, 1 info,
/// 2+ debug.
void init_logging(int verbosity);

}  // namespace qv
