#pragma once

#include <spdlog/logger.h>

namespace nopeek::detail {

/// Library logger: stderr, level from NOPEEK_LOG (default warn).
spdlog::logger& logger();

}  // namespace nopeek::detail
