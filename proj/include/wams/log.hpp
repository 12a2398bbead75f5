#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace wams::log {

/// Process-wide stderr logger. Level comes from WAMS_LOG_LEVEL
/// (trace, debug, info, warn, error, off); default info.
std::shared_ptr<spdlog::logger> get();

}  // namespace wams::log
