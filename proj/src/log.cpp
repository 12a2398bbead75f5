#include "wams/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace wams::log {

std::shared_ptr<spdlog::logger> get() {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("wams");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::info);
    if (const char* env = std::getenv("WAMS_LOG_LEVEL")) l->set_level(spdlog::level::from_str(env));
    return l;
  }();
  return logger;
}

}  // namespace wams::log
