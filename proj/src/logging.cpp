#include "nopeek/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

#include "log.hpp"

namespace nopeek {

namespace {

spdlog::level::level_enum env_level() {
  const char* env = std::getenv("NOPEEK_LOG");
  // from_str maps unknown names to "off"; fall back to warn instead.
  auto level = spdlog::level::warn;
  if (env && *env) {
    const auto parsed = spdlog::level::from_str(env);
    if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
  }
  return level;
}

}  // namespace

namespace detail {

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> l = [] {
    auto made = spdlog::stderr_color_mt("nopeek");
    made->set_level(env_level());
    return made;
  }();
  return *l;
}

}  // namespace detail

void init_logging() {
  spdlog::logger& l = detail::logger();
  l.set_level(env_level());
  spdlog::set_default_logger(spdlog::get("nopeek"));
}

}  // namespace nopeek
