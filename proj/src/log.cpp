#include "avgpress/log.hpp"

#include <mutex>
#include <set>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace avgpress {

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("avgpress");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

void warn_once(const std::string& message) {
  static std::mutex mu;
  static std::set<std::string> seen;
  bool first;
  {
    std::lock_guard lock(mu);
    first = seen.insert(message).second;
  }
  if (first) logger().warn("{}", message);
  else logger().debug("{}", message);
}

}  // namespace avgpress
