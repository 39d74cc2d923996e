#pragma once

#include <string>

#include <spdlog/spdlog.h>

namespace avgpress {

// Library-wide logger writing to stderr. Created on first use.
spdlog::logger& logger();

// Warns the first time a given message is seen in this process; repeats go to debug.
void warn_once(const std::string& message);

}  // namespace avgpress
