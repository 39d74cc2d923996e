#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "avgpress/log.hpp"

int main(int argc, char** argv) {
  avgpress::logger().set_level(spdlog::level::err);
  doctest::Context context(argc, argv);
  return context.run();
}
