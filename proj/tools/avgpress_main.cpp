#include <iostream>

#include "avgpress/cli.hpp"

int main(int argc, char** argv) {
  return avgpress::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
