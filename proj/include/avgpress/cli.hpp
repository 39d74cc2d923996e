#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avgpress::cli {

// Runs one command line (args[0] is the program name). Results go to `out`,
// usage text and the JSON error record to `err`. Returns 0 on success, 1 on a
// usage, parameter or parse error and 2 on a numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avgpress::cli
