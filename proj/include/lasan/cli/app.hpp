#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lasan::cli {

// Entry point behind the `lasan` executable. args excludes the program
// name. Returns the process exit code; failures print one line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lasan::cli
