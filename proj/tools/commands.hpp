#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attnalign::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kDataError = 2,
    kPartialFailure = 3,
};

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads a key=value config file; returns the equivalent "--key value" flags
// for every key not already present in `args`.
std::vector<std::string> config_flags(const std::string& path, const std::vector<std::string>& args);

} // namespace attnalign::cli
