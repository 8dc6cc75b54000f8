#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smcsynth::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 1,
    /// Infeasible synthesis or a design that fails certification.
    kUncertified = 2,
};

/// Runs one command line (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "start:stop:steps" (linear, endpoints included) or "start:stop:steps,log".
std::vector<double> parse_grid(const std::string& spec);

}  // namespace smcsynth::cli
