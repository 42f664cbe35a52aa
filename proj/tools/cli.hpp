#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace gsvit::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kData = 2,
    kNumeric = 3,
};

// ConfigError -> 1, NumericError -> 3, anything else (data, checkpoint, shape) -> 2.
int exit_code_for(const std::exception& error);

// args excludes the program name. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Synthetic corpus writer behind gsvit-synth.
int run_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsvit::cli
