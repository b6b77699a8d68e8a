#pragma once

#include <string>
#include <vector>

namespace senh {

// Runs one subcommand (train, enhance, eval, synth, gradcheck) given the
// program arguments without the binary name. Returns the process exit code;
// errors are printed to stderr. Testable in-process.
int dispatch(const std::vector<std::string>& args);

}  // namespace senh
