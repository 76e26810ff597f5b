#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace layerlimit::cli {

// Exit codes of run().
inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kRefused = 2;

// Runs one command line (without the program name). Reports go to out;
// errors are written to err as JSON objects.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace layerlimit::cli
