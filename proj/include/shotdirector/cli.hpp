#pragma once

#include <iosfwd>

namespace shotdirector {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// Entry point of the `shotdirector` tool. Subcommands: plucker, mask,
/// curate, metrics, demo-forward, gradcheck. Returns 0 on success, 1 on
/// usage/validation errors, 2 on I/O failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shotdirector
