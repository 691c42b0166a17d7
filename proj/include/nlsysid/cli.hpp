#pragma once

#include <iosfwd>

namespace nlsysid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point of the `nlsysid` tool. Subcommands: simulate, lse-sweep,
/// sme-sweep, bmsb-estimate, bounds, reproduce <figure-id>.
int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

}  // namespace nlsysid
