#pragma once

// `cin run` and `cin montecarlo`. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include "cin/metrics.hpp"

#include <filesystem>
#include <iosfwd>

namespace cin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point shared by the tool and the tests. Tables go to `out`, diagnostics to `err`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

void write_trace_csv(const std::filesystem::path& path, const sim::VehicleTrace& trace);

}  // namespace cin::cli
