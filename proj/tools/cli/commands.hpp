#pragma once

#include "psld/rss.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace psld::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Bad flag value or combination; reported with exit code 1.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Runs one command line (args excludes the program name). Normal output
/// goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Graph, design and Monte-Carlo stream used by `rss-check`.
struct RssCheckSetup {
    GraphSpec graph;
    SampleDesign design;
    Rng mc_rng;
};
RssCheckSetup rss_check_setup(std::size_t nodes, double prob, std::uint64_t seed);

/// Hex SHA-256 of a file's raw bytes.
std::string sha256_file(const std::string& path);

} // namespace psld::cli
