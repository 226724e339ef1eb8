#pragma once

// Batch runner behind the `mabm` binary: run, compare, validate.
//
// Exit codes: 0 success, 1 invalid input (config, overrides, incomparable
// runs), 2 runtime failure.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mabm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "MABM_OUT";

struct RunOptions {
    std::filesystem::path config;
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> out;        // beats output.directory and MABM_OUT
    std::optional<std::filesystem::path> snapshots;  // beats run.snapshot_dir
    std::optional<int> workers;
    bool quiet = false;
};

/// Trains (unless snapshots are given), evaluates every (seed, product,
/// shock) cell and writes
///   <out>/run_manifest.json, <out>/summary.csv,
///   <out>/cells/seed-<s>/product-<p>/shock-<x>/*.csv,
///   <out>/snapshots/seed-<s>/product-<p>.bin
/// Output is assembled in a sibling staging directory and moved into place
/// only on success.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct CompareOptions {
    std::filesystem::path run_a;
    std::filesystem::path run_b;
    std::optional<std::string> product_a;
    std::optional<std::string> product_b;
    std::optional<std::filesystem::path> out;  // CSV copy of the table
};

/// Per (shock, quintile) deltas B - A of the seed-averaged metrics. Refuses
/// runs whose comparability hashes differ and names the differing fields.
int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err);

/// Prints every violation, or "OK".
int cmd_validate(const std::filesystem::path& config, const std::vector<std::string>& overrides, std::ostream& out,
                 std::ostream& err);

/// Argument parsing and dispatch for the binary.
int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mabm::cli
