#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "equidiv/natural.hpp"

namespace equidiv::scan {

/// Inclusive scan range. Sieve mode requires hi < 2^64.
struct ScanWindow {
  Natural lo = 1;
  Natural hi = 1;
};

enum class RunSource { scan, structured_search, imported };

const char* run_source_name(RunSource s);
RunSource run_source_from_name(const std::string& name);

/// A run of consecutive integers all with exactly k divisors. `truncated`
/// marks runs cut off by a window boundary (maximality not established on
/// that side).
struct RunRecord {
  std::uint64_t k = 0;
  Natural start;
  std::uint64_t length = 0;
  RunSource source = RunSource::scan;
  bool truncated = false;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

struct SieveOptions {
  std::uint64_t block_size = std::uint64_t{1} << 22;
  std::uint64_t max_window = 100'000'000;  // entries held at once by sieve_tau_block
  unsigned threads = 1;                    // 0 = hardware concurrency
};

/// Divisor counts for the whole window: element i is tau(lo + i). Computed
/// by a segmented sieve, no per-element factorization. Throws
/// Error(window_too_large) when the window exceeds max_window entries.
std::vector<std::uint32_t> sieve_tau_block(const ScanWindow& window,
                                           const SieveOptions& opts = {});

/// All maximal runs of tau-value k with length >= min_length, in increasing
/// start order. Window-boundary runs are flagged truncated, not dropped.
std::vector<RunRecord> find_runs(std::uint64_t k, const ScanWindow& window,
                                 std::uint64_t min_length = 2,
                                 const SieveOptions& opts = {});

/// Earliest run achieving the maximum length in the window, or nothing when
/// no integer in the window has tau = k.
std::optional<RunRecord> longest_run(std::uint64_t k, const ScanWindow& window,
                                     const SieveOptions& opts = {});

/// One pass over the window recording, for every divisor count seen, the
/// longest (earliest) untruncated-or-not run. Used for bound sweeps.
std::unordered_map<std::uint32_t, RunRecord> longest_runs_by_k(
    const ScanWindow& window, const SieveOptions& opts = {});

}  // namespace equidiv::scan
