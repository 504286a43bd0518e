#include "equidiv/scan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <thread>

#include "equidiv/error.hpp"

namespace equidiv::scan {

namespace {

std::uint64_t isqrt_u64(std::uint64_t n) {
  std::uint64_t r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r > n / r) --r;
  while ((r + 1) <= n / (r + 1)) ++r;
  return r;
}

// primes up to limit (inclusive), segmented to keep memory flat
std::vector<std::uint64_t> primes_up_to(std::uint64_t limit) {
  std::vector<std::uint64_t> primes;
  if (limit < 2) return primes;
  std::uint64_t root = isqrt_u64(limit);
  std::vector<bool> small(root + 1, true);
  for (std::uint64_t i = 2; i <= root; ++i) {
    if (!small[i]) continue;
    primes.push_back(i);
    for (std::uint64_t j = i * i; j <= root; j += i) small[j] = false;
  }
  std::vector<std::uint64_t> base = primes;
  const std::uint64_t seg = 1 << 20;
  std::vector<bool> mark;
  for (std::uint64_t lo = root + 1; lo <= limit; lo += seg) {
    std::uint64_t hi = std::min(limit, lo + seg - 1);
    mark.assign(hi - lo + 1, true);
    for (std::uint64_t p : base) {
      if (p * p > hi) break;
      std::uint64_t start = std::max(p * p, (lo + p - 1) / p * p);
      for (std::uint64_t m = start; m <= hi; m += p) mark[m - lo] = false;
    }
    for (std::uint64_t i = 0; i < mark.size(); ++i) {
      if (mark[i]) primes.push_back(lo + i);
    }
    if (hi == limit) break;  // avoid lo overflow on the last segment
  }
  return primes;
}

struct WindowU64 {
  std::uint64_t lo, hi;
};

WindowU64 checked_window(const ScanWindow& w, std::uint64_t max_window) {
  if (w.lo < 1 || w.lo > w.hi) throw std::invalid_argument("scan window: need 1 <= lo <= hi");
  if (!fits_u64(w.hi)) {
    fail(Errc::window_too_large, "scan window: hi " + to_decimal(w.hi) + " exceeds 2^64-1");
  }
  WindowU64 out{to_u64(w.lo), to_u64(w.hi)};
  if (out.hi - out.lo >= max_window) {
    fail(Errc::window_too_large, "scan window: width exceeds the memory budget of " +
                                     std::to_string(max_window) + " entries");
  }
  return out;
}

// tau for one block [lo, hi]: strip every prime <= sqrt(hi) out of each
// position, multiply (e+1) per prime, and count the single leftover prime
std::vector<std::uint32_t> tau_block(std::uint64_t lo, std::uint64_t hi,
                                     const std::vector<std::uint64_t>& primes) {
  const std::size_t width = static_cast<std::size_t>(hi - lo + 1);
  std::vector<std::uint64_t> rem(width);
  std::vector<std::uint32_t> tau(width, 1);
  for (std::size_t i = 0; i < width; ++i) rem[i] = lo + i;

  for (std::uint64_t p : primes) {
    if (p > hi / p) break;  // p*p > hi
    std::uint64_t start;
    std::uint64_t r = lo % p;
    if (r == 0) {
      start = lo;
    } else if (p - r > hi - lo) {
      continue;
    } else {
      start = lo + (p - r);
    }
    for (std::uint64_t m = start;; m += p) {
      std::size_t idx = static_cast<std::size_t>(m - lo);
      std::uint32_t e = 0;
      while (rem[idx] % p == 0) {
        rem[idx] /= p;
        ++e;
      }
      tau[idx] *= e + 1;
      if (m > hi - p) break;
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    if (rem[i] > 1) tau[i] *= 2;
  }
  return tau;
}

// streams tau over the window block by block, computing blocks in parallel
// but delivering them in order
void for_each_tau_block(const WindowU64& w, const SieveOptions& opts,
                        const std::function<void(std::uint64_t, const std::vector<std::uint32_t>&)>& sink) {
  const std::uint64_t block = std::max<std::uint64_t>(opts.block_size, 1024);
  const auto primes = primes_up_to(isqrt_u64(w.hi));
  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : opts.threads;

  std::vector<std::uint64_t> starts;
  for (std::uint64_t lo = w.lo;;) {
    starts.push_back(lo);
    if (w.hi - lo < block) break;
    lo += block;
  }

  std::vector<std::future<std::vector<std::uint32_t>>> inflight(starts.size());
  std::size_t launched = 0;
  auto launch_upto = [&](std::size_t end) {
    for (; launched < std::min(end, starts.size()); ++launched) {
      std::uint64_t lo = starts[launched];
      std::uint64_t hi = w.hi - lo < block ? w.hi : lo + block - 1;
      inflight[launched] = std::async(std::launch::async,
                                      [lo, hi, &primes] { return tau_block(lo, hi, primes); });
    }
  };
  for (std::size_t b = 0; b < starts.size(); ++b) {
    launch_upto(b + threads);
    std::vector<std::uint32_t> tau = inflight[b].get();
    sink(starts[b], tau);
  }
}

struct RunTracker {
  std::uint64_t target_k;
  std::uint64_t window_lo, window_hi;
  std::uint64_t run_start = 0, run_len = 0;
  std::function<void(RunRecord&&)> emit;

  void feed(std::uint64_t n, std::uint32_t tau_n) {
    if (tau_n == target_k) {
      if (run_len == 0) run_start = n;
      ++run_len;
      return;
    }
    flush(false);
  }

  void flush(bool at_window_end) {
    if (run_len == 0) return;
    RunRecord rec;
    rec.k = target_k;
    rec.start = from_u64(run_start);
    rec.length = run_len;
    rec.source = RunSource::scan;
    rec.truncated = (run_start == window_lo) || (at_window_end && run_start + run_len - 1 == window_hi);
    run_len = 0;
    emit(std::move(rec));
  }
};

}  // namespace

const char* run_source_name(RunSource s) {
  switch (s) {
    case RunSource::scan: return "scan";
    case RunSource::structured_search: return "structured-search";
    case RunSource::imported: return "imported";
  }
  return "?";
}

RunSource run_source_from_name(const std::string& name) {
  if (name == "scan") return RunSource::scan;
  if (name == "structured-search") return RunSource::structured_search;
  if (name == "imported") return RunSource::imported;
  fail(Errc::schema_violation, "unknown run source \"" + name + "\"");
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"k", r.k},
       {"start", to_decimal(r.start)},
       {"length", r.length},
       {"source", run_source_name(r.source)},
       {"truncated", r.truncated}};
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  if (!j.is_object()) fail(Errc::schema_violation, "run record: expected object");
  for (const char* key : {"k", "start", "length", "source"}) {
    if (!j.contains(key)) fail(Errc::schema_violation, std::string("run record: missing ") + key);
  }
  r.k = j["k"].get<std::uint64_t>();
  r.start = parse_decimal(j["start"].get<std::string>());
  r.length = j["length"].get<std::uint64_t>();
  r.source = run_source_from_name(j["source"].get<std::string>());
  r.truncated = j.value("truncated", false);
  if (r.length < 1) fail(Errc::schema_violation, "run record: length must be >= 1");
}

std::vector<std::uint32_t> sieve_tau_block(const ScanWindow& window, const SieveOptions& opts) {
  WindowU64 w = checked_window(window, opts.max_window);
  std::vector<std::uint32_t> out;
  out.reserve(static_cast<std::size_t>(w.hi - w.lo + 1));
  for_each_tau_block(w, opts, [&](std::uint64_t, const std::vector<std::uint32_t>& tau) {
    out.insert(out.end(), tau.begin(), tau.end());
  });
  return out;
}

std::vector<RunRecord> find_runs(std::uint64_t k, const ScanWindow& window,
                                 std::uint64_t min_length, const SieveOptions& opts) {
  if (k < 1) throw std::invalid_argument("find_runs: k must be >= 1");
  SieveOptions streaming = opts;
  streaming.max_window = std::numeric_limits<std::uint64_t>::max();  // streamed, not held
  WindowU64 w = checked_window(window, streaming.max_window);

  std::vector<RunRecord> out;
  RunTracker tracker{k, w.lo, w.hi};
  tracker.emit = [&](RunRecord&& rec) {
    if (rec.length >= min_length) out.push_back(std::move(rec));
  };
  for_each_tau_block(w, streaming, [&](std::uint64_t lo, const std::vector<std::uint32_t>& tau) {
    for (std::size_t i = 0; i < tau.size(); ++i) tracker.feed(lo + i, tau[i]);
  });
  tracker.flush(true);
  return out;
}

std::optional<RunRecord> longest_run(std::uint64_t k, const ScanWindow& window,
                                     const SieveOptions& opts) {
  if (k < 1) throw std::invalid_argument("longest_run: k must be >= 1");
  SieveOptions streaming = opts;
  streaming.max_window = std::numeric_limits<std::uint64_t>::max();
  WindowU64 w = checked_window(window, streaming.max_window);

  std::optional<RunRecord> best;
  RunTracker tracker{k, w.lo, w.hi};
  tracker.emit = [&](RunRecord&& rec) {
    if (!best || rec.length > best->length) best = std::move(rec);
  };
  for_each_tau_block(w, streaming, [&](std::uint64_t lo, const std::vector<std::uint32_t>& tau) {
    for (std::size_t i = 0; i < tau.size(); ++i) tracker.feed(lo + i, tau[i]);
  });
  tracker.flush(true);
  return best;
}

std::unordered_map<std::uint32_t, RunRecord> longest_runs_by_k(const ScanWindow& window,
                                                               const SieveOptions& opts) {
  SieveOptions streaming = opts;
  streaming.max_window = std::numeric_limits<std::uint64_t>::max();
  WindowU64 w = checked_window(window, streaming.max_window);

  std::unordered_map<std::uint32_t, RunRecord> best;
  std::uint32_t cur_k = 0;
  std::uint64_t run_start = 0, run_len = 0;
  auto close_run = [&](bool at_end) {
    if (run_len == 0) return;
    auto it = best.find(cur_k);
    if (it == best.end() || run_len > it->second.length) {
      RunRecord rec;
      rec.k = cur_k;
      rec.start = from_u64(run_start);
      rec.length = run_len;
      rec.source = RunSource::scan;
      rec.truncated = (run_start == w.lo) || (at_end && run_start + run_len - 1 == w.hi);
      best[cur_k] = std::move(rec);
    }
    run_len = 0;
  };
  for_each_tau_block(w, streaming, [&](std::uint64_t lo, const std::vector<std::uint32_t>& tau) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
      std::uint32_t t = tau[i];
      if (run_len > 0 && t == cur_k) {
        ++run_len;
      } else {
        close_run(false);
        cur_k = t;
        run_start = lo + i;
        run_len = 1;
      }
    }
  });
  close_run(true);
  return best;
}

}  // namespace equidiv::scan
