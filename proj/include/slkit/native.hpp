#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slkit/seqspec.hpp"
#include "slkit/transcript.hpp"

namespace slkit {

// One recorded operation of a stress run. Ticks come from a global
// monotonic counter; happens-before of the recorded history respects them.
struct StressRecord {
  int process = 0;  // 1..threads
  Invocation invocation;
  Val response;
  int64_t invoke_tick = 0;
  int64_t response_tick = 0;
};

struct StressResult {
  int threads = 0;
  std::vector<StressRecord> records;
  bool aborted = false;
  int64_t max_dwrite_shared_steps = 0;  // instrumented write path length
  int64_t max_update_s_ops = 0;         // snapshot: S/R invocations per update
  History history() const;              // tick-ordered inv/rsp events on "O"
};

// Hardware-atomic backends. Registers are single 64-bit words accessed with
// sequentially consistent loads and stores only (no compare-and-swap);
// single-writer locations are written only by their owner.
StressResult stress_slaba(int threads, int ops_per_thread, uint64_t seed, double write_ratio);
StressResult stress_snapshot(int threads, int ops_per_thread, uint64_t seed, double update_ratio);

struct ThroughputReport {
  int64_t ops = 0;
  double seconds = 0;
  double ops_per_sec = 0;
  std::map<std::string, int64_t> per_class;
  int64_t max_dwrite_shared_steps = 0;
  bool watchdog_ok = true;  // global op counter kept increasing
};

ThroughputReport throughput_slaba(int threads, int duration_ms, uint64_t seed);
ThroughputReport throughput_snapshot(int threads, int duration_ms, uint64_t seed);

}  // namespace slkit
