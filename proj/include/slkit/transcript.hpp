#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slkit/seqspec.hpp"
#include "slkit/value.hpp"

namespace slkit {

// One step of a transcript: an invocation or response event. Base-object
// accesses appear as adjacent inv/rsp pairs emitted by a single machine
// step; `line` carries the algorithm line label for those.
struct Event {
  enum class Kind : uint8_t { Inv, Rsp } kind;
  std::string obj;     // object id, e.g. "O", "X", "A[2]", "S", "R"
  int64_t op_id = 0;   // matching inv/rsp share the id
  int process = 0;     // 1..n
  Invocation invocation;  // set for Inv events
  Val response;           // set for Rsp events
  std::string line;       // pseudocode line label for base accesses

  std::string str() const;
};

// A finite sequence of steps. time(e) of the k-th event is k+1 (1-based);
// events absent from the transcript have time "infinity".
struct Transcript {
  int n = 0;
  std::vector<Event> events;

  size_t size() const { return events.size(); }
  // 1-based time of event index i.
  static int64_t time_of_index(size_t i) { return static_cast<int64_t>(i) + 1; }
  static constexpr int64_t kInfinity = INT64_MAX;

  Transcript prefix(size_t k) const {
    Transcript t;
    t.n = n;
    t.events.assign(events.begin(), events.begin() + std::min(k, events.size()));
    return t;
  }

  std::string to_text() const;
};

// High-level histories are transcripts whose per-process operations are
// atomic; produced by interpreted_history.
using History = Transcript;

// Summary of one operation occurring in a transcript.
struct OpRecord {
  int64_t op_id = 0;
  std::string obj;
  int process = 0;
  Invocation invocation;
  Val response;                        // valid iff complete
  int64_t inv_time = 0;                // 1-based
  int64_t rsp_time = Transcript::kInfinity;  // kInfinity while pending
  bool complete() const { return rsp_time != Transcript::kInfinity; }
};

// Per-process nesting check: responses must match the most recent open
// invocation by the same process.
bool well_formed(const Transcript& t);

// Projection onto an object or a process.
Transcript project_object(const Transcript& t, const std::string& obj);
Transcript project_process(const Transcript& t, int process);

// Gamma: keeps only events on `top_obj`, erasing the internal steps of every
// (complete or pending) operation. The result is a history.
History interpreted_history(const Transcript& t, const std::string& top_obj = "O");

// All operations on `obj` in order of invocation ("" = every object).
std::vector<OpRecord> collect_ops(const Transcript& t, const std::string& obj);

// True iff rsp(a) precedes inv(b). Throws on unknown op ids.
bool happens_before(const Transcript& t, int64_t op_a, int64_t op_b);

// Completions of a history: for each pending operation either append one of
// the caller-supplied candidate responses or drop the operation entirely.
// Visits every combination.
void for_each_completion(
    const History& h, const std::function<std::vector<Val>(const OpRecord&)>& candidates,
    const std::function<void(const History&)>& visit);

std::vector<History> completions(
    const History& h, const std::function<std::vector<Val>(const OpRecord&)>& candidates,
    size_t cap = 1 << 20);

}  // namespace slkit
