#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "slkit/machine.hpp"
#include "slkit/transcript.hpp"

namespace slkit {

struct Budget {
  int64_t max_steps = 200;       // schedule length cap
  int max_ops_per_process = 2;   // documented default; programs carry the ops
  bool dedup = true;
  int64_t max_nodes = 8000000;   // enumeration / search state cap
  int jobs = 1;
};

struct TreeNode {
  int parent = -1;
  int via_pid = 0;
  int depth = 0;
  size_t events_begin = 0, events_end = 0;  // slice of event_pool
  Fingerprint fp{};
  bool complete = false;    // machine finished every program
  bool budget_cut = false;  // expansion stopped by the budget
  int dup_of = -1;          // representative node when deduplicated
  std::vector<std::pair<int, int>> children;  // (pid, node index)
};

// Prefix-closed tree of transcripts keyed by schedule prefix.
struct TranscriptTree {
  Machine root_machine;
  Budget budget;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<Event> event_pool;
  bool budget_exhausted = false;
  int64_t maximal_leaves = 0;

  Transcript transcript_of(int node) const;
  std::vector<int> schedule_of(int node) const;
};

TranscriptTree enumerate(const Machine& m, const Budget& b);

// Prefix-closed union of explicitly scripted schedules.
TranscriptTree enumerate_scripted(const Machine& m,
                                  const std::vector<std::vector<int>>& schedules);

// Lazy tree handle used by the checkers: either every interleaving of the
// machine up to the budget, or the prefix closure of scripted schedules.
struct TreeSource {
  Machine root;
  Budget budget;
  std::vector<std::vector<int>> scripted;

  bool is_scripted() const { return !scripted.empty(); }
  std::vector<int> next_pids(const std::vector<int>& prefix, const Machine& at) const;
};

RunResult run_random(const Machine& m, uint64_t seed, const Budget& b);

// A strong adaptive adversary: sees the full machine state and the
// transcript so far (including completed coin flips).
struct AdversaryPolicy {
  std::string name;
  std::function<int(const Machine&, const Transcript&, std::mt19937_64&)> choose;
  std::vector<int> scripted_schedule;  // replayed verbatim when nonempty
};

AdversaryPolicy policy_by_name(const std::string& name);

struct AdversaryStats {
  int64_t trials = 0;
  int64_t faults = 0;  // policy chose a disabled process
  std::map<std::string, int64_t> outcomes;
};

AdversaryStats run_adversary(const Machine& proto, const AdversaryPolicy& policy, int trials,
                             uint64_t seed,
                             const std::function<std::string(const Transcript&)>& outcome);

// Outcome helper for the counter experiment: "read=<v> flip=<c>".
std::string counter_outcome(const Transcript& t);

}  // namespace slkit
