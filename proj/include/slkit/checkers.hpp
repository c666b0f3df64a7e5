#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slkit/machine.hpp"
#include "slkit/scheduler.hpp"
#include "slkit/seqspec.hpp"
#include "slkit/transcript.hpp"

namespace slkit {

// op_id -> 1-based transcript time, kInfinity when the defining step is
// absent. Valid assignments place every op inside its own interval.
struct PtAssignment {
  std::map<int64_t, int64_t> pt;
};

struct LinearizationWitness {
  bool found = false;
  SequentialHistory order;
  int64_t states_explored = 0;
  std::string note;
};

// Completion/interleaving search over a single history. Pending operations
// may be dropped or completed with their automaton response.
LinearizationWitness check_linearizable(const History& h, const TypeSpec& spec,
                                        size_t op_limit = 28);

// Long complete histories: overlap-cluster decomposition with exit-state
// propagation across cluster boundaries. Exact for complete histories.
LinearizationWitness check_linearizable_windowed(const History& h, const TypeSpec& spec,
                                                 size_t cluster_cap = 24);

struct SLOptions {
  bool use_memo = true;
  int64_t max_states = 8000000;
};

struct SLVerdict {
  enum class Result { Witness, Counterexample, Inconclusive };
  Result result = Result::Inconclusive;
  int64_t states = 0;
  int64_t edges = 0;
  bool truncated = false;  // some branch hit the step budget
  std::vector<int> failing_prefix;  // deepest schedule prefix with no consistent extension
  SequentialHistory sample;         // linearization of one maximal path (witness case)
  std::string note;
};

// Decides existence of a prefix-preserving linearization function over the
// tree: depth-first search that appends operations at response edges only
// (pending operations may be committed early, before the responding one) and
// propagates only extensions of the parent's choice.
SLVerdict check_strong_linearizable(const TreeSource& tree, const TypeSpec& spec,
                                    const SLOptions& opts = {});

// Linearization points after the register algorithms' rules: reads at their
// final second collect, writes at their register write.
PtAssignment slaba_pt(const Transcript& t);

// Snapshot construction rules: scans at their final second DRead; updates at
// the earliest qualifying scan or their own R write, whichever is first.
PtAssignment slss_pt(const Transcript& t, bool with_seq = false);

// True iff ordering finite-pt operations by pt (writers before readers at
// ties, then ascending process id) yields a linearization of Gamma(t).
bool validate_pt(const Transcript& t, const PtAssignment& pt, const TypeSpec& spec,
                 std::string* why = nullptr);

// The value component `process` of the nested snapshot object "S" holds at
// time `at`, induced by the linearization points pt_s of S's operations.
Val interpreted_value(const Transcript& t, const PtAssignment& pt_s, int process, int64_t at);

struct LockFreeVerdict {
  enum class Result { Pass, Fail, Inconclusive };
  Result result = Result::Inconclusive;
  int64_t states = 0;
  std::string note;
};

// Lock-freedom as cycle-freeness: no reachable cycle of machine states in
// which an operation is pending but no operation ever completes.
LockFreeVerdict check_lockfree(const Machine& m, const Budget& b);

}  // namespace slkit
