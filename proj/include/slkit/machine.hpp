#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slkit/seqspec.hpp"
#include "slkit/transcript.hpp"
#include "slkit/value.hpp"

namespace slkit {

// Every algorithm in the toolkit compiled to a deterministic step machine.
// One scheduler step executes exactly one labeled line containing a shared
// access (purely local lines are bundled with the preceding shared access),
// so a scheduler fully controls the interleaving.
enum class AlgorithmId {
  LinABA,            // wait-free linearizable ABA-detecting register
  SLABA,             // lock-free strongly linearizable ABA-detecting register
  BoundedMaxReg,     // wait-free strongly linearizable bounded max-register
  UnboundedMaxReg,   // lock-free unbounded modification
  DCSnapshot,        // lock-free double-collect snapshot
  SLSnapshot,        // strongly linearizable snapshot (atomic S and R)
  SLSnapshotComposed,  // same, with S and R as nested step machines
  SLSnapshotSeq,     // sequence-numbered variant used by the complexity bounds
  NoABASnapshot,     // the variant with a plain register instead of R
  LinCounter,        // per-process-register counter
  Atomic,            // every operation of a TypeSpec as one atomic step
  GenExecute,        // general construction over a simple type (see genconstruct)
  Livelock,          // two-process livelock fixture for the lock-freedom checker
};

std::string algorithm_name(AlgorithmId id);

// Line labels carried on base-access events; checkers key on these.
namespace lines {
// ABA register methods
inline constexpr const char* getseq_aread = "getseq_aread";  // A[c].Read in GetSeq
inline constexpr const char* xwrite = "xwrite";              // DWrite's X.Write
inline constexpr const char* xread1 = "xread1";              // DRead loop: first X.Read
inline constexpr const char* aread = "aread";                // DRead loop: A[q].Read
inline constexpr const char* awrite = "awrite";              // DRead loop: announce write
inline constexpr const char* xread2 = "xread2";              // DRead loop: second X.Read
// max-register
inline constexpr const char* mwrite = "mwrite";  // maxWrite's register write
inline constexpr const char* mread = "mread";    // maxRead's probe read
// double-collect snapshot
inline constexpr const char* cwrite = "cwrite";
inline constexpr const char* cread = "cread";
// snapshot construction (both variants)
inline constexpr const char* supdate = "supdate";  // SLupdate: S.update
inline constexpr const char* suscan = "suscan";    // SLupdate: S.scan
inline constexpr const char* rwrite = "rwrite";    // SLupdate: R.DWrite
inline constexpr const char* rread1 = "rread1";    // SLscan: first R.DRead
inline constexpr const char* sscan = "sscan";      // SLscan: S.scan
inline constexpr const char* rread2 = "rread2";    // SLscan: second R.DRead
inline constexpr const char* rhelp = "rhelp";      // SLscan: helping R.DWrite
// counter
inline constexpr const char* cntread = "cntread";
inline constexpr const char* cntwrite = "cntwrite";
// general construction
inline constexpr const char* gscan = "gscan";
inline constexpr const char* gupdate = "gupdate";
}  // namespace lines

struct Frame {
  int method = 0;
  int pc = 0;
  std::string obj_prefix;  // "" at top level, e.g. "R." when nested
  int64_t op_id = 0;
  std::string op_class;  // top-level class the frame is charged to
  Invocation invocation;
  std::vector<Val> locals;
  int ret_slot = -1;  // local slot of the parent frame receiving the result
};

struct ProcState {
  std::vector<Invocation> program;
  size_t prog_pos = 0;
  bool repeat = false;
  std::vector<Frame> frames;
  std::map<std::string, Val> persistent;
};

// Shared-step and sub-object instrumentation; not part of the machine state
// proper (excluded from fingerprints).
struct StepCounters {
  std::map<std::string, int64_t> shared_steps;     // per operation class
  std::map<std::string, int64_t> max_op_steps;     // worst single operation
  std::map<std::string, int64_t> sub_invocations;  // "class/obj.method"
  std::map<std::string, int64_t> op_count;         // completed ops per class
  int64_t total_shared = 0;
  int64_t responses = 0;
  int64_t max_scan_sum_run = 0;  // longest run of equal-seq-sum S.scan results
};

// A node of the general construction's shared graph.
struct GenNode {
  Invocation invocation;
  Val response;
  std::vector<int> preceding;  // node index or -1
  int owner = 0;               // process id
  int ordinal = 0;             // j-th published node of its owner (1-based)
};

struct SimpleTypeSpec;  // genconstruct.hpp

struct Fingerprint {
  uint64_t a = 0, b = 0;
  friend bool operator==(const Fingerprint& x, const Fingerprint& y) {
    return x.a == y.a && x.b == y.b;
  }
  friend bool operator<(const Fingerprint& x, const Fingerprint& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  }
};
struct FingerprintHash {
  size_t operator()(const Fingerprint& f) const { return f.a ^ (f.b * 0x9e3779b97f4a7c15ull); }
};

class Machine {
 public:
  AlgorithmId alg = AlgorithmId::SLABA;
  int n = 0;
  int64_t maxreg_bound = 0;  // BoundedMaxReg capacity
  bool nested_r = false;     // SLSnapshotComposed: R backed by the SLABA machine
  bool nested_s = false;     // SLSnapshotComposed: S backed by the DC snapshot
  bool randomize_seq = false;  // randomized GetSeq choice (default: minimum)

  std::map<std::string, Val> shared;
  std::vector<ProcState> procs;  // index p-1 for process p
  std::vector<GenNode> nodes;    // general-construction arena
  std::shared_ptr<const TypeSpec> atomic_spec;         // alg == Atomic
  std::shared_ptr<const SimpleTypeSpec> gen_spec;      // alg == GenExecute

  uint64_t rng_seed = 1;
  uint64_t rng_draws = 0;  // flips consumed so far (part of the state)

  StepCounters counters;
  int64_t next_op_id = 1;
  std::vector<std::string> warnings;

  // True iff process p can take a step (active frame or remaining program).
  bool enabled(int p) const;
  bool done() const;

  // Executes the next line for process p; appends emitted events.
  // Returns false (and emits nothing) when p is idle with an empty program.
  bool step(int p, std::vector<Event>& out);

  Fingerprint fingerprint() const;

  const Val& read_shared(const std::string& name) const;
  void write_shared(const std::string& name, Val v);

  static Val flip_value(uint64_t seed, uint64_t draw);

 private:
  friend class MachineOps;
  std::vector<int64_t> cur_op_steps_;  // instrumentation, not part of the state
};

// load: machine at the algorithm's declared initial state.
Machine load(AlgorithmId alg, int n, std::vector<std::vector<Invocation>> programs,
             std::vector<bool> repeat = {});
Machine load_atomic(TypeSpec spec, int n, std::vector<std::vector<Invocation>> programs,
                    std::vector<bool> repeat = {});
Machine load_maxreg(int64_t bound, int n, std::vector<std::vector<Invocation>> programs,
                    std::vector<bool> repeat = {});
Machine load_gen(std::shared_ptr<const SimpleTypeSpec> spec, int n,
                 std::vector<std::vector<Invocation>> programs);

struct RunResult {
  Transcript transcript;
  Machine machine;
  bool truncated = false;  // schedule referenced an idle process
};

// run: folds step over a schedule of process ids.
RunResult run(Machine m, const std::vector<int>& schedule);

// step_report: current per-class metrics.
StepCounters step_report(const Machine& m);

// ---- Scenario files ----------------------------------------------------
// Header `alg=<id> n=<count>`, per-process lines `p<k>: <op>(<args>); ...`
// (prefix `repeat` for cyclic programs), optional `schedule: 1 2 1 ...`.
struct Scenario {
  std::string alg_id;
  int n = 0;
  std::vector<std::vector<Invocation>> programs;
  std::vector<bool> repeat;
  std::vector<std::vector<int>> schedules;
};

Scenario parse_scenario(const std::string& text);
Machine machine_from_scenario(const Scenario& sc);
// The sequential spec matching a machine's implemented type.
TypeSpec spec_for_machine(const Machine& m);

}  // namespace slkit
