#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "slkit/machine.hpp"
#include "slkit/seqspec.hpp"
#include "slkit/transcript.hpp"

namespace slkit {

// Pairwise classification of invocation descriptions for simple types.
// First/Second refer to the argument order of SimpleTypeSpec::relation(a, b):
// FirstOverwrites means a overwrites b (H.b.a is equivalent to H.a).
enum class Relation { Commute, FirstOverwrites, SecondOverwrites, MutualOverwrite };

struct SimpleTypeSpec {
  std::string id;
  TypeSpec base;
  std::function<Relation(const Invocation&, const Invocation&)> relation;
};

// Dominance between invocation events: a one-way overwrite dominates, and
// mutual overwrites are resolved toward the higher process id.
bool dominates(const SimpleTypeSpec& spec, const Invocation& a, const Invocation& b);

// Bundled simple types. Identifiers: counter, maxreg:<B>, wregister.
std::shared_ptr<const SimpleTypeSpec> simple_counter(int n);
std::shared_ptr<const SimpleTypeSpec> simple_maxreg(int n, int64_t bound);
std::shared_ptr<const SimpleTypeSpec> simple_wregister(int n, int64_t domain_max = 3);
std::shared_ptr<const SimpleTypeSpec> simple_type_by_id(const std::string& id, int n);
// Declaration file: JSON with states/initial/invocations/delta/relations.
std::shared_ptr<const SimpleTypeSpec> simple_type_from_file(const std::string& path, int n);

// ---- graph extraction over a node arena ---------------------------------

struct NodeGraph {
  std::vector<int> nodes;                     // arena indices, BFS discovery order
  std::vector<std::pair<int, int>> edges;     // (from, to) arena indices
};
NodeGraph nodegraph(const std::vector<GenNode>& arena, const std::vector<int>& view);

struct ExtractedOp {
  int node = -1;  // arena index
  int64_t opid = 0;
  Invocation invocation;
  Val response;
  int process = 0;
};

struct PrecGraph {
  std::vector<ExtractedOp> ops;
  std::vector<std::vector<int>> succ;  // adjacency, indices into ops
  bool has_edge(int i, int j) const;
  bool reaches(int i, int j) const;  // path of length >= 1
};

// Extraction of a precedence graph from a vector of node references;
// operation ids follow opid = ordinal*n + (p-1).
PrecGraph precgraph(const std::vector<GenNode>& arena, const std::vector<int>& view, int n);

// Adds cycle-safe dominance edges over a deterministic topological order.
PrecGraph lingraph(const PrecGraph& g, const SimpleTypeSpec& spec);

// Deterministic topological order (lowest admissible opid first).
std::vector<int> topo_order(const PrecGraph& g);
SequentialHistory history_of(const PrecGraph& g, const std::vector<int>& order);

// The response a fresh operation computes from a view (used by the machine).
Val gen_response(const SimpleTypeSpec& spec, const std::vector<GenNode>& arena,
                 const std::vector<int>& view, const Invocation& invoke);

// ---- linearization-point analysis over transcripts -----------------------

struct GenOpInfo {
  int64_t op_id = 0;
  int process = 0;
  Invocation invocation;
  Val response;  // actual, or the node-determined response while pending
  bool complete = false;
  int64_t scan_time = Transcript::kInfinity;
  int64_t update_time = Transcript::kInfinity;
  int64_t pt = Transcript::kInfinity;
};

// Computes pt for every operation: an operation inherits the earliest
// qualifying dominator pt inside its scan..update window, else linearizes at
// its own root update.
std::vector<GenOpInfo> gen_pt(const Machine& final_machine, const Transcript& t);

// Orders finite-pt operations by pt; ties dominated-first, then by process.
SequentialHistory gen_order(const Machine& final_machine, const Transcript& t,
                            std::vector<GenOpInfo>* info_out = nullptr);

// Appends solo completions for every linearized-but-incomplete operation.
RunResult fill(const RunResult& rr);

// Brute-force check of the declared relation over every valid history up to
// the bound; returns false and a diagnostic on the first violation.
bool verify_relation(const SimpleTypeSpec& spec, int bound, std::string* diagnostic = nullptr);

}  // namespace slkit
