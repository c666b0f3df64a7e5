#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slkit/value.hpp"

namespace slkit {

// An invocation description: name, argument tuple and the id of the process
// performing it. Process ids run 1..n.
struct Invocation {
  std::string name;
  std::vector<Val> args;
  int process = 0;

  std::string str() const {
    std::string out = name;
    out += "(";
    for (size_t i = 0; i < args.size(); ++i) {
      if (i) out += ",";
      out += args[i].str();
    }
    out += ")";
    if (process > 0) out += "@" + std::to_string(process);
    return out;
  }
  friend bool operator==(const Invocation& a, const Invocation& b) {
    return a.name == b.name && a.args == b.args && a.process == b.process;
  }
  friend bool operator<(const Invocation& a, const Invocation& b) {
    if (a.name != b.name) return a.name < b.name;
    if (a.args != b.args) return a.args < b.args;
    return a.process < b.process;
  }
};

// One (invocation, response) pair of a sequential history.
struct SeqOp {
  Invocation invocation;
  Val response;
  int64_t op_id = 0;
};

// A sequential history: ordered complete operations with unique op ids.
struct SequentialHistory {
  std::vector<SeqOp> ops;

  std::string str() const {
    std::string out;
    for (size_t i = 0; i < ops.size(); ++i) {
      if (i) out += " ";
      out += ops[i].invocation.str() + "->" + ops[i].response.str();
    }
    return out;
  }
};

// A sequential type as a deterministic automaton. States are Val so built-in
// specs have canonical, comparable states; `delta` is total over the spec's
// invocation set and returns nullopt for unknown invocations.
struct TypeSpec {
  std::string name;
  int n = 0;  // process count the spec was instantiated for (0 = any)
  Val initial;
  std::function<std::optional<std::pair<Val, Val>>(const Val&, const Invocation&)> delta;
  // Small-domain invocation enumeration for oracles and relation checking.
  std::function<std::vector<Invocation>(void)> enumerate_invocations;
  bool states_comparable = true;
};

// apply: one automaton transition. Throws on unknown invocations.
inline std::pair<Val, Val> apply(const TypeSpec& spec, const Val& state, const Invocation& inv) {
  auto r = spec.delta(state, inv);
  if (!r) throw std::invalid_argument("unknown invocation " + inv.str() + " for spec " + spec.name);
  return *r;
}

struct ValidityReport {
  bool ok = true;
  size_t first_violation = 0;  // index of the first offending op when !ok
};

inline ValidityReport validity(const TypeSpec& spec, const SequentialHistory& h) {
  Val state = spec.initial;
  for (size_t i = 0; i < h.ops.size(); ++i) {
    auto r = spec.delta(state, h.ops[i].invocation);
    if (!r || r->second != h.ops[i].response) return {false, i};
    state = r->first;
  }
  return {true, 0};
}

inline bool is_valid(const TypeSpec& spec, const SequentialHistory& h) {
  return validity(spec, h).ok;
}

// Folds a history and returns the reached state (history must be valid).
inline Val fold_state(const TypeSpec& spec, const SequentialHistory& h) {
  Val state = spec.initial;
  for (const SeqOp& op : h.ops) {
    auto r = spec.delta(state, op.invocation);
    if (!r) throw std::invalid_argument("unknown invocation in history");
    state = r->first;
  }
  return state;
}

// equivalent: exact state comparison for automaton specs with comparable
// states; otherwise a depth-bounded continuation test.
bool equivalent(const TypeSpec& spec, const SequentialHistory& h1, const SequentialHistory& h2,
                int depth = 3);

// ---- Built-in specs ----------------------------------------------------
// Identifiers as used by the CLI: snapshot:<n>, aba, maxreg:<B>,
// maxreg:unbounded, counter:<n>.

// Single-writer snapshot over n entries, domain {nil, 0..domain_max}.
// update_p(x) writable only by p and only with x != nil.
TypeSpec snapshot_spec(int n, int64_t domain_max = 7);

// ABA-detecting register. DRead_q returns (value, flag) where flag is true
// iff some DWrite took effect since q's previous DRead (or since the initial
// state when q has none). The flag-on-first-read convention follows the
// register algorithms themselves; see README notes.
TypeSpec aba_spec(int n, int64_t domain_max = 7);

// Max-register storing the largest value written; bound < 0 means unbounded.
TypeSpec maxreg_spec(int n, int64_t bound);

// Counter with Inc_p and Read.
TypeSpec counter_spec(int n);

// Parses a CLI spec identifier.
TypeSpec spec_by_id(const std::string& id, int n);

// All responses an invocation could plausibly produce in some state; used by
// completion enumeration in oracles. Small domains only.
std::vector<Val> plausible_responses(const TypeSpec& spec, const Invocation& inv);

}  // namespace slkit
