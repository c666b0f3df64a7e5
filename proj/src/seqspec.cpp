#include "slkit/seqspec.hpp"

#include <algorithm>

namespace slkit {

namespace {

bool valid_extension(const TypeSpec& spec, Val state, const std::vector<Invocation>& invs,
                     const std::vector<Val>& rsps) {
  for (size_t i = 0; i < invs.size(); ++i) {
    auto r = spec.delta(state, invs[i]);
    if (!r || r->second != rsps[i]) return false;
    state = r->first;
  }
  return true;
}

// Depth-bounded continuation agreement: every invocation sequence of length
// <= depth must produce identical response sequences from both states.
bool continuations_agree(const TypeSpec& spec, const Val& s1, const Val& s2, int depth) {
  if (depth == 0) return true;
  auto invs = spec.enumerate_invocations ? spec.enumerate_invocations() : std::vector<Invocation>{};
  for (const Invocation& inv : invs) {
    auto r1 = spec.delta(s1, inv);
    auto r2 = spec.delta(s2, inv);
    if (!r1 != !r2) return false;
    if (!r1) continue;
    if (r1->second != r2->second) return false;
    if (!continuations_agree(spec, r1->first, r2->first, depth - 1)) return false;
  }
  return true;
}

}  // namespace

bool equivalent(const TypeSpec& spec, const SequentialHistory& h1, const SequentialHistory& h2,
                int depth) {
  if (!is_valid(spec, h1) || !is_valid(spec, h2)) return false;
  Val s1 = fold_state(spec, h1);
  Val s2 = fold_state(spec, h2);
  if (spec.states_comparable) return s1 == s2;
  return continuations_agree(spec, s1, s2, depth);
}

TypeSpec snapshot_spec(int n, int64_t domain_max) {
  TypeSpec spec;
  spec.name = "snapshot:" + std::to_string(n);
  spec.n = n;
  spec.initial = Val::vec(static_cast<size_t>(n), Val::nil());
  spec.delta = [n](const Val& state, const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    if (inv.name == "update") {
      if (inv.args.size() != 1 || inv.process < 1 || inv.process > n) return std::nullopt;
      if (inv.args[0].is_nil()) return std::nullopt;  // nil entries are never re-entered
      Val next = state;
      next.at(static_cast<size_t>(inv.process - 1)) = inv.args[0];
      return std::make_pair(next, Val::unit());
    }
    if (inv.name == "scan" && inv.args.empty()) return std::make_pair(state, state);
    return std::nullopt;
  };
  spec.enumerate_invocations = [n, domain_max]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p) {
      out.push_back({"scan", {}, p});
      for (int64_t v = 0; v <= domain_max; ++v) out.push_back({"update", {Val::integer(v)}, p});
    }
    return out;
  };
  return spec;
}

TypeSpec aba_spec(int n, int64_t domain_max) {
  TypeSpec spec;
  spec.name = "aba";
  spec.n = n;
  // state = (value, per-process dirty flags); dirty[q] records whether a
  // DWrite took effect since q's last DRead.
  spec.initial = Val::pair(Val::nil(), Val::vec(static_cast<size_t>(n), Val::boolean(false)));
  spec.delta = [n](const Val& state, const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    if (inv.process < 1 || inv.process > n) return std::nullopt;
    if (inv.name == "DWrite") {
      if (inv.args.size() != 1) return std::nullopt;
      Val next = state;
      next.at(0) = inv.args[0];
      for (size_t q = 0; q < static_cast<size_t>(n); ++q)
        next.at(1).at(q) = Val::boolean(true);
      return std::make_pair(next, Val::unit());
    }
    if (inv.name == "DRead" && inv.args.empty()) {
      Val rsp = Val::pair(state.at(0), state.at(1).at(static_cast<size_t>(inv.process - 1)));
      Val next = state;
      next.at(1).at(static_cast<size_t>(inv.process - 1)) = Val::boolean(false);
      return std::make_pair(next, rsp);
    }
    return std::nullopt;
  };
  spec.enumerate_invocations = [n, domain_max]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p) {
      out.push_back({"DRead", {}, p});
      for (int64_t v = 0; v <= domain_max; ++v) out.push_back({"DWrite", {Val::integer(v)}, p});
    }
    return out;
  };
  return spec;
}

TypeSpec maxreg_spec(int n, int64_t bound) {
  TypeSpec spec;
  spec.name = bound < 0 ? "maxreg:unbounded" : "maxreg:" + std::to_string(bound);
  spec.n = n;
  spec.initial = Val::integer(0);
  spec.delta = [bound, n](const Val& state,
                          const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    if (inv.process < 1 || inv.process > n) return std::nullopt;
    if (inv.name == "maxWrite") {
      if (inv.args.size() != 1) return std::nullopt;
      int64_t x = inv.args[0].as_int();
      if (x < 0 || (bound >= 0 && x > bound)) return std::nullopt;
      return std::make_pair(Val::integer(std::max(state.as_int(), x)), Val::unit());
    }
    if (inv.name == "maxRead" && inv.args.empty()) return std::make_pair(state, state);
    return std::nullopt;
  };
  int64_t enum_max = bound >= 0 ? bound : 7;
  spec.enumerate_invocations = [n, enum_max]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p) {
      out.push_back({"maxRead", {}, p});
      for (int64_t v = 0; v <= enum_max; ++v) out.push_back({"maxWrite", {Val::integer(v)}, p});
    }
    return out;
  };
  return spec;
}

TypeSpec counter_spec(int n) {
  TypeSpec spec;
  spec.name = "counter:" + std::to_string(n);
  spec.n = n;
  spec.initial = Val::integer(0);
  spec.delta = [n](const Val& state, const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    if (inv.process < 1 || inv.process > n) return std::nullopt;
    if (inv.name == "Inc" && inv.args.empty())
      return std::make_pair(Val::integer(state.as_int() + 1), Val::unit());
    if (inv.name == "Read" && inv.args.empty()) return std::make_pair(state, state);
    return std::nullopt;
  };
  spec.enumerate_invocations = [n]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p) {
      out.push_back({"Inc", {}, p});
      out.push_back({"Read", {}, p});
    }
    return out;
  };
  return spec;
}

TypeSpec spec_by_id(const std::string& id, int n) {
  if (id == "aba") return aba_spec(n);
  auto colon = id.find(':');
  std::string head = colon == std::string::npos ? id : id.substr(0, colon);
  std::string tail = colon == std::string::npos ? "" : id.substr(colon + 1);
  if (head == "snapshot") return snapshot_spec(tail.empty() ? n : std::stoi(tail));
  if (head == "counter") return counter_spec(tail.empty() ? n : std::stoi(tail));
  if (head == "maxreg") {
    if (tail == "unbounded") return maxreg_spec(n, -1);
    return maxreg_spec(n, tail.empty() ? 7 : std::stoll(tail));
  }
  throw std::invalid_argument("unknown spec id: " + id);
}

std::vector<Val> plausible_responses(const TypeSpec& spec, const Invocation& inv) {
  std::vector<Val> out;
  auto push = [&out](const Val& v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  if (inv.name == "update" || inv.name == "DWrite" || inv.name == "maxWrite" || inv.name == "Inc") {
    push(Val::unit());
    return out;
  }
  // Walk small reachable state space and collect responses.
  std::vector<Val> frontier = {spec.initial};
  std::vector<Val> seen = frontier;
  auto invs = spec.enumerate_invocations ? spec.enumerate_invocations() : std::vector<Invocation>{};
  size_t budget = 4000;
  while (!frontier.empty() && budget > 0) {
    Val s = frontier.back();
    frontier.pop_back();
    if (auto r = spec.delta(s, inv)) push(r->second);
    for (const Invocation& i : invs) {
      if (--budget == 0) break;
      auto r = spec.delta(s, i);
      if (!r) continue;
      if (std::find(seen.begin(), seen.end(), r->first) == seen.end()) {
        seen.push_back(r->first);
        frontier.push_back(r->first);
      }
    }
  }
  return out;
}

}  // namespace slkit
