#include "slkit/checkers.hpp"

#include <algorithm>
#include <cassert>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace slkit {

namespace {

bool is_writer_name(const std::string& name) {
  return name == "update" || name == "DWrite" || name == "Write" || name == "maxWrite" ||
         name == "Inc";
}

std::string mask_state_key(uint64_t mask, const Val& state) {
  std::string key;
  key.append(reinterpret_cast<const char*>(&mask), sizeof(mask));
  state.encode(key);
  return key;
}

}  // namespace

// ---- single-history linearizability ---------------------------------------

namespace {

struct LinSearch {
  const TypeSpec& spec;
  std::vector<OpRecord> ops;
  std::vector<uint64_t> must_precede;  // complete ops that happen before op i
  uint64_t complete_mask = 0;
  std::unordered_set<std::string> dead;
  int64_t states = 0;
  std::vector<size_t> chosen;

  explicit LinSearch(const TypeSpec& s) : spec(s) {}

  bool dfs(uint64_t mask, const Val& state) {
    if ((mask & complete_mask) == complete_mask) return true;
    std::string key = mask_state_key(mask, state);
    if (dead.count(key)) return false;
    ++states;
    for (size_t i = 0; i < ops.size(); ++i) {
      uint64_t bit = 1ull << i;
      if (mask & bit) continue;
      if (must_precede[i] & ~mask) continue;  // an earlier op is still unplaced
      auto r = spec.delta(state, ops[i].invocation);
      if (!r) continue;
      if (ops[i].complete() && r->second != ops[i].response) continue;
      chosen.push_back(i);
      if (dfs(mask | bit, r->first)) return true;
      chosen.pop_back();
    }
    dead.insert(std::move(key));
    return false;
  }
};

}  // namespace

LinearizationWitness check_linearizable(const History& h, const TypeSpec& spec, size_t op_limit) {
  LinearizationWitness w;
  LinSearch search(spec);
  search.ops = collect_ops(h, "");
  if (search.ops.size() > op_limit) {
    w.note = "operation limit exceeded (" + std::to_string(search.ops.size()) + ")";
    return w;
  }
  for (size_t i = 0; i < search.ops.size(); ++i)
    if (search.ops[i].complete()) search.complete_mask |= 1ull << i;
  search.must_precede.assign(search.ops.size(), 0);
  for (size_t i = 0; i < search.ops.size(); ++i)
    for (size_t j = 0; j < search.ops.size(); ++j)
      if (i != j && search.ops[j].complete() &&
          search.ops[j].rsp_time < search.ops[i].inv_time)
        search.must_precede[i] |= 1ull << j;
  bool ok = search.dfs(0, spec.initial);
  w.states_explored = search.states;
  if (!ok) {
    w.note = "exhausted " + std::to_string(search.states) + " partial orders";
    return w;
  }
  w.found = true;
  Val state = spec.initial;
  for (size_t i : search.chosen) {
    auto r = spec.delta(state, search.ops[i].invocation);
    w.order.ops.push_back({search.ops[i].invocation, r->second, search.ops[i].op_id});
    state = r->first;
  }
  return w;
}

// ---- clustered variant for long complete histories --------------------------

namespace {

// All automaton states reachable by linearizing the cluster from `entry`.
std::vector<Val> cluster_exit_states(const std::vector<OpRecord>& ops, const TypeSpec& spec,
                                     const Val& entry, int64_t* states_counter) {
  size_t k = ops.size();
  std::vector<uint64_t> must_precede(k, 0);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j)
      if (i != j && ops[j].rsp_time < ops[i].inv_time) must_precede[i] |= 1ull << j;
  uint64_t full = k == 64 ? ~0ull : (1ull << k) - 1;
  std::vector<Val> exits;
  std::unordered_set<std::string> seen;  // (mask,state) pairs already expanded
  std::unordered_set<std::string> exit_keys;
  struct Item {
    uint64_t mask;
    Val state;
  };
  std::vector<Item> stack = {{0, entry}};
  seen.insert(mask_state_key(0, entry));
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    ++*states_counter;
    if (it.mask == full) {
      std::string ek;
      it.state.encode(ek);
      if (exit_keys.insert(ek).second) exits.push_back(it.state);
      continue;
    }
    for (size_t i = 0; i < k; ++i) {
      uint64_t bit = 1ull << i;
      if (it.mask & bit) continue;
      if (must_precede[i] & ~it.mask) continue;
      auto r = spec.delta(it.state, ops[i].invocation);
      if (!r || r->second != ops[i].response) continue;
      std::string key = mask_state_key(it.mask | bit, r->first);
      if (seen.insert(std::move(key)).second) stack.push_back({it.mask | bit, r->first});
    }
  }
  return exits;
}

}  // namespace

LinearizationWitness check_linearizable_windowed(const History& h, const TypeSpec& spec,
                                                 size_t cluster_cap) {
  LinearizationWitness w;
  std::vector<OpRecord> ops = collect_ops(h, "");
  for (const OpRecord& op : ops)
    if (!op.complete()) {
      w.note = "windowed check requires a complete history";
      return w;
    }
  std::sort(ops.begin(), ops.end(),
            [](const OpRecord& a, const OpRecord& b) { return a.inv_time < b.inv_time; });
  // overlap clusters: cut where every earlier op has responded
  std::vector<std::vector<OpRecord>> clusters;
  int64_t max_rsp = -1;
  for (const OpRecord& op : ops) {
    if (clusters.empty() || op.inv_time > max_rsp) clusters.emplace_back();
    clusters.back().push_back(op);
    max_rsp = std::max(max_rsp, op.rsp_time);
  }
  for (const auto& cluster : clusters)
    if (cluster.size() > cluster_cap) {
      w.note = "cluster of " + std::to_string(cluster.size()) + " overlapping ops exceeds cap";
      return w;
    }
  std::vector<Val> entries = {spec.initial};
  for (size_t c = 0; c < clusters.size(); ++c) {
    std::vector<Val> next;
    std::unordered_set<std::string> keys;
    for (const Val& entry : entries) {
      for (Val& exit : cluster_exit_states(clusters[c], spec, entry, &w.states_explored)) {
        std::string k;
        exit.encode(k);
        if (keys.insert(std::move(k)).second) next.push_back(std::move(exit));
      }
    }
    if (next.empty()) {
      w.note = "no linearization through cluster " + std::to_string(c) + " (" +
               std::to_string(clusters[c].size()) + " ops)";
      return w;
    }
    entries = std::move(next);
  }
  w.found = true;
  w.note = std::to_string(clusters.size()) + " clusters";
  return w;
}

// ---- strong linearizability -------------------------------------------------

namespace {

struct ProcStatus {
  enum Kind : uint8_t { Idle = 0, Open = 1, LinPending = 2 };
  Kind kind = Idle;
  Invocation invocation;
  Val committed;
};

void encode_status(const ProcStatus& st, std::string& out) {
  out.push_back(static_cast<char>(st.kind));
  if (st.kind == ProcStatus::Idle) return;
  out += st.invocation.name;
  out.push_back(0);
  for (const Val& a : st.invocation.args) a.encode(out);
  out.push_back(1);
  if (st.kind == ProcStatus::LinPending) st.committed.encode(out);
}

struct SLSearch {
  const TreeSource& tree;
  const TypeSpec& spec;
  SLOptions opts;
  std::unordered_map<std::string, bool> memo;
  int64_t states = 0;
  int64_t edges = 0;
  bool truncated = false;
  bool overflow = false;
  std::vector<int> prefix;
  std::vector<int> deepest_fail;

  SLSearch(const TreeSource& t, const TypeSpec& s, const SLOptions& o)
      : tree(t), spec(s), opts(o) {}

  std::string key_of(const Machine& m, const Val& state, const std::vector<ProcStatus>& st) {
    Fingerprint fp = m.fingerprint();
    std::string key;
    key.append(reinterpret_cast<const char*>(&fp.a), sizeof(fp.a));
    key.append(reinterpret_cast<const char*>(&fp.b), sizeof(fp.b));
    state.encode(key);
    for (const ProcStatus& s : st) encode_status(s, key);
    return key;
  }

  // Sequences of pending ops to commit ahead of the responder: every
  // permutation of every subset of `others`.
  static void subsets_perms(const std::vector<int>& others,
                            std::vector<std::vector<int>>& out) {
    size_t k = others.size();
    for (uint32_t mask = 0; mask < (1u << k); ++mask) {
      std::vector<int> subset;
      for (size_t i = 0; i < k; ++i)
        if (mask & (1u << i)) subset.push_back(others[i]);
      std::sort(subset.begin(), subset.end());
      do {
        out.push_back(subset);
      } while (std::next_permutation(subset.begin(), subset.end()));
    }
  }

  bool search(const Machine& m, const Val& state, std::vector<ProcStatus>& st) {
    if (overflow) return false;
    std::string key;
    if (opts.use_memo) {
      key = key_of(m, state, st);
      auto it = memo.find(key);
      if (it != memo.end()) return it->second;
      if (static_cast<int64_t>(memo.size()) >= opts.max_states) {
        overflow = true;
        return false;
      }
    }
    ++states;
    std::vector<int> pids = tree.next_pids(prefix, m);
    if (!tree.is_scripted() && static_cast<int64_t>(prefix.size()) >= tree.budget.max_steps &&
        !pids.empty()) {
      truncated = true;
      pids.clear();
    }
    bool ok_all = true;
    for (int pid : pids) {
      ++edges;
      Machine child = m;
      std::vector<Event> events;
      child.step(pid, events);
      prefix.push_back(pid);
      bool ok_child = advance(child, state, st, events);
      prefix.pop_back();
      if (!ok_child) {
        if (prefix.size() + 1 > deepest_fail.size()) {
          deepest_fail = prefix;
          deepest_fail.push_back(pid);
        }
        ok_all = false;
        break;
      }
    }
    if (opts.use_memo) memo.emplace(std::move(key), ok_all);
    return ok_all;
  }

  // Applies one edge's events to the abstract state, branching over commit
  // choices at a response edge.
  bool advance(const Machine& child, Val state, std::vector<ProcStatus> st,
               const std::vector<Event>& events) {
    std::optional<std::pair<int, Val>> responder;  // process, actual response
    for (const Event& e : events) {
      if (e.obj != "O") continue;
      ProcStatus& s = st[static_cast<size_t>(e.process - 1)];
      if (e.kind == Event::Kind::Inv) {
        s.kind = ProcStatus::Open;
        s.invocation = e.invocation;
      } else {
        responder = {e.process, e.response};
      }
    }
    if (!responder) return search(child, state, st);

    auto [q, actual] = *responder;
    ProcStatus& sq = st[static_cast<size_t>(q - 1)];
    if (sq.kind == ProcStatus::LinPending) {
      if (sq.committed != actual) return false;
      sq.kind = ProcStatus::Idle;
      return search(child, state, st);
    }
    // q's op is open: commit a sequence of other pending ops, then q's.
    std::vector<int> others;
    for (int p = 1; p <= static_cast<int>(st.size()); ++p)
      if (p != q && st[static_cast<size_t>(p - 1)].kind == ProcStatus::Open) others.push_back(p);
    std::vector<std::vector<int>> sequences;
    subsets_perms(others, sequences);
    for (const std::vector<int>& seq : sequences) {
      Val s = state;
      std::vector<ProcStatus> st2 = st;
      bool feasible = true;
      for (int u : seq) {
        ProcStatus& su = st2[static_cast<size_t>(u - 1)];
        auto r = spec.delta(s, su.invocation);
        if (!r) {
          feasible = false;
          break;
        }
        su.kind = ProcStatus::LinPending;
        su.committed = r->second;
        s = r->first;
      }
      if (!feasible) continue;
      auto r = spec.delta(s, st2[static_cast<size_t>(q - 1)].invocation);
      if (!r || r->second != actual) continue;
      st2[static_cast<size_t>(q - 1)].kind = ProcStatus::Idle;
      if (search(child, r->first, st2)) return true;
    }
    return false;
  }

  // After a successful search, walk one maximal path re-using the memo to
  // recover a concrete linearization.
  SequentialHistory sample_path() {
    SequentialHistory out;
    Machine m = tree.root;
    Val state = spec.initial;
    std::vector<ProcStatus> st(static_cast<size_t>(m.n));
    std::vector<int> walk;
    while (true) {
      std::vector<int> pids = tree.next_pids(walk, m);
      if (pids.empty()) break;
      if (!tree.is_scripted() && static_cast<int64_t>(walk.size()) >= tree.budget.max_steps) break;
      int pid = pids.front();
      Machine child = m;
      std::vector<Event> events;
      child.step(pid, events);
      walk.push_back(pid);
      // replay advance() choosing the first memo-approved branch
      std::optional<std::pair<int, Val>> responder;
      for (const Event& e : events) {
        if (e.obj != "O") continue;
        ProcStatus& s = st[static_cast<size_t>(e.process - 1)];
        if (e.kind == Event::Kind::Inv) {
          s.kind = ProcStatus::Open;
          s.invocation = e.invocation;
        } else {
          responder = {e.process, e.response};
        }
      }
      if (responder) {
        auto [q, actual] = *responder;
        ProcStatus& sq = st[static_cast<size_t>(q - 1)];
        if (sq.kind == ProcStatus::LinPending) {
          if (sq.committed != actual) break;
          out.ops.push_back({sq.invocation, sq.committed, 0});
          sq.kind = ProcStatus::Idle;
        } else {
          std::vector<int> others;
          for (int p = 1; p <= static_cast<int>(st.size()); ++p)
            if (p != q && st[static_cast<size_t>(p - 1)].kind == ProcStatus::Open)
              others.push_back(p);
          std::vector<std::vector<int>> sequences;
          subsets_perms(others, sequences);
          bool advanced = false;
          for (const std::vector<int>& seq : sequences) {
            Val s = state;
            std::vector<ProcStatus> st2 = st;
            std::vector<SeqOp> appended;
            bool feasible = true;
            for (int u : seq) {
              ProcStatus& su = st2[static_cast<size_t>(u - 1)];
              auto r = spec.delta(s, su.invocation);
              if (!r) {
                feasible = false;
                break;
              }
              su.kind = ProcStatus::LinPending;
              su.committed = r->second;
              appended.push_back({su.invocation, r->second, 0});
              s = r->first;
            }
            if (!feasible) continue;
            auto r = spec.delta(s, st2[static_cast<size_t>(q - 1)].invocation);
            if (!r || r->second != actual) continue;
            appended.push_back({st2[static_cast<size_t>(q - 1)].invocation, actual, 0});
            st2[static_cast<size_t>(q - 1)].kind = ProcStatus::Idle;
            std::string key = key_of(child, r->first, st2);
            auto it = memo.find(key);
            if (it != memo.end() && it->second) {
              for (SeqOp& op : appended) out.ops.push_back(op);
              st = std::move(st2);
              state = r->first;
              advanced = true;
              break;
            }
          }
          if (!advanced) break;
        }
      }
      m = std::move(child);
    }
    return out;
  }
};

}  // namespace

SLVerdict check_strong_linearizable(const TreeSource& tree, const TypeSpec& spec,
                                    const SLOptions& opts) {
  SLVerdict v;
  SLSearch search(tree, spec, opts);
  std::vector<ProcStatus> st(static_cast<size_t>(tree.root.n));
  bool ok = search.search(tree.root, spec.initial, st);
  v.states = search.states;
  v.edges = search.edges;
  v.truncated = search.truncated;
  if (search.overflow) {
    v.result = SLVerdict::Result::Inconclusive;
    v.note = "state budget exceeded";
    return v;
  }
  if (ok) {
    v.result = SLVerdict::Result::Witness;
    if (opts.use_memo) v.sample = search.sample_path();
  } else {
    v.result = SLVerdict::Result::Counterexample;
    v.failing_prefix = search.deepest_fail;
  }
  return v;
}

// ---- pt rules ----------------------------------------------------------------

namespace {

// Times of line-labeled accesses, attributed to the enclosing top-level op.
struct OpAccessTimes {
  std::map<std::string, int64_t> last;  // line label -> last rsp time
};

std::map<int64_t, OpAccessTimes> access_times(const Transcript& t) {
  std::map<int64_t, OpAccessTimes> out;
  std::map<int, std::vector<int64_t>> open;  // process -> stack of top-level op ids
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (e.obj == "O") {
      if (e.kind == Event::Kind::Inv)
        open[e.process].push_back(e.op_id);
      else if (!open[e.process].empty())
        open[e.process].pop_back();
      continue;
    }
    if (e.kind != Event::Kind::Rsp || e.line.empty()) continue;
    auto it = open.find(e.process);
    if (it == open.end() || it->second.empty()) continue;
    out[it->second.front()].last[e.line] = Transcript::time_of_index(i);
  }
  return out;
}

// Response payloads of line-labeled accesses (last occurrence per op).
std::map<int64_t, std::map<std::string, Val>> access_values(const Transcript& t) {
  std::map<int64_t, std::map<std::string, Val>> out;
  std::map<int, std::vector<int64_t>> open;
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (e.obj == "O") {
      if (e.kind == Event::Kind::Inv)
        open[e.process].push_back(e.op_id);
      else if (!open[e.process].empty())
        open[e.process].pop_back();
      continue;
    }
    if (e.kind != Event::Kind::Rsp || e.line.empty()) continue;
    auto it = open.find(e.process);
    if (it == open.end() || it->second.empty()) continue;
    out[it->second.front()][e.line] = e.response;
  }
  return out;
}

// Invocation payloads of line-labeled accesses.
std::map<int64_t, std::map<std::string, Invocation>> access_invocations(const Transcript& t) {
  std::map<int64_t, std::map<std::string, Invocation>> out;
  std::map<int, std::vector<int64_t>> open;
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (e.obj == "O") {
      if (e.kind == Event::Kind::Inv)
        open[e.process].push_back(e.op_id);
      else if (!open[e.process].empty())
        open[e.process].pop_back();
      continue;
    }
    if (e.kind != Event::Kind::Inv || e.line.empty()) continue;
    auto it = open.find(e.process);
    if (it == open.end() || it->second.empty()) continue;
    out[it->second.front()][e.line] = e.invocation;
  }
  return out;
}

}  // namespace

PtAssignment slaba_pt(const Transcript& t) {
  PtAssignment out;
  auto times = access_times(t);
  for (const OpRecord& op : collect_ops(t, "O")) {
    int64_t pt = Transcript::kInfinity;
    auto it = times.find(op.op_id);
    if (it != times.end()) {
      const char* line = op.invocation.name == "DWrite" ? lines::xwrite : lines::xread2;
      auto lt = it->second.last.find(line);
      if (lt != it->second.last.end() && op.complete()) pt = lt->second;
    }
    out.pt[op.op_id] = pt;
  }
  return out;
}

PtAssignment slss_pt(const Transcript& t, bool with_seq) {
  PtAssignment out;
  auto times = access_times(t);
  auto values = access_values(t);
  auto invocations = access_invocations(t);
  std::vector<OpRecord> ops = collect_ops(t, "O");

  // scans first: pt at the final rread2 when complete
  struct ScanInfo {
    int64_t pt;
    Val vec;  // final second-DRead vector
  };
  std::vector<ScanInfo> scans;
  for (const OpRecord& op : ops) {
    if (op.invocation.name != "scan") continue;
    int64_t pt = Transcript::kInfinity;
    Val vec;
    if (op.complete()) {
      auto& m = times[op.op_id];
      auto lt = m.last.find(lines::rread2);
      if (lt != m.last.end()) {
        pt = lt->second;
        Val rsp = values[op.op_id][lines::rread2];
        vec = rsp.kind() == Val::Kind::Tup && rsp.size() == 2 && rsp.at(1).kind() == Val::Kind::Bool
                  ? rsp.at(0)
                  : rsp;
      }
    }
    out.pt[op.op_id] = pt;
    if (pt != Transcript::kInfinity) scans.push_back({pt, vec});
  }
  // updates: min of the earliest qualifying scan and the op's own R write
  for (const OpRecord& op : ops) {
    if (op.invocation.name != "update") continue;
    int64_t own = Transcript::kInfinity;
    auto& m = times[op.op_id];
    auto lt = m.last.find(lines::rwrite);
    if (lt != m.last.end()) own = lt->second;
    Val expected = op.invocation.args.empty() ? Val::nil() : op.invocation.args[0];
    bool have_entry = true;
    if (with_seq) {
      auto iv = invocations[op.op_id].find(lines::supdate);
      if (iv == invocations[op.op_id].end()) have_entry = false;
      else expected = iv->second.args[0];  // the (value, seq) pair actually stored
    }
    int64_t best = own;
    if (have_entry) {
      for (const ScanInfo& sc : scans) {
        if (sc.pt <= op.inv_time) continue;
        if (sc.vec.kind() != Val::Kind::Tup ||
            sc.vec.size() < static_cast<size_t>(op.invocation.process))
          continue;
        if (sc.vec.at(static_cast<size_t>(op.invocation.process - 1)) == expected)
          best = std::min(best, sc.pt);
      }
    }
    out.pt[op.op_id] = best;
  }
  return out;
}

bool validate_pt(const Transcript& t, const PtAssignment& pt, const TypeSpec& spec,
                 std::string* why) {
  auto fail = [why](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  std::vector<OpRecord> ops = collect_ops(t, "O");
  struct Entry {
    const OpRecord* op;
    int64_t pt;
  };
  std::vector<Entry> included;
  for (const OpRecord& op : ops) {
    auto it = pt.pt.find(op.op_id);
    int64_t p = it == pt.pt.end() ? Transcript::kInfinity : it->second;
    if (p == Transcript::kInfinity) {
      if (op.complete()) return fail("complete op " + std::to_string(op.op_id) + " has pt=inf");
      continue;
    }
    if (p < op.inv_time || p > op.rsp_time)
      return fail("pt outside interval for op " + std::to_string(op.op_id));
    included.push_back({&op, p});
  }
  std::stable_sort(included.begin(), included.end(), [](const Entry& a, const Entry& b) {
    if (a.pt != b.pt) return a.pt < b.pt;
    bool aw = is_writer_name(a.op->invocation.name);
    bool bw = is_writer_name(b.op->invocation.name);
    if (aw != bw) return aw;  // writers before readers
    return a.op->process < b.op->process;
  });
  Val state = spec.initial;
  for (const Entry& e : included) {
    auto r = spec.delta(state, e.op->invocation);
    if (!r) return fail("invocation rejected in replay");
    if (e.op->complete() && r->second != e.op->response)
      return fail("response mismatch at op " + std::to_string(e.op->op_id) + ": expected " +
                  e.op->response.str() + " got " + r->second.str());
    if (!e.op->complete() && !is_writer_name(e.op->invocation.name))
      return fail("pending reader linearized");
    state = r->first;
  }
  return true;
}

Val interpreted_value(const Transcript& t, const PtAssignment& pt_s, int process, int64_t at) {
  struct Upd {
    int64_t pt;
    Val value;
  };
  std::vector<Upd> updates;
  for (const OpRecord& op : collect_ops(t, "S")) {
    if (op.invocation.name != "update" || op.process != process) continue;
    auto it = pt_s.pt.find(op.op_id);
    if (it == pt_s.pt.end() || it->second == Transcript::kInfinity) continue;
    updates.push_back({it->second, op.invocation.args[0]});
  }
  std::sort(updates.begin(), updates.end(), [](const Upd& a, const Upd& b) { return a.pt < b.pt; });
  const Upd* last_before = nullptr;
  for (const Upd& u : updates)
    if (u.pt < at) last_before = &u;
  if (!last_before) return Val::nil();
  for (const Upd& u : updates)
    if (u.pt > last_before->pt && u.pt <= at && !(u.value == last_before->value)) return Val::nil();
  return last_before->value;
}

// ---- lock-freedom --------------------------------------------------------------

LockFreeVerdict check_lockfree(const Machine& m, const Budget& b) {
  LockFreeVerdict v;
  struct State {
    Machine machine;
    bool pending = false;
  };
  std::unordered_map<Fingerprint, int, FingerprintHash> id;
  std::vector<State> states;
  std::vector<std::vector<std::pair<int, bool>>> edges;  // (target, completes an op)
  auto intern = [&](Machine mm) -> int {
    Fingerprint fp = mm.fingerprint();
    auto it = id.find(fp);
    if (it != id.end()) return it->second;
    int idx = static_cast<int>(states.size());
    id.emplace(fp, idx);
    bool pending = false;
    for (const ProcState& ps : mm.procs)
      if (!ps.frames.empty()) pending = true;
    states.push_back({std::move(mm), pending});
    edges.emplace_back();
    return idx;
  };
  std::vector<int> work = {intern(m)};
  std::vector<bool> expanded;
  while (!work.empty()) {
    int s = work.back();
    work.pop_back();
    if (static_cast<size_t>(s) < expanded.size() && expanded[static_cast<size_t>(s)]) continue;
    if (expanded.size() <= static_cast<size_t>(s)) expanded.resize(static_cast<size_t>(s) + 1);
    expanded[static_cast<size_t>(s)] = true;
    if (static_cast<int64_t>(states.size()) > b.max_nodes) {
      v.result = LockFreeVerdict::Result::Inconclusive;
      v.states = static_cast<int64_t>(states.size());
      v.note = "state budget exceeded";
      return v;
    }
    Machine base = states[static_cast<size_t>(s)].machine;
    for (int p = 1; p <= base.n; ++p) {
      if (!base.enabled(p)) continue;
      Machine next = base;
      std::vector<Event> events;
      next.step(p, events);
      bool completes = false;
      for (const Event& e : events)
        if (e.kind == Event::Kind::Rsp && e.obj == "O") completes = true;
      int target = intern(std::move(next));
      edges[static_cast<size_t>(s)].emplace_back(target, completes);
      if (static_cast<size_t>(target) >= expanded.size() ||
          !expanded[static_cast<size_t>(target)])
        work.push_back(target);
    }
  }
  v.states = static_cast<int64_t>(states.size());
  // cycle search over non-completing edges
  size_t k = states.size();
  std::vector<int> color(k, 0);  // 0 white, 1 on stack, 2 done
  std::vector<std::pair<int, size_t>> stack;
  for (size_t root = 0; root < k; ++root) {
    if (color[root] != 0) continue;
    stack.push_back({static_cast<int>(root), 0});
    color[root] = 1;
    while (!stack.empty()) {
      auto& [node, next_edge] = stack.back();
      if (next_edge < edges[static_cast<size_t>(node)].size()) {
        auto [target, completes] = edges[static_cast<size_t>(node)][next_edge++];
        if (completes) continue;
        if (color[static_cast<size_t>(target)] == 1) {
          // found a non-completing cycle; pending ops make it a violation
          bool pending = states[static_cast<size_t>(target)].pending;
          for (const auto& frame : stack)
            if (states[static_cast<size_t>(frame.first)].pending) pending = true;
          if (pending) {
            v.result = LockFreeVerdict::Result::Fail;
            v.note = "non-completing cycle reached";
            return v;
          }
        } else if (color[static_cast<size_t>(target)] == 0) {
          color[static_cast<size_t>(target)] = 1;
          stack.push_back({target, 0});
        }
      } else {
        color[static_cast<size_t>(node)] = 2;
        stack.pop_back();
      }
    }
  }
  v.result = LockFreeVerdict::Result::Pass;
  return v;
}

}  // namespace slkit
