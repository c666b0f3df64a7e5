#include "slkit/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace slkit {

Transcript TranscriptTree::transcript_of(int node) const {
  std::vector<int> chain;
  for (int v = node; v >= 0; v = nodes[static_cast<size_t>(v)].parent) chain.push_back(v);
  std::reverse(chain.begin(), chain.end());
  Transcript t;
  t.n = root_machine.n;
  for (int v : chain) {
    const TreeNode& nd = nodes[static_cast<size_t>(v)];
    for (size_t i = nd.events_begin; i < nd.events_end; ++i) t.events.push_back(event_pool[i]);
  }
  return t;
}

std::vector<int> TranscriptTree::schedule_of(int node) const {
  std::vector<int> sched;
  for (int v = node; v > 0; v = nodes[static_cast<size_t>(v)].parent)
    sched.push_back(nodes[static_cast<size_t>(v)].via_pid);
  std::reverse(sched.begin(), sched.end());
  return sched;
}

namespace {

// Depth-first expansion; machines are value-copied at branch points.
void expand(TranscriptTree& tree, std::unordered_map<Fingerprint, int, FingerprintHash>& seen,
            const Machine& m, int node_idx) {
  if (static_cast<int64_t>(tree.nodes.size()) > tree.budget.max_nodes) {
    tree.budget_exhausted = true;
    return;
  }
  TreeNode& self = tree.nodes[static_cast<size_t>(node_idx)];
  if (self.depth >= tree.budget.max_steps) {
    self.budget_cut = true;
    return;
  }
  bool any_child = false;
  for (int p = 1; p <= m.n; ++p) {
    if (!m.enabled(p)) continue;
    any_child = true;
    Machine next = m;
    size_t begin = tree.event_pool.size();
    next.step(p, tree.event_pool);
    TreeNode child;
    child.parent = node_idx;
    child.via_pid = p;
    child.depth = tree.nodes[static_cast<size_t>(node_idx)].depth + 1;
    child.events_begin = begin;
    child.events_end = tree.event_pool.size();
    child.fp = next.fingerprint();
    child.complete = next.done();
    int child_idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(child);
    tree.nodes[static_cast<size_t>(node_idx)].children.emplace_back(p, child_idx);
    bool expand_child = true;
    if (tree.budget.dedup) {
      auto [it, fresh] = seen.emplace(child.fp, child_idx);
      if (!fresh) {
        tree.nodes[static_cast<size_t>(child_idx)].dup_of = it->second;
        expand_child = false;
      }
    }
    if (expand_child) expand(tree, seen, next, child_idx);
    if (tree.nodes[static_cast<size_t>(child_idx)].children.empty() &&
        tree.nodes[static_cast<size_t>(child_idx)].dup_of < 0)
      tree.maximal_leaves++;
    if (tree.budget_exhausted) return;
  }
  if (!any_child) tree.nodes[static_cast<size_t>(node_idx)].complete = true;
}

}  // namespace

TranscriptTree enumerate(const Machine& m, const Budget& b) {
  TranscriptTree tree;
  tree.root_machine = m;
  tree.budget = b;
  TreeNode root;
  root.fp = m.fingerprint();
  root.complete = m.done();
  tree.nodes.push_back(root);

  if (b.jobs > 1 && m.n > 1) {
    // Fan the first-level branches out across workers; each worker owns a
    // private machine copy and a private subtree, merged in pid order.
    std::vector<int> pids;
    for (int p = 1; p <= m.n; ++p)
      if (m.enabled(p)) pids.push_back(p);
    std::vector<TranscriptTree> parts(pids.size());
    std::vector<std::vector<Event>> deltas(pids.size());
#ifdef _OPENMP
#pragma omp parallel for num_threads(b.jobs) schedule(dynamic)
#endif
    for (size_t i = 0; i < pids.size(); ++i) {
      Machine next = m;
      next.step(pids[i], deltas[i]);
      Budget sub = b;
      sub.jobs = 1;
      sub.max_steps = b.max_steps - 1;
      parts[i] = enumerate(next, sub);
    }
    for (size_t i = 0; i < pids.size(); ++i) {
      const TranscriptTree& part = parts[i];
      int offset = static_cast<int>(tree.nodes.size());
      size_t pool_offset = tree.event_pool.size();
      // splice the part root as a child of the global root
      TreeNode child = part.nodes[0];
      child.parent = 0;
      child.via_pid = pids[i];
      child.depth = 1;
      child.events_begin = pool_offset;
      child.events_end = pool_offset + deltas[i].size();
      for (const Event& e : deltas[i]) tree.event_pool.push_back(e);
      pool_offset = tree.event_pool.size();
      for (auto& [cp, cn] : child.children) cn += offset - 1;
      tree.nodes.push_back(child);
      tree.nodes[0].children.emplace_back(pids[i], offset);
      for (size_t k = 1; k < part.nodes.size(); ++k) {
        TreeNode nd = part.nodes[k];
        nd.parent = nd.parent == 0 ? offset : nd.parent + offset - 1;
        nd.depth += 1;
        nd.events_begin += pool_offset;
        nd.events_end += pool_offset;
        if (nd.dup_of > 0) nd.dup_of += offset - 1;
        else if (nd.dup_of == 0) nd.dup_of = offset;
        for (auto& [cp, cn] : nd.children) cn += offset - 1;
        tree.nodes.push_back(nd);
      }
      for (const Event& e : part.event_pool) tree.event_pool.push_back(e);
      tree.maximal_leaves += part.maximal_leaves;
      tree.budget_exhausted = tree.budget_exhausted || part.budget_exhausted;
    }
    return tree;
  }

  std::unordered_map<Fingerprint, int, FingerprintHash> seen;
  if (b.dedup) seen.emplace(root.fp, 0);
  expand(tree, seen, m, 0);
  return tree;
}

TranscriptTree enumerate_scripted(const Machine& m,
                                  const std::vector<std::vector<int>>& schedules) {
  TranscriptTree tree;
  tree.root_machine = m;
  tree.budget.dedup = false;
  TreeNode root;
  root.fp = m.fingerprint();
  tree.nodes.push_back(root);
  for (const std::vector<int>& sched : schedules) {
    int at = 0;
    Machine cur = m;
    for (size_t i = 0; i < sched.size(); ++i) {
      int pid = sched[i];
      int next_node = -1;
      for (auto [cp, cn] : tree.nodes[static_cast<size_t>(at)].children)
        if (cp == pid) next_node = cn;
      if (next_node >= 0) {
        // replay the existing edge
        Machine tmp = cur;
        std::vector<Event> sink;
        tmp.step(pid, sink);
        cur = std::move(tmp);
        at = next_node;
        continue;
      }
      size_t begin = tree.event_pool.size();
      if (!cur.step(pid, tree.event_pool))
        throw std::invalid_argument("scripted schedule references idle process");
      TreeNode child;
      child.parent = at;
      child.via_pid = pid;
      child.depth = tree.nodes[static_cast<size_t>(at)].depth + 1;
      child.events_begin = begin;
      child.events_end = tree.event_pool.size();
      child.fp = cur.fingerprint();
      child.complete = cur.done();
      int idx = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(child);
      tree.nodes[static_cast<size_t>(at)].children.emplace_back(pid, idx);
      at = idx;
    }
  }
  for (const TreeNode& nd : tree.nodes)
    if (nd.children.empty()) tree.maximal_leaves++;
  return tree;
}

std::vector<int> TreeSource::next_pids(const std::vector<int>& prefix, const Machine& at) const {
  std::vector<int> out;
  if (!is_scripted()) {
    if (static_cast<int64_t>(prefix.size()) >= budget.max_steps) return out;
    for (int p = 1; p <= at.n; ++p)
      if (at.enabled(p)) out.push_back(p);
    return out;
  }
  for (const std::vector<int>& sched : scripted) {
    if (sched.size() <= prefix.size()) continue;
    if (!std::equal(prefix.begin(), prefix.end(), sched.begin())) continue;
    int pid = sched[prefix.size()];
    if (std::find(out.begin(), out.end(), pid) == out.end()) out.push_back(pid);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunResult run_random(const Machine& m, uint64_t seed, const Budget& b) {
  RunResult rr;
  rr.machine = m;
  rr.transcript.n = m.n;
  std::mt19937_64 rng(seed);
  rr.machine.rng_seed = seed;
  for (int64_t step = 0; step < b.max_steps; ++step) {
    std::vector<int> enabled;
    for (int p = 1; p <= rr.machine.n; ++p)
      if (rr.machine.enabled(p)) enabled.push_back(p);
    if (enabled.empty()) break;
    int pid = enabled[rng() % enabled.size()];
    rr.machine.step(pid, rr.transcript.events);
  }
  return rr;
}

std::string counter_outcome(const Transcript& t) {
  std::string read = "?", flip = "?";
  for (const OpRecord& op : collect_ops(t, "O"))
    if (op.invocation.name == "Read" && op.complete()) read = op.response.str();
  for (const OpRecord& op : collect_ops(t, "coin"))
    if (op.complete()) flip = op.response.str();
  return "read=" + read + " flip=" + flip;
}

namespace {

bool has_any_step_by(const Transcript& t, int pid) {
  for (const Event& e : t.events)
    if (e.process == pid) return true;
  return false;
}

std::optional<int64_t> flip_result(const Transcript& t) {
  for (const OpRecord& op : collect_ops(t, "coin"))
    if (op.complete()) return op.response.as_int();
  return std::nullopt;
}

int first_enabled(const Machine& m) {
  for (int p = 1; p <= m.n; ++p)
    if (m.enabled(p)) return p;
  return 0;
}

// The schedule from the counter experiment: let the reader take one step,
// run the incrementing process through its coin flip, then decide whether
// the second incrementer runs before the reader finishes.
int counter_adversary_choose(const Machine& m, const Transcript& t, bool observe_flip) {
  if (!has_any_step_by(t, 3) && m.enabled(3)) return 3;
  auto c = flip_result(t);
  if (!c && m.enabled(1)) return 1;
  int64_t coin = observe_flip ? c.value_or(1) : 1;
  if (coin == 1 && m.enabled(2) && m.enabled(3)) return 2;
  if (m.enabled(3)) return 3;
  return first_enabled(m);
}

}  // namespace

AdversaryPolicy policy_by_name(const std::string& name) {
  AdversaryPolicy pol;
  pol.name = name;
  if (name == "uniform") {
    pol.choose = [](const Machine& m, const Transcript&, std::mt19937_64& rng) {
      std::vector<int> enabled;
      for (int p = 1; p <= m.n; ++p)
        if (m.enabled(p)) enabled.push_back(p);
      if (enabled.empty()) return 0;
      return enabled[rng() % enabled.size()];
    };
    return pol;
  }
  if (name == "counter-adversary") {
    pol.choose = [](const Machine& m, const Transcript& t, std::mt19937_64&) {
      return counter_adversary_choose(m, t, true);
    };
    return pol;
  }
  if (name == "counter-blind") {
    pol.choose = [](const Machine& m, const Transcript& t, std::mt19937_64&) {
      return counter_adversary_choose(m, t, false);
    };
    return pol;
  }
  throw std::invalid_argument("unknown adversary policy: " + name);
}

AdversaryStats run_adversary(const Machine& proto, const AdversaryPolicy& policy, int trials,
                             uint64_t seed,
                             const std::function<std::string(const Transcript&)>& outcome) {
  AdversaryStats stats;
  for (int trial = 0; trial < trials; ++trial) {
    Machine m = proto;
    m.rng_seed = seed + static_cast<uint64_t>(trial) * 0x9e3779b97f4a7c15ull;
    std::mt19937_64 rng(m.rng_seed ^ 0x5bf03635u);
    Transcript t;
    t.n = m.n;
    int64_t guard = 0;
    while (!m.done()) {
      int pid;
      if (!policy.scripted_schedule.empty()) {
        size_t idx = static_cast<size_t>(guard);
        if (idx >= policy.scripted_schedule.size()) break;
        pid = policy.scripted_schedule[idx];
      } else {
        pid = policy.choose(m, t, rng);
      }
      if (pid < 1 || pid > m.n || !m.enabled(pid)) {
        stats.faults++;
        break;
      }
      m.step(pid, t.events);
      if (++guard > 100000) break;
    }
    stats.trials++;
    stats.outcomes[outcome(t)]++;
  }
  return stats;
}

}  // namespace slkit
