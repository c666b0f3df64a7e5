#include "slkit/genconstruct.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace slkit {

bool dominates(const SimpleTypeSpec& spec, const Invocation& a, const Invocation& b) {
  Relation r = spec.relation(a, b);
  if (r == Relation::FirstOverwrites) return true;
  if (r == Relation::MutualOverwrite) return a.process > b.process;
  return false;
}

// ---- bundled simple types -------------------------------------------------

std::shared_ptr<const SimpleTypeSpec> simple_counter(int n) {
  auto s = std::make_shared<SimpleTypeSpec>();
  s->id = "counter";
  s->base = counter_spec(n);
  s->relation = [](const Invocation& a, const Invocation& b) {
    bool aw = a.name == "Inc", bw = b.name == "Inc";
    if (aw && bw) return Relation::Commute;
    if (!aw && !bw) return Relation::Commute;  // reads commute
    return aw ? Relation::FirstOverwrites : Relation::SecondOverwrites;
  };
  return s;
}

std::shared_ptr<const SimpleTypeSpec> simple_maxreg(int n, int64_t bound) {
  auto s = std::make_shared<SimpleTypeSpec>();
  s->id = "maxreg:" + std::to_string(bound);
  s->base = maxreg_spec(n, bound);
  s->relation = [](const Invocation& a, const Invocation& b) {
    bool aw = a.name == "maxWrite", bw = b.name == "maxWrite";
    if (aw && bw) {
      int64_t x = a.args[0].as_int(), y = b.args[0].as_int();
      if (x == y) return Relation::MutualOverwrite;
      return x > y ? Relation::FirstOverwrites : Relation::SecondOverwrites;
    }
    if (!aw && !bw) return Relation::Commute;
    return aw ? Relation::FirstOverwrites : Relation::SecondOverwrites;
  };
  return s;
}

std::shared_ptr<const SimpleTypeSpec> simple_wregister(int n, int64_t domain_max) {
  auto s = std::make_shared<SimpleTypeSpec>();
  s->id = "wregister";
  TypeSpec spec;
  spec.name = "wregister";
  spec.n = n;
  spec.initial = Val::nil();
  spec.delta = [n](const Val& state, const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    if (inv.process < 1 || inv.process > n) return std::nullopt;
    if (inv.name == "Write" && inv.args.size() == 1)
      return std::make_pair(inv.args[0], Val::unit());
    if (inv.name == "Read" && inv.args.empty()) return std::make_pair(state, state);
    return std::nullopt;
  };
  spec.enumerate_invocations = [n, domain_max]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p) {
      out.push_back({"Read", {}, p});
      for (int64_t v = 0; v <= domain_max; ++v) out.push_back({"Write", {Val::integer(v)}, p});
    }
    return out;
  };
  s->base = std::move(spec);
  s->relation = [](const Invocation& a, const Invocation& b) {
    bool aw = a.name == "Write", bw = b.name == "Write";
    if (aw && bw) return Relation::MutualOverwrite;
    if (!aw && !bw) return Relation::Commute;
    return aw ? Relation::FirstOverwrites : Relation::SecondOverwrites;
  };
  return s;
}

std::shared_ptr<const SimpleTypeSpec> simple_type_by_id(const std::string& id, int n) {
  if (id == "counter") return simple_counter(n);
  if (id == "wregister") return simple_wregister(n);
  if (id.rfind("maxreg:", 0) == 0) return simple_maxreg(n, std::stoll(id.substr(7)));
  if (id.rfind("file:", 0) == 0) return simple_type_from_file(id.substr(5), n);
  throw std::invalid_argument("unknown simple type: " + id);
}

namespace {

Val val_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Val::nil();
  if (j.is_boolean()) return Val::boolean(j.get<bool>());
  if (j.is_number_integer()) return Val::integer(j.get<int64_t>());
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "nil") return Val::nil();
    if (s == "ok") return Val::unit();
    return Val::integer(std::stoll(s));
  }
  if (j.is_array()) {
    std::vector<Val> kids;
    for (const auto& k : j) kids.push_back(val_from_json(k));
    return Val::tup(kids);
  }
  throw std::invalid_argument("bad value in type file");
}

std::string invocation_key(const Invocation& inv) {
  std::string k = inv.name;
  for (const Val& a : inv.args) k += "," + a.str();
  return k;
}

}  // namespace

std::shared_ptr<const SimpleTypeSpec> simple_type_from_file(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open type file " + path);
  nlohmann::json j;
  in >> j;

  auto s = std::make_shared<SimpleTypeSpec>();
  s->id = j.at("name").get<std::string>();
  TypeSpec spec;
  spec.name = s->id;
  spec.n = n;
  spec.initial = val_from_json(j.at("initial"));

  // invocations: [{name, args: [...]}, ...]; delta: {state-str: {inv-key: [state, resp]}}
  auto invs = std::make_shared<std::vector<Invocation>>();
  for (const auto& ji : j.at("invocations")) {
    Invocation inv;
    inv.name = ji.at("name").get<std::string>();
    if (ji.contains("args"))
      for (const auto& a : ji.at("args")) inv.args.push_back(val_from_json(a));
    invs->push_back(inv);
  }
  auto table = std::make_shared<std::map<std::string, std::map<std::string, std::pair<Val, Val>>>>();
  for (const auto& [state_key, by_inv] : j.at("delta").items()) {
    for (const auto& [inv_key, pr] : by_inv.items()) {
      (*table)[state_key][inv_key] = {val_from_json(pr.at(0)), val_from_json(pr.at(1))};
    }
  }
  spec.delta = [table](const Val& state,
                       const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
    auto st = table->find(state.str());
    if (st == table->end()) return std::nullopt;
    auto it = st->second.find(invocation_key(inv));
    if (it == st->second.end()) return std::nullopt;
    return it->second;
  };
  spec.enumerate_invocations = [invs, n]() {
    std::vector<Invocation> out;
    for (int p = 1; p <= n; ++p)
      for (Invocation inv : *invs) {
        inv.process = p;
        out.push_back(inv);
      }
    return out;
  };
  s->base = std::move(spec);

  // relations: {"invKeyA|invKeyB": "commute"|"first-overwrites"|"second-overwrites"|"mutual"}
  auto rel = std::make_shared<std::map<std::string, Relation>>();
  for (const auto& [key, name] : j.at("relations").items()) {
    std::string v = name.get<std::string>();
    Relation r = v == "commute"            ? Relation::Commute
                 : v == "first-overwrites" ? Relation::FirstOverwrites
                 : v == "second-overwrites" ? Relation::SecondOverwrites
                                            : Relation::MutualOverwrite;
    (*rel)[key] = r;
  }
  s->relation = [rel](const Invocation& a, const Invocation& b) {
    auto it = rel->find(invocation_key(a) + "|" + invocation_key(b));
    if (it != rel->end()) return it->second;
    auto rit = rel->find(invocation_key(b) + "|" + invocation_key(a));
    if (rit != rel->end()) {
      if (rit->second == Relation::FirstOverwrites) return Relation::SecondOverwrites;
      if (rit->second == Relation::SecondOverwrites) return Relation::FirstOverwrites;
      return rit->second;
    }
    throw std::invalid_argument("relation missing for pair");
  };
  return s;
}

// ---- graph extraction -------------------------------------------------------

NodeGraph nodegraph(const std::vector<GenNode>& arena, const std::vector<int>& view) {
  NodeGraph g;
  std::set<int> in_v;
  std::queue<int> queue;
  for (int v : view) {
    if (v < 0) continue;
    if (v >= static_cast<int>(arena.size())) throw std::runtime_error("dangling node reference");
    if (in_v.insert(v).second) {
      queue.push(v);
      g.nodes.push_back(v);
    }
  }
  while (!queue.empty()) {
    int nd = queue.front();
    queue.pop();
    for (int prev : arena[static_cast<size_t>(nd)].preceding) {
      if (prev < 0) continue;
      if (prev >= static_cast<int>(arena.size()))
        throw std::runtime_error("dangling node reference");
      g.edges.emplace_back(prev, nd);
      if (in_v.insert(prev).second) {
        queue.push(prev);
        g.nodes.push_back(prev);
      }
    }
  }
  return g;
}

bool PrecGraph::has_edge(int i, int j) const {
  for (int k : succ[static_cast<size_t>(i)])
    if (k == j) return true;
  return false;
}

bool PrecGraph::reaches(int i, int j) const {
  std::vector<int> stack = {i};
  std::vector<bool> seen(ops.size(), false);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : succ[static_cast<size_t>(v)]) {
      if (w == j) return true;
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        stack.push_back(w);
      }
    }
  }
  return false;
}

PrecGraph precgraph(const std::vector<GenNode>& arena, const std::vector<int>& view, int n) {
  NodeGraph ng = nodegraph(arena, view);
  PrecGraph g;
  std::map<int, int> op_of_node;
  for (int nd : ng.nodes) {
    const GenNode& node = arena[static_cast<size_t>(nd)];
    ExtractedOp op;
    op.node = nd;
    op.opid = static_cast<int64_t>(node.ordinal) * n + (node.owner - 1);
    op.invocation = node.invocation;
    op.response = node.response;
    op.process = node.owner;
    op_of_node[nd] = static_cast<int>(g.ops.size());
    g.ops.push_back(std::move(op));
  }
  g.succ.assign(g.ops.size(), {});
  std::set<std::pair<int, int>> dedup;
  for (auto [from, to] : ng.edges) {
    auto e = std::make_pair(op_of_node.at(from), op_of_node.at(to));
    if (dedup.insert(e).second) g.succ[static_cast<size_t>(e.first)].push_back(e.second);
  }
  return g;
}

std::vector<int> topo_order(const PrecGraph& g) {
  size_t k = g.ops.size();
  std::vector<int> indeg(k, 0);
  for (const auto& adj : g.succ)
    for (int w : adj) indeg[static_cast<size_t>(w)]++;
  // lowest opid among ready vertices, deterministically
  auto cmp = [&g](int a, int b) { return g.ops[static_cast<size_t>(a)].opid > g.ops[static_cast<size_t>(b)].opid; };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (size_t i = 0; i < k; ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int w : g.succ[static_cast<size_t>(v)])
      if (--indeg[static_cast<size_t>(w)] == 0) ready.push(w);
  }
  if (order.size() != k) throw std::runtime_error("precedence graph has a cycle");
  return order;
}

SequentialHistory history_of(const PrecGraph& g, const std::vector<int>& order) {
  SequentialHistory h;
  for (int i : order) {
    const ExtractedOp& op = g.ops[static_cast<size_t>(i)];
    h.ops.push_back({op.invocation, op.response, op.opid});
  }
  return h;
}

PrecGraph lingraph(const PrecGraph& g, const SimpleTypeSpec& spec) {
  PrecGraph l = g;
  std::vector<int> order = topo_order(g);
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    for (size_t j = i + 1; j < order.size(); ++j) {
      int a = order[i], b = order[j];
      const Invocation& ia = l.ops[static_cast<size_t>(a)].invocation;
      const Invocation& ib = l.ops[static_cast<size_t>(b)].invocation;
      if (dominates(spec, ia, ib) && !l.has_edge(b, a) && !l.reaches(a, b))
        l.succ[static_cast<size_t>(b)].push_back(a);
      if (dominates(spec, ib, ia) && !l.has_edge(a, b) && !l.reaches(b, a))
        l.succ[static_cast<size_t>(a)].push_back(b);
    }
  }
  return l;
}

Val gen_response(const SimpleTypeSpec& spec, const std::vector<GenNode>& arena,
                 const std::vector<int>& view, const Invocation& invoke) {
  int n = static_cast<int>(view.size());
  PrecGraph g = precgraph(arena, view, n);
  PrecGraph l = lingraph(g, spec);
  SequentialHistory h = history_of(l, topo_order(l));
  Val state = spec.base.initial;
  for (const SeqOp& op : h.ops) {
    auto r = spec.base.delta(state, op.invocation);
    if (!r) throw std::runtime_error("invalid history during response computation");
    state = r->first;
  }
  auto r = spec.base.delta(state, invoke);
  if (!r) throw std::invalid_argument("invocation not accepted by simple type");
  return r->second;
}

// ---- pt analysis ------------------------------------------------------------

std::vector<GenOpInfo> gen_pt(const Machine& final_machine, const Transcript& t) {
  const SimpleTypeSpec& spec = *final_machine.gen_spec;
  std::vector<GenOpInfo> infos;
  std::map<int64_t, size_t> by_id;
  // Collect top-level operations and their root-access times.
  for (const OpRecord& op : collect_ops(t, "O")) {
    GenOpInfo gi;
    gi.op_id = op.op_id;
    gi.process = op.process;
    gi.invocation = op.invocation;
    gi.complete = op.complete();
    if (op.complete()) gi.response = op.response;
    by_id[op.op_id] = infos.size();
    infos.push_back(gi);
  }
  // scan/update access times: accesses appear between the op's inv and rsp.
  std::map<int, std::vector<size_t>> open_by_proc;  // process -> info index stack
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (e.obj == "O" && e.kind == Event::Kind::Inv) {
      open_by_proc[e.process].push_back(by_id.at(e.op_id));
    } else if (e.obj == "O" && e.kind == Event::Kind::Rsp) {
      open_by_proc[e.process].pop_back();
    } else if (e.obj == "root" && e.kind == Event::Kind::Rsp) {
      if (open_by_proc[e.process].empty()) continue;
      GenOpInfo& gi = infos[open_by_proc[e.process].back()];
      if (e.line == lines::gscan) gi.scan_time = Transcript::time_of_index(i);
      if (e.line == lines::gupdate) gi.update_time = Transcript::time_of_index(i);
    }
  }
  // Pending operations that already scanned have a determined response: the
  // node the machine constructed for them (the k-th node by a process serves
  // its k-th operation).
  for (GenOpInfo& gi : infos) {
    if (gi.complete || gi.scan_time == Transcript::kInfinity) continue;
    int ordinal = 0;
    for (const GenOpInfo& other : infos)
      if (other.process == gi.process && other.op_id <= gi.op_id &&
          other.scan_time != Transcript::kInfinity)
        ++ordinal;
    bool found = false;
    for (const GenNode& node : final_machine.nodes) {
      if (node.owner == gi.process && node.ordinal == ordinal) {
        gi.response = node.response;
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("missing node for pending operation");
  }
  // Dominance-respecting order: dominators first (Kahn, op_id tie-break).
  size_t k = infos.size();
  std::vector<std::vector<size_t>> dom_succ(k);
  std::vector<int> indeg(k, 0);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      if (dominates(spec, infos[i].invocation, infos[j].invocation)) {
        dom_succ[i].push_back(j);
        indeg[j]++;
      }
    }
  auto cmp = [&infos](size_t a, size_t b) { return infos[a].op_id > infos[b].op_id; };
  std::priority_queue<size_t, std::vector<size_t>, decltype(cmp)> ready(cmp);
  for (size_t i = 0; i < k; ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<size_t> order;
  while (!ready.empty()) {
    size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (size_t w : dom_succ[v])
      if (--indeg[w] == 0) ready.push(w);
  }
  if (order.size() != k) throw std::runtime_error("dominance relation has a cycle");
  // Inductive pt assignment.
  for (size_t oi = 0; oi < order.size(); ++oi) {
    GenOpInfo& gi = infos[order[oi]];
    int64_t best = gi.update_time;
    for (size_t hj = 0; hj < oi; ++hj) {
      const GenOpInfo& gh = infos[order[hj]];
      if (!dominates(spec, gh.invocation, gi.invocation)) continue;
      if (gh.pt == Transcript::kInfinity) continue;
      if (gi.scan_time < gh.pt && gh.pt < best) best = gh.pt;
    }
    gi.pt = best;
  }
  return infos;
}

SequentialHistory gen_order(const Machine& final_machine, const Transcript& t,
                            std::vector<GenOpInfo>* info_out) {
  const SimpleTypeSpec& spec = *final_machine.gen_spec;
  std::vector<GenOpInfo> infos = gen_pt(final_machine, t);
  std::vector<size_t> idx;
  for (size_t i = 0; i < infos.size(); ++i)
    if (infos[i].pt != Transcript::kInfinity) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&infos, &spec](size_t a, size_t b) {
    const GenOpInfo& x = infos[a];
    const GenOpInfo& y = infos[b];
    if (x.pt != y.pt) return x.pt < y.pt;
    if (dominates(spec, y.invocation, x.invocation)) return true;   // dominated first
    if (dominates(spec, x.invocation, y.invocation)) return false;
    return x.process < y.process;
  });
  SequentialHistory h;
  for (size_t i : idx) h.ops.push_back({infos[i].invocation, infos[i].response, infos[i].op_id});
  if (info_out) *info_out = std::move(infos);
  return h;
}

RunResult fill(const RunResult& rr) {
  RunResult out = rr;
  std::vector<GenOpInfo> infos;
  gen_order(rr.machine, rr.transcript, &infos);
  // Solo-complete every linearized but incomplete operation, in pt order.
  std::vector<const GenOpInfo*> pending;
  for (const GenOpInfo& gi : infos)
    if (!gi.complete && gi.pt != Transcript::kInfinity) pending.push_back(&gi);
  std::sort(pending.begin(), pending.end(),
            [](const GenOpInfo* a, const GenOpInfo* b) { return a->pt < b->pt; });
  for (const GenOpInfo* gi : pending) {
    while (!out.machine.procs[static_cast<size_t>(gi->process - 1)].frames.empty()) {
      if (!out.machine.step(gi->process, out.transcript.events)) break;
    }
  }
  return out;
}

bool verify_relation(const SimpleTypeSpec& spec, int bound, std::string* diagnostic) {
  const TypeSpec& base = spec.base;
  std::vector<Invocation> invs = base.enumerate_invocations();
  // All reachable states within `bound` steps.
  std::vector<Val> states = {base.initial};
  std::set<std::string> seen = {base.initial.str()};
  size_t frontier_begin = 0;
  for (int depth = 0; depth < bound; ++depth) {
    size_t frontier_end = states.size();
    for (size_t i = frontier_begin; i < frontier_end; ++i) {
      for (const Invocation& inv : invs) {
        auto r = base.delta(states[i], inv);
        if (!r) continue;
        if (seen.insert(r->first.str()).second) states.push_back(r->first);
      }
    }
    frontier_begin = frontier_end;
  }
  auto fail = [diagnostic](const std::string& msg) {
    if (diagnostic) *diagnostic = msg;
    return false;
  };
  for (const Val& s : states) {
    for (const Invocation& a : invs) {
      for (const Invocation& b : invs) {
        auto ra = base.delta(s, a);
        auto rb = base.delta(s, b);
        if (!ra || !rb) continue;
        Relation rel = spec.relation(a, b);
        auto overwrite_holds = [&](const Invocation& x, const Invocation& y) {
          // x overwrites y: H.y.x valid (x's response unchanged) and state
          // equivalent to H.x alone.
          auto ry = base.delta(s, y);
          auto rx_alone = base.delta(s, x);
          auto rx_after = base.delta(ry->first, x);
          if (!rx_after) return false;
          if (rx_after->second != rx_alone->second) return false;
          return rx_after->first == rx_alone->first;
        };
        bool ok = true;
        switch (rel) {
          case Relation::Commute: {
            auto rab = base.delta(ra->first, b);
            auto rba = base.delta(rb->first, a);
            ok = rab && rba && rab->second == rb->second && rba->second == ra->second &&
                 rab->first == rba->first;
            break;
          }
          case Relation::FirstOverwrites:
            ok = overwrite_holds(a, b);
            break;
          case Relation::SecondOverwrites:
            ok = overwrite_holds(b, a);
            break;
          case Relation::MutualOverwrite:
            ok = overwrite_holds(a, b) && overwrite_holds(b, a);
            break;
        }
        if (!ok)
          return fail("relation violated for " + a.str() + " vs " + b.str() + " at state " +
                      s.str());
      }
    }
  }
  return true;
}

}  // namespace slkit
