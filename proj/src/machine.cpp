#include "slkit/machine.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

#include "slkit/genconstruct.hpp"

namespace slkit {

namespace {

// Method ids (Frame::method).
enum Method : int {
  M_ABA_DWRITE,
  M_ABA_DREAD_LIN,
  M_ABA_DREAD_SL,
  M_MAX_WRITE,
  M_MAX_READ,
  M_DC_UPDATE,
  M_DC_SCAN,
  M_SLSS_UPDATE,
  M_SLSS_SCAN,
  M_CTR_INC,
  M_CTR_READ,
  M_FLIP,
  M_ATOMIC,
  M_GEN_EXECUTE,
  M_LIVELOCK_SPIN,
};

enum class Action { DidStep, Continue };

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Val vals_of(const Val& vec_of_pairs) {
  std::vector<Val> out;
  out.reserve(vec_of_pairs.size());
  for (const Val& kid : vec_of_pairs.kids()) out.push_back(kid.at(0));
  return Val::tup(out);
}

int64_t seq_sum(const Val& vec_of_pairs) {
  int64_t s = 0;
  for (const Val& kid : vec_of_pairs.kids()) s += kid.at(1).as_int();
  return s;
}

}  // namespace

std::string algorithm_name(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::LinABA: return "lin-aba";
    case AlgorithmId::SLABA: return "sl-aba";
    case AlgorithmId::BoundedMaxReg: return "maxreg";
    case AlgorithmId::UnboundedMaxReg: return "maxreg-unbounded";
    case AlgorithmId::DCSnapshot: return "dc-snapshot";
    case AlgorithmId::SLSnapshot: return "sl-snapshot";
    case AlgorithmId::SLSnapshotComposed: return "sl-snapshot-composed";
    case AlgorithmId::SLSnapshotSeq: return "sl-snapshot-seq";
    case AlgorithmId::NoABASnapshot: return "noaba-snapshot";
    case AlgorithmId::LinCounter: return "lin-counter";
    case AlgorithmId::Atomic: return "atomic";
    case AlgorithmId::GenExecute: return "gen";
    case AlgorithmId::Livelock: return "livelock";
  }
  return "?";
}

Val Machine::flip_value(uint64_t seed, uint64_t draw) {
  return Val::integer(static_cast<int64_t>(splitmix64(seed * 0x2545f4914f6cdd1dull + draw) & 1));
}

const Val& Machine::read_shared(const std::string& name) const {
  static const Val kZero = Val::integer(0);
  auto it = shared.find(name);
  if (it != shared.end()) return it->second;
  // Unbounded max-register cells default to 0 and are stored sparsely.
  if ((alg == AlgorithmId::UnboundedMaxReg || alg == AlgorithmId::BoundedMaxReg) &&
      name.rfind("R[", 0) == 0)
    return kZero;
  throw std::out_of_range("unknown shared location " + name);
}

void Machine::write_shared(const std::string& name, Val v) {
  if (alg == AlgorithmId::UnboundedMaxReg && name.rfind("R[", 0) == 0 && v == Val::integer(0)) {
    shared.erase(name);
    return;
  }
  shared[name] = std::move(v);
}

bool Machine::enabled(int p) const {
  const ProcState& ps = procs[static_cast<size_t>(p - 1)];
  if (!ps.frames.empty()) return true;
  if (ps.prog_pos < ps.program.size()) return true;
  return ps.repeat && !ps.program.empty();
}

bool Machine::done() const {
  for (int p = 1; p <= n; ++p)
    if (enabled(p)) return false;
  return true;
}

// All machine step logic lives here; it has privileged access to Machine.
class MachineOps {
 public:
  MachineOps(Machine& m, std::vector<Event>& out) : m_(m), out_(out) {}

  void begin_top_op(int p, const Invocation& inv) {
    ProcState& ps = proc(p);
    Frame f;
    f.op_id = m_.next_op_id++;
    f.invocation = inv;
    f.invocation.process = p;
    f.op_class = inv.name;
    f.method = method_for(inv);
    f.locals = initial_locals(f.method);
    cur_op_steps(p) = 0;
    Event e;
    e.kind = Event::Kind::Inv;
    e.obj = f.method == M_FLIP ? "coin" : "O";
    e.op_id = f.op_id;
    e.process = p;
    e.invocation = f.invocation;
    out_.push_back(e);
    ps.frames.push_back(std::move(f));
  }

  Action exec(int p) {
    Frame& f = proc(p).frames.back();
    switch (f.method) {
      case M_ABA_DWRITE: return aba_dwrite(p, f);
      case M_ABA_DREAD_LIN: return aba_dread_lin(p, f);
      case M_ABA_DREAD_SL: return aba_dread_sl(p, f);
      case M_MAX_WRITE: return max_write(p, f);
      case M_MAX_READ: return max_read(p, f);
      case M_DC_UPDATE: return dc_update(p, f);
      case M_DC_SCAN: return dc_scan(p, f);
      case M_SLSS_UPDATE: return slss_update(p, f);
      case M_SLSS_SCAN: return slss_scan(p, f);
      case M_CTR_INC: return ctr_inc(p, f);
      case M_CTR_READ: return ctr_read(p, f);
      case M_FLIP: return flip(p, f);
      case M_ATOMIC: return atomic_op(p, f);
      case M_GEN_EXECUTE: return gen_execute(p, f);
      case M_LIVELOCK_SPIN: return livelock_spin(p, f);
    }
    throw std::logic_error("bad method");
  }

 private:
  ProcState& proc(int p) { return m_.procs[static_cast<size_t>(p - 1)]; }
  int64_t& cur_op_steps(int p) {
    if (m_.cur_op_steps_.size() < static_cast<size_t>(m_.n))
      m_.cur_op_steps_.resize(static_cast<size_t>(m_.n), 0);
    return m_.cur_op_steps_[static_cast<size_t>(p - 1)];
  }

  int method_for(const Invocation& inv) const {
    if (inv.name == "Flip") return M_FLIP;
    switch (m_.alg) {
      case AlgorithmId::LinABA:
        if (inv.name == "DWrite") return M_ABA_DWRITE;
        if (inv.name == "DRead") return M_ABA_DREAD_LIN;
        break;
      case AlgorithmId::SLABA:
        if (inv.name == "DWrite") return M_ABA_DWRITE;
        if (inv.name == "DRead") return M_ABA_DREAD_SL;
        break;
      case AlgorithmId::BoundedMaxReg:
      case AlgorithmId::UnboundedMaxReg:
        if (inv.name == "maxWrite") return M_MAX_WRITE;
        if (inv.name == "maxRead") return M_MAX_READ;
        break;
      case AlgorithmId::DCSnapshot:
        if (inv.name == "update") return M_DC_UPDATE;
        if (inv.name == "scan") return M_DC_SCAN;
        break;
      case AlgorithmId::SLSnapshot:
      case AlgorithmId::SLSnapshotComposed:
      case AlgorithmId::SLSnapshotSeq:
      case AlgorithmId::NoABASnapshot:
        if (inv.name == "update") return M_SLSS_UPDATE;
        if (inv.name == "scan") return M_SLSS_SCAN;
        break;
      case AlgorithmId::LinCounter:
        if (inv.name == "Inc") return M_CTR_INC;
        if (inv.name == "Read") return M_CTR_READ;
        break;
      case AlgorithmId::Atomic: return M_ATOMIC;
      case AlgorithmId::GenExecute: return M_GEN_EXECUTE;
      case AlgorithmId::Livelock:
        if (inv.name == "spin") return M_LIVELOCK_SPIN;
        break;
      default: break;
    }
    throw std::invalid_argument("invocation " + inv.name + " does not match algorithm " +
                                algorithm_name(m_.alg));
  }

  std::vector<Val> initial_locals(int method) const {
    switch (method) {
      case M_ABA_DWRITE: return {Val::nil()};                            // s
      case M_ABA_DREAD_LIN: return {Val::nil(), Val::nil(), Val::nil()}; // triple1, ann, ret
      case M_ABA_DREAD_SL: return {Val::boolean(false), Val::nil(), Val::nil()};  // changed, triple1, ann
      case M_MAX_WRITE: return {Val::integer(1)};                        // i
      case M_MAX_READ: return {Val::integer(1), Val::nil()};             // i, probe
      case M_DC_UPDATE: return {};
      case M_DC_SCAN:
        return {Val::integer(1), Val::tup({}), Val::tup({})};            // idx, c1, c2
      case M_SLSS_UPDATE: return {Val::nil(), Val::nil()};               // ell, ret
      case M_SLSS_SCAN:
        // s1, c1, ell, s2, c2, last seq sum, run length
        return {Val::nil(), Val::nil(), Val::nil(), Val::nil(), Val::nil(),
                Val::integer(-1), Val::integer(0)};
      case M_CTR_INC: return {Val::nil()};                               // x
      case M_CTR_READ: return {Val::integer(0), Val::integer(1)};        // sum, i
      case M_FLIP: return {};
      case M_ATOMIC: return {};
      case M_GEN_EXECUTE: return {Val::nil(), Val::integer(-1)};         // view, node idx
      case M_LIVELOCK_SPIN: return {Val::nil()};                         // r
    }
    return {};
  }

  // ---- event plumbing ----------------------------------------------------

  void charge_access(const Frame& f, int p, const std::string& obj, const std::string& name) {
    m_.counters.shared_steps[f.op_class]++;
    m_.counters.total_shared++;
    m_.counters.sub_invocations[f.op_class + "/" + obj + "." + name]++;
    cur_op_steps(p)++;
  }

  // A base-object access: adjacent inv/rsp pair, one shared step.
  Val access(const Frame& f, int p, const std::string& obj, const char* line, Invocation inv,
             Val rsp) {
    inv.process = p;
    int64_t id = m_.next_op_id++;
    Event ei;
    ei.kind = Event::Kind::Inv;
    ei.obj = obj;
    ei.op_id = id;
    ei.process = p;
    ei.invocation = inv;
    ei.line = line;
    out_.push_back(ei);
    Event er;
    er.kind = Event::Kind::Rsp;
    er.obj = obj;
    er.op_id = id;
    er.process = p;
    er.response = rsp;
    er.line = line;
    out_.push_back(er);
    charge_access(f, p, obj, inv.name);
    return rsp;
  }

  Val reg_read(const Frame& f, int p, const std::string& reg, const char* line) {
    return access(f, p, f.obj_prefix + reg, line, {"Read", {}, p},
                  m_.read_shared(f.obj_prefix + reg));
  }
  void reg_write(const Frame& f, int p, const std::string& reg, const char* line, Val v) {
    m_.write_shared(f.obj_prefix + reg, v);
    access(f, p, f.obj_prefix + reg, line, {"Write", {v}, p}, Val::unit());
  }

  Val& persistent(const Frame& f, int p, const std::string& key, Val init) {
    auto& map = proc(p).persistent;
    auto it = map.find(f.obj_prefix + key);
    if (it == map.end()) it = map.emplace(f.obj_prefix + key, std::move(init)).first;
    return it->second;
  }

  // Finishes the op of the top frame: emits the response, pops the frame and
  // hands the value to the caller frame if any.
  Action end_op(int p, Val response) {
    ProcState& ps = proc(p);
    Frame f = ps.frames.back();
    ps.frames.pop_back();
    Event e;
    e.kind = Event::Kind::Rsp;
    e.obj = f.method == M_FLIP ? "coin" : (ps.frames.empty() ? "O" : frame_obj(f));
    e.op_id = f.op_id;
    e.process = p;
    e.response = response;
    out_.push_back(e);
    if (ps.frames.empty()) {
      m_.counters.responses++;
      m_.counters.op_count[f.op_class]++;
      auto& mx = m_.counters.max_op_steps[f.op_class];
      mx = std::max(mx, cur_op_steps(p));
      return Action::DidStep;
    }
    if (f.ret_slot >= 0) ps.frames.back().locals[static_cast<size_t>(f.ret_slot)] = response;
    return Action::Continue;  // let the caller's post-pc run in this step
  }

  static std::string frame_obj(const Frame& f) {
    // "R." prefix -> the nested op ran on object "R".
    if (f.obj_prefix.empty()) return "O";
    return f.obj_prefix.substr(0, f.obj_prefix.size() - 1);
  }

  // Starts a nested operation (composed mode): emits its invocation and lets
  // its first line run within the current step.
  Action call_nested(int p, int method, std::string obj_prefix, Invocation inv, int ret_slot,
                     const std::string& op_class) {
    Frame f;
    f.method = method;
    f.obj_prefix = std::move(obj_prefix);
    f.op_id = m_.next_op_id++;
    f.invocation = inv;
    f.invocation.process = p;
    f.op_class = op_class;
    f.locals = initial_locals(method);
    f.ret_slot = ret_slot;
    m_.counters.sub_invocations[op_class + "/" + frame_obj(f) + "." + inv.name]++;
    Event e;
    e.kind = Event::Kind::Inv;
    e.obj = frame_obj(f);
    e.op_id = f.op_id;
    e.process = p;
    e.invocation = f.invocation;
    out_.push_back(e);
    proc(p).frames.push_back(std::move(f));
    return Action::Continue;
  }

  // ---- ABA-detecting register (linearizable + strongly linearizable) ------

  // GetSeq: one shared read of A[c] plus local bookkeeping, then the choice
  // of a fresh sequence number outside na and usedQ.
  int64_t get_seq(Frame& f, int p) {
    Val& c_val = persistent(f, p, "c", Val::integer(0));
    Val& na_val = persistent(f, p, "na", Val::tup({}));
    Val& used_val = persistent(f, p, "usedQ", Val::vec(static_cast<size_t>(m_.n + 1), Val::nil()));
    int64_t c = c_val.as_int();
    Val ann = reg_read(f, p, "A[" + std::to_string(c) + "]", lines::getseq_aread);
    // na <- na without (c, *), plus (c, s_r) when the announce names p.
    std::vector<Val> na;
    for (const Val& pr : na_val.kids())
      if (pr.at(0).as_int() != c) na.push_back(pr);
    if (ann.at(0) == Val::integer(p) && !ann.at(1).is_nil())
      na.push_back(Val::pair(Val::integer(c), ann.at(1)));
    std::sort(na.begin(), na.end());
    na_val = Val::tup(na);
    c_val = Val::integer((c + 1) % m_.n);
    // admissible = {0..2n+1} minus na values minus usedQ
    std::vector<int64_t> admissible;
    for (int64_t s = 0; s <= 2 * m_.n + 1; ++s) {
      bool blocked = false;
      for (const Val& pr : na)
        if (pr.at(1) == Val::integer(s)) blocked = true;
      for (const Val& q : used_val.kids())
        if (q == Val::integer(s)) blocked = true;
      if (!blocked) admissible.push_back(s);
    }
    assert(!admissible.empty());
    int64_t s;
    if (m_.randomize_seq) {
      uint64_t r = splitmix64(m_.rng_seed * 0x2545f4914f6cdd1dull + m_.rng_draws++);
      s = admissible[r % admissible.size()];
    } else {
      s = admissible.front();
    }
    std::vector<Val> used = used_val.kids();
    used.push_back(Val::integer(s));
    used.erase(used.begin());
    used_val = Val::tup(used);
    return s;
  }

  Action aba_dwrite(int p, Frame& f) {
    switch (f.pc) {
      case 0:
        f.locals[0] = Val::integer(get_seq(f, p));
        f.pc = 1;
        return Action::DidStep;
      case 1:
        reg_write(f, p, "X", lines::xwrite,
                  Val::tup({f.invocation.args[0], Val::integer(p), f.locals[0]}));
        return end_op(p, Val::unit());
    }
    throw std::logic_error("aba_dwrite pc");
  }

  Action aba_dread_lin(int p, Frame& f) {
    const std::string aq = "A[" + std::to_string(p - 1) + "]";
    switch (f.pc) {
      case 0:
        f.locals[0] = reg_read(f, p, "X", lines::xread1);
        f.pc = 1;
        return Action::DidStep;
      case 1:
        f.locals[1] = reg_read(f, p, aq, lines::aread);
        f.pc = 2;
        return Action::DidStep;
      case 2:
        reg_write(f, p, aq, lines::awrite, Val::pair(f.locals[0].at(1), f.locals[0].at(2)));
        f.pc = 3;
        return Action::DidStep;
      case 3: {
        Val second = reg_read(f, p, "X", lines::xread2);
        Val& b = persistent(f, p, "b", Val::boolean(false));
        Val first = f.locals[0];
        Val ann = f.locals[1];
        Val ret;
        if (Val::pair(first.at(1), first.at(2)) == ann)
          ret = Val::pair(first.at(0), b);
        else
          ret = Val::pair(first.at(0), Val::boolean(true));
        b = Val::boolean(first != second);
        return end_op(p, ret);
      }
    }
    throw std::logic_error("aba_dread_lin pc");
  }

  Action aba_dread_sl(int p, Frame& f) {
    const std::string aq = "A[" + std::to_string(p - 1) + "]";
    switch (f.pc) {
      case 0:
        f.locals[1] = reg_read(f, p, "X", lines::xread1);
        f.pc = 1;
        return Action::DidStep;
      case 1:
        f.locals[2] = reg_read(f, p, aq, lines::aread);
        f.pc = 2;
        return Action::DidStep;
      case 2:
        reg_write(f, p, aq, lines::awrite, Val::pair(f.locals[1].at(1), f.locals[1].at(2)));
        f.pc = 3;
        return Action::DidStep;
      case 3: {
        Val second = reg_read(f, p, "X", lines::xread2);
        Val first = f.locals[1];
        bool quiet = Val::pair(first.at(1), first.at(2)) == f.locals[2] && first == second;
        if (quiet) return end_op(p, Val::pair(second.at(0), f.locals[0]));
        f.locals[0] = Val::boolean(true);
        f.pc = 0;
        return Action::DidStep;
      }
    }
    throw std::logic_error("aba_dread_sl pc");
  }

  // ---- max-register --------------------------------------------------------

  Action max_write(int p, Frame& f) {
    int64_t x = f.invocation.args[0].as_int();
    int64_t i = f.locals[0].as_int();
    if (i > x) return end_op(p, Val::unit());  // maxWrite(0): no shared access
    reg_write(f, p, "R[" + std::to_string(i) + "]", lines::mwrite, Val::integer(x));
    f.locals[0] = Val::integer(i + 1);
    if (i + 1 > x) return end_op(p, Val::unit());
    return Action::DidStep;
  }

  Action max_read(int p, Frame& f) {
    Val& t = persistent(f, p, "t", Val::integer(0));
    int64_t i = f.locals[0].as_int();
    if (i <= t.as_int()) {
      // helping maxWrite(t)
      reg_write(f, p, "R[" + std::to_string(i) + "]", lines::mwrite, t);
      f.locals[0] = Val::integer(i + 1);
      return Action::DidStep;
    }
    Val r = reg_read(f, p, "R[" + std::to_string(t.as_int() + 1) + "]", lines::mread);
    if (r == Val::integer(0)) return end_op(p, t);
    t = r;
    f.locals[0] = Val::integer(1);
    return Action::DidStep;
  }

  // ---- double-collect snapshot --------------------------------------------

  Action dc_update(int p, Frame& f) {
    Val& seq = persistent(f, p, "dseq", Val::integer(0));
    seq = Val::integer(seq.as_int() + 1);
    reg_write(f, p, "C[" + std::to_string(p) + "]", lines::cwrite,
              Val::pair(f.invocation.args[0], seq));
    return end_op(p, Val::unit());
  }

  Action dc_scan(int p, Frame& f) {
    int64_t idx = f.locals[0].as_int();
    bool first_pass = f.pc == 0;
    Val cell = reg_read(f, p, "C[" + std::to_string(idx) + "]", lines::cread);
    Val& target = first_pass ? f.locals[1] : f.locals[2];
    target.kids().push_back(cell);
    if (idx < m_.n) {
      f.locals[0] = Val::integer(idx + 1);
      return Action::DidStep;
    }
    f.locals[0] = Val::integer(1);
    if (first_pass) {
      f.pc = 1;
      return Action::DidStep;
    }
    if (f.locals[1] == f.locals[2]) return end_op(p, vals_of(f.locals[2]));
    f.locals[1] = f.locals[2];
    f.locals[2] = Val::tup({});
    return Action::DidStep;
  }

  // ---- snapshot construction (plain, sequence-numbered, no-ABA) ------------

  bool with_seq() const { return m_.alg == AlgorithmId::SLSnapshotSeq; }
  bool no_aba() const { return m_.alg == AlgorithmId::NoABASnapshot; }

  Val atomic_s_scan(Frame& f, int p, const char* line) {
    return access(f, p, "S", line, {"scan", {}, p}, m_.read_shared("S"));
  }
  void atomic_s_update(Frame& f, int p, const Val& entry) {
    Val s = m_.read_shared("S");
    s.at(static_cast<size_t>(p - 1)) = entry;
    m_.write_shared("S", s);
    access(f, p, "S", lines::supdate, {"update", {entry}, p}, Val::unit());
  }
  Val atomic_r_dread(Frame& f, int p, const char* line) {
    if (no_aba())
      return access(f, p, "R", line, {"Read", {}, p}, m_.read_shared("R"));
    Val r = m_.read_shared("R");
    Val rsp = Val::pair(r.at(0), r.at(1).at(static_cast<size_t>(p - 1)));
    r.at(1).at(static_cast<size_t>(p - 1)) = Val::boolean(false);
    m_.write_shared("R", r);
    return access(f, p, "R", line, {"DRead", {}, p}, rsp);
  }
  void atomic_r_dwrite(Frame& f, int p, const Val& v, const char* line) {
    if (no_aba()) {
      m_.write_shared("R", v);
      access(f, p, "R", line, {"Write", {v}, p}, Val::unit());
      return;
    }
    Val r = m_.read_shared("R");
    r.at(0) = v;
    for (int q = 0; q < m_.n; ++q) r.at(1).at(static_cast<size_t>(q)) = Val::boolean(true);
    m_.write_shared("R", r);
    access(f, p, "R", line, {"DWrite", {v}, p}, Val::unit());
  }

  Action slss_update(int p, Frame& f) {
    switch (f.pc) {
      case 0: {
        Val entry = f.invocation.args[0];
        if (with_seq()) {
          Val& seq = persistent(f, p, "aseq", Val::integer(0));
          seq = Val::integer(seq.as_int() + 1);
          entry = Val::pair(entry, seq);
        }
        if (m_.nested_s) {
          f.pc = 10;
          return call_nested(p, M_DC_UPDATE, "S.", {"update", {entry}, p}, 1, f.op_class);
        }
        atomic_s_update(f, p, entry);
        f.pc = 1;
        return Action::DidStep;
      }
      case 10:
        f.pc = 1;
        return Action::DidStep;
      case 1:
        if (m_.nested_s) {
          f.pc = 11;
          return call_nested(p, M_DC_SCAN, "S.", {"scan", {}, p}, 0, f.op_class);
        }
        f.locals[0] = atomic_s_scan(f, p, lines::suscan);
        f.pc = 2;
        return Action::DidStep;
      case 11:
        f.pc = 2;
        return Action::DidStep;
      case 2:
        if (m_.nested_r) {
          f.pc = 12;
          return call_nested(p, M_ABA_DWRITE, "R.", {"DWrite", {f.locals[0]}, p}, 1, f.op_class);
        }
        atomic_r_dwrite(f, p, f.locals[0], lines::rwrite);
        return end_op(p, Val::unit());
      case 12:
        return end_op(p, Val::unit());
    }
    throw std::logic_error("slss_update pc");
  }

  // Tracks runs of equal seq sums among the S.scan results of one scan op.
  void note_scan_sum(Frame& f, const Val& ell) {
    if (!with_seq()) return;
    int64_t sum = seq_sum(ell);
    int64_t run = f.locals[5].as_int() == sum ? f.locals[6].as_int() + 1 : 1;
    f.locals[5] = Val::integer(sum);
    f.locals[6] = Val::integer(run);
    m_.counters.max_scan_sum_run = std::max(m_.counters.max_scan_sum_run, run);
  }

  Action slss_scan(int p, Frame& f) {
    switch (f.pc) {
      case 0:
        if (m_.nested_r) {
          f.pc = 10;
          return call_nested(p, M_ABA_DREAD_SL, "R.", {"DRead", {}, p}, 0, f.op_class);
        }
        f.locals[0] = atomic_r_dread(f, p, lines::rread1);
        f.pc = 1;
        return Action::DidStep;
      case 10:
        f.pc = 1;
        return Action::DidStep;
      case 1:
        if (m_.nested_s) {
          f.pc = 11;
          return call_nested(p, M_DC_SCAN, "S.", {"scan", {}, p}, 2, f.op_class);
        }
        f.locals[2] = atomic_s_scan(f, p, lines::sscan);
        note_scan_sum(f, f.locals[2]);
        f.pc = 2;
        return Action::DidStep;
      case 11:
        note_scan_sum(f, f.locals[2]);
        f.pc = 2;
        return Action::DidStep;
      case 2:
        if (m_.nested_r) {
          f.pc = 12;
          return call_nested(p, M_ABA_DREAD_SL, "R.", {"DRead", {}, p}, 3, f.op_class);
        }
        f.locals[3] = atomic_r_dread(f, p, lines::rread2);
        return scan_guard(p, f);
      case 12:
        return scan_guard(p, f);
      case 3:
        if (m_.nested_r) {
          f.pc = 13;
          return call_nested(p, M_ABA_DWRITE, "R.", {"DWrite", {f.locals[2]}, p}, 4, f.op_class);
        }
        atomic_r_dwrite(f, p, f.locals[2], lines::rhelp);
        f.pc = 0;
        return Action::DidStep;
      case 13:
        f.pc = 0;
        return Action::DidStep;
    }
    throw std::logic_error("slss_scan pc");
  }

  Action scan_guard(int p, Frame& f) {
    Val s1, s2;
    bool c2 = false;
    if (no_aba()) {
      s1 = f.locals[0];
      s2 = f.locals[3];
    } else {
      s1 = f.locals[0].at(0);
      s2 = f.locals[3].at(0);
      c2 = f.locals[3].at(1).as_bool();
    }
    const Val& ell = f.locals[2];
    bool eq = with_seq() ? (vals_of(s1) == vals_of(ell) && vals_of(ell) == vals_of(s2))
                         : (s1 == ell && ell == s2);
    if (eq && !c2) return end_op(p, with_seq() ? vals_of(s2) : s2);
    // poised either at the help write or at the next iteration
    f.pc = !eq ? 3 : 0;
    return Action::DidStep;
  }

  // ---- counter --------------------------------------------------------------

  Action ctr_inc(int p, Frame& f) {
    const std::string cp = "C[" + std::to_string(p) + "]";
    switch (f.pc) {
      case 0:
        f.locals[0] = reg_read(f, p, cp, lines::cntread);
        f.pc = 1;
        return Action::DidStep;
      case 1:
        reg_write(f, p, cp, lines::cntwrite, Val::integer(f.locals[0].as_int() + 1));
        return end_op(p, Val::unit());
    }
    throw std::logic_error("ctr_inc pc");
  }

  Action ctr_read(int p, Frame& f) {
    int64_t i = f.locals[1].as_int();
    Val v = reg_read(f, p, "C[" + std::to_string(i) + "]", lines::cntread);
    f.locals[0] = Val::integer(f.locals[0].as_int() + v.as_int());
    if (i == m_.n) return end_op(p, f.locals[0]);
    f.locals[1] = Val::integer(i + 1);
    return Action::DidStep;
  }

  // ---- misc -------------------------------------------------------------------

  Action flip(int p, Frame&) {
    Val v = Machine::flip_value(m_.rng_seed, m_.rng_draws++);
    return end_op(p, v);
  }

  Action atomic_op(int p, Frame& f) {
    auto r = m_.atomic_spec->delta(m_.read_shared("state"), f.invocation);
    if (!r) throw std::invalid_argument("atomic machine: bad invocation " + f.invocation.str());
    m_.write_shared("state", r->first);
    m_.counters.shared_steps[f.op_class]++;
    m_.counters.total_shared++;
    cur_op_steps(p)++;
    return end_op(p, r->second);
  }

  Action gen_execute(int p, Frame& f) {
    switch (f.pc) {
      case 0: {
        Val view = access(f, p, "root", lines::gscan, {"scan", {}, p}, m_.read_shared("root"));
        f.locals[0] = view;
        std::vector<int> refs;
        for (const Val& v : view.kids()) refs.push_back(v.is_nil() ? -1 : (int)v.as_int());
        Val resp = gen_response(*m_.gen_spec, m_.nodes, refs, f.invocation);
        GenNode node;
        node.invocation = f.invocation;
        node.response = resp;
        node.preceding = refs;
        node.owner = p;
        int ordinal = 1;
        for (const GenNode& other : m_.nodes)
          if (other.owner == p) ++ordinal;
        node.ordinal = ordinal;
        f.locals[1] = Val::integer(static_cast<int64_t>(m_.nodes.size()));
        m_.nodes.push_back(std::move(node));
        f.pc = 1;
        return Action::DidStep;
      }
      case 1: {
        Val root = m_.read_shared("root");
        root.at(static_cast<size_t>(p - 1)) = f.locals[1];
        m_.write_shared("root", root);
        access(f, p, "root", lines::gupdate, {"update", {f.locals[1]}, p}, Val::unit());
        return end_op(p, m_.nodes[static_cast<size_t>(f.locals[1].as_int())].response);
      }
    }
    throw std::logic_error("gen_execute pc");
  }

  Action livelock_spin(int p, Frame& f) {
    switch (f.pc) {
      case 0:
        reg_write(f, p, "X", lines::cntwrite, Val::integer(p));
        f.pc = 1;
        return Action::DidStep;
      case 1: {
        Val r = reg_read(f, p, "X", lines::cntread);
        if (r == Val::integer(p)) return end_op(p, Val::unit());
        f.pc = 0;
        return Action::DidStep;
      }
    }
    throw std::logic_error("livelock pc");
  }

  Machine& m_;
  std::vector<Event>& out_;
};

bool Machine::step(int p, std::vector<Event>& out) {
  if (p < 1 || p > n) throw std::out_of_range("process id");
  ProcState& ps = procs[static_cast<size_t>(p - 1)];
  MachineOps ops(*this, out);
  if (ps.frames.empty()) {
    if (ps.prog_pos >= ps.program.size()) {
      if (!ps.repeat || ps.program.empty()) return false;
      ps.prog_pos = 0;
    }
    ops.begin_top_op(p, ps.program[ps.prog_pos++]);
  }
  int guard = 0;
  while (ops.exec(p) == Action::Continue) {
    if (++guard > 32) throw std::logic_error("step cascade too deep");
  }
  return true;
}

Fingerprint Machine::fingerprint() const {
  std::string bytes;
  bytes.reserve(256);
  bytes.push_back(static_cast<char>(alg));
  bytes.push_back(static_cast<char>(n));
  auto push64 = [&bytes](int64_t v) {
    bytes.append(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  push64(maxreg_bound);
  bytes.push_back(nested_r);
  bytes.push_back(nested_s);
  push64(static_cast<int64_t>(rng_draws));
  for (const auto& [name, val] : shared) {
    bytes += name;
    bytes.push_back(0);
    val.encode(bytes);
  }
  for (const ProcState& ps : procs) {
    push64(static_cast<int64_t>(ps.prog_pos));
    for (const auto& [key, val] : ps.persistent) {
      bytes += key;
      bytes.push_back(0);
      val.encode(bytes);
    }
    bytes.push_back(1);
    for (const Frame& fr : ps.frames) {
      bytes.push_back(static_cast<char>(fr.method));
      bytes.push_back(static_cast<char>(fr.pc));
      bytes.push_back(static_cast<char>(fr.ret_slot + 1));
      bytes += fr.obj_prefix;
      bytes.push_back(0);
      bytes += fr.invocation.name;
      bytes.push_back(0);
      for (const Val& a : fr.invocation.args) a.encode(bytes);
      bytes.push_back(2);
      for (const Val& l : fr.locals) l.encode(bytes);
      bytes.push_back(3);
    }
    bytes.push_back(4);
  }
  for (const GenNode& nd : nodes) {
    bytes += nd.invocation.name;
    bytes.push_back(0);
    for (const Val& a : nd.invocation.args) a.encode(bytes);
    nd.response.encode(bytes);
    push64(nd.owner);
    push64(nd.ordinal);
    for (int pr : nd.preceding) push64(pr);
    bytes.push_back(5);
  }
  uint64_t a = 0xcbf29ce484222325ull, b = 0x9ddfea08eb382d69ull;
  for (unsigned char c : bytes) {
    a = (a ^ c) * 0x100000001b3ull;
    b = splitmix64(b ^ (c + 0x9e3779b97f4a7c15ull));
  }
  return {a, b};
}

namespace {

void init_common(Machine& m, int n, std::vector<std::vector<Invocation>> programs,
                 std::vector<bool> repeat) {
  m.n = n;
  m.procs.resize(static_cast<size_t>(n));
  programs.resize(static_cast<size_t>(n));
  repeat.resize(static_cast<size_t>(n), false);
  for (int p = 1; p <= n; ++p) {
    auto& ps = m.procs[static_cast<size_t>(p - 1)];
    ps.program = programs[static_cast<size_t>(p - 1)];
    for (Invocation& inv : ps.program) inv.process = p;
    ps.repeat = repeat[static_cast<size_t>(p - 1)];
  }
}

void init_aba_shared(Machine& m, const std::string& prefix) {
  m.shared[prefix + "X"] = Val::tup({Val::nil(), Val::nil(), Val::nil()});
  for (int i = 0; i < m.n; ++i)
    m.shared[prefix + "A[" + std::to_string(i) + "]"] = Val::pair(Val::nil(), Val::nil());
}

}  // namespace

Machine load(AlgorithmId alg, int n, std::vector<std::vector<Invocation>> programs,
             std::vector<bool> repeat) {
  Machine m;
  m.alg = alg;
  init_common(m, n, std::move(programs), std::move(repeat));
  switch (alg) {
    case AlgorithmId::LinABA:
    case AlgorithmId::SLABA:
      init_aba_shared(m, "");
      break;
    case AlgorithmId::BoundedMaxReg:
      throw std::invalid_argument("use load_maxreg for the bounded max-register");
    case AlgorithmId::UnboundedMaxReg:
      m.maxreg_bound = -1;
      break;
    case AlgorithmId::DCSnapshot:
      for (int i = 1; i <= n; ++i)
        m.shared["C[" + std::to_string(i) + "]"] = Val::pair(Val::nil(), Val::integer(0));
      break;
    case AlgorithmId::SLSnapshot:
      m.shared["S"] = Val::vec(static_cast<size_t>(n), Val::nil());
      m.shared["R"] = Val::pair(Val::vec(static_cast<size_t>(n), Val::nil()),
                                Val::vec(static_cast<size_t>(n), Val::boolean(false)));
      break;
    case AlgorithmId::SLSnapshotComposed: {
      m.nested_r = true;
      m.nested_s = true;
      for (int i = 1; i <= n; ++i)
        m.shared["S.C[" + std::to_string(i) + "]"] = Val::pair(Val::nil(), Val::integer(0));
      init_aba_shared(m, "R.");
      break;
    }
    case AlgorithmId::SLSnapshotSeq: {
      Val entry = Val::pair(Val::nil(), Val::integer(0));
      m.shared["S"] = Val::vec(static_cast<size_t>(n), entry);
      m.shared["R"] = Val::pair(Val::vec(static_cast<size_t>(n), entry),
                                Val::vec(static_cast<size_t>(n), Val::boolean(false)));
      break;
    }
    case AlgorithmId::NoABASnapshot:
      m.shared["S"] = Val::vec(static_cast<size_t>(n), Val::nil());
      m.shared["R"] = Val::vec(static_cast<size_t>(n), Val::nil());
      break;
    case AlgorithmId::LinCounter:
      for (int i = 1; i <= n; ++i) m.shared["C[" + std::to_string(i) + "]"] = Val::integer(0);
      break;
    case AlgorithmId::Livelock:
      m.shared["X"] = Val::integer(0);
      break;
    case AlgorithmId::Atomic:
      throw std::invalid_argument("use load_atomic");
    case AlgorithmId::GenExecute:
      throw std::invalid_argument("use load_gen");
  }
  return m;
}

Machine load_atomic(TypeSpec spec, int n, std::vector<std::vector<Invocation>> programs,
                    std::vector<bool> repeat) {
  Machine m;
  m.alg = AlgorithmId::Atomic;
  init_common(m, n, std::move(programs), std::move(repeat));
  m.shared["state"] = spec.initial;
  m.atomic_spec = std::make_shared<TypeSpec>(std::move(spec));
  return m;
}

Machine load_maxreg(int64_t bound, int n, std::vector<std::vector<Invocation>> programs,
                    std::vector<bool> repeat) {
  Machine m;
  m.alg = bound < 0 ? AlgorithmId::UnboundedMaxReg : AlgorithmId::BoundedMaxReg;
  m.maxreg_bound = bound;
  init_common(m, n, std::move(programs), std::move(repeat));
  if (bound >= 0)
    for (int64_t i = 1; i <= bound + 1; ++i)
      m.shared["R[" + std::to_string(i) + "]"] = Val::integer(0);
  return m;
}

Machine load_gen(std::shared_ptr<const SimpleTypeSpec> spec, int n,
                 std::vector<std::vector<Invocation>> programs) {
  Machine m;
  m.alg = AlgorithmId::GenExecute;
  init_common(m, n, std::move(programs), {});
  m.shared["root"] = Val::vec(static_cast<size_t>(n), Val::nil());
  m.gen_spec = std::move(spec);
  return m;
}

RunResult run(Machine m, const std::vector<int>& schedule) {
  RunResult rr;
  rr.transcript.n = m.n;
  for (int p : schedule) {
    if (!m.step(p, rr.transcript.events)) {
      rr.truncated = true;
      m.warnings.push_back("schedule references idle process " + std::to_string(p));
      break;
    }
  }
  rr.machine = std::move(m);
  return rr;
}

StepCounters step_report(const Machine& m) { return m.counters; }

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("alg=", 0) == 0) {
      std::istringstream hs(line);
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("alg=", 0) == 0) sc.alg_id = tok.substr(4);
        if (tok.rfind("n=", 0) == 0) sc.n = std::stoi(tok.substr(2));
      }
      sc.programs.resize(static_cast<size_t>(sc.n));
      sc.repeat.resize(static_cast<size_t>(sc.n), false);
      continue;
    }
    if (line.rfind("schedule:", 0) == 0) {
      std::istringstream ss(line.substr(9));
      std::vector<int> sched;
      int p;
      while (ss >> p) sched.push_back(p);
      sc.schedules.push_back(std::move(sched));
      continue;
    }
    if (line[0] == 'p') {
      size_t colon = line.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("bad scenario line: " + line);
      int p = std::stoi(line.substr(1, colon - 1));
      if (p < 1 || p > sc.n) throw std::invalid_argument("bad process id in scenario");
      std::string body = trim(line.substr(colon + 1));
      if (body.rfind("repeat ", 0) == 0) {
        sc.repeat[static_cast<size_t>(p - 1)] = true;
        body = trim(body.substr(7));
      }
      std::istringstream ops(body);
      std::string item;
      while (std::getline(ops, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        Invocation inv;
        size_t par = item.find('(');
        if (par == std::string::npos) {
          inv.name = item;
        } else {
          inv.name = item.substr(0, par);
          size_t close = item.rfind(')');
          std::string args = item.substr(par + 1, close - par - 1);
          std::istringstream as(args);
          std::string a;
          while (std::getline(as, a, ',')) {
            a = trim(a);
            if (a.empty()) continue;
            inv.args.push_back(a == "nil" ? Val::nil() : Val::integer(std::stoll(a)));
          }
        }
        inv.process = p;
        sc.programs[static_cast<size_t>(p - 1)].push_back(inv);
      }
      continue;
    }
    throw std::invalid_argument("bad scenario line: " + line);
  }
  if (sc.alg_id.empty() || sc.n == 0) throw std::invalid_argument("scenario missing alg=/n=");
  return sc;
}

Machine machine_from_scenario(const Scenario& sc) {
  const std::string& id = sc.alg_id;
  if (id == "lin-aba") return load(AlgorithmId::LinABA, sc.n, sc.programs, sc.repeat);
  if (id == "sl-aba") return load(AlgorithmId::SLABA, sc.n, sc.programs, sc.repeat);
  if (id == "dc-snapshot") return load(AlgorithmId::DCSnapshot, sc.n, sc.programs, sc.repeat);
  if (id == "sl-snapshot") return load(AlgorithmId::SLSnapshot, sc.n, sc.programs, sc.repeat);
  if (id == "sl-snapshot-composed")
    return load(AlgorithmId::SLSnapshotComposed, sc.n, sc.programs, sc.repeat);
  if (id == "sl-snapshot-seq")
    return load(AlgorithmId::SLSnapshotSeq, sc.n, sc.programs, sc.repeat);
  if (id == "noaba-snapshot")
    return load(AlgorithmId::NoABASnapshot, sc.n, sc.programs, sc.repeat);
  if (id == "lin-counter") return load(AlgorithmId::LinCounter, sc.n, sc.programs, sc.repeat);
  if (id == "livelock") return load(AlgorithmId::Livelock, sc.n, sc.programs, sc.repeat);
  if (id == "maxreg-unbounded") return load_maxreg(-1, sc.n, sc.programs, sc.repeat);
  if (id.rfind("maxreg:", 0) == 0)
    return load_maxreg(std::stoll(id.substr(7)), sc.n, sc.programs, sc.repeat);
  if (id.rfind("atomic:", 0) == 0)
    return load_atomic(spec_by_id(id.substr(7), sc.n), sc.n, sc.programs, sc.repeat);
  if (id.rfind("gen:", 0) == 0)
    return load_gen(simple_type_by_id(id.substr(4), sc.n), sc.n, sc.programs);
  throw std::invalid_argument("unknown algorithm id: " + id);
}

TypeSpec spec_for_machine(const Machine& m) {
  switch (m.alg) {
    case AlgorithmId::LinABA:
    case AlgorithmId::SLABA:
      return aba_spec(m.n);
    case AlgorithmId::BoundedMaxReg:
    case AlgorithmId::UnboundedMaxReg:
      return maxreg_spec(m.n, m.maxreg_bound);
    case AlgorithmId::DCSnapshot:
    case AlgorithmId::SLSnapshot:
    case AlgorithmId::SLSnapshotComposed:
    case AlgorithmId::SLSnapshotSeq:
    case AlgorithmId::NoABASnapshot:
      return snapshot_spec(m.n);
    case AlgorithmId::LinCounter:
      return counter_spec(m.n);
    case AlgorithmId::Atomic:
      return *m.atomic_spec;
    case AlgorithmId::GenExecute:
      return m.gen_spec->base;
    case AlgorithmId::Livelock: {
      TypeSpec spec;
      spec.name = "livelock";
      spec.n = m.n;
      spec.initial = Val::nil();
      spec.delta = [](const Val& s, const Invocation& inv) -> std::optional<std::pair<Val, Val>> {
        if (inv.name == "spin") return std::make_pair(s, Val::unit());
        return std::nullopt;
      };
      return spec;
    }
  }
  throw std::logic_error("spec_for_machine");
}

}  // namespace slkit
