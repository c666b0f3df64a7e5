#include "slkit/native.hpp"

#include <atomic>
#include <cassert>
#include <chrono>
#include <random>
#include <set>
#include <thread>

namespace slkit {

History StressResult::history() const {
  struct Ev {
    int64_t tick;
    Event event;
  };
  std::vector<Ev> evs;
  evs.reserve(records.size() * 2);
  for (size_t i = 0; i < records.size(); ++i) {
    const StressRecord& r = records[i];
    Event inv;
    inv.kind = Event::Kind::Inv;
    inv.obj = "O";
    inv.op_id = static_cast<int64_t>(i) + 1;
    inv.process = r.process;
    inv.invocation = r.invocation;
    Event rsp;
    rsp.kind = Event::Kind::Rsp;
    rsp.obj = "O";
    rsp.op_id = inv.op_id;
    rsp.process = r.process;
    rsp.response = r.response;
    evs.push_back({r.invoke_tick, inv});
    evs.push_back({r.response_tick, rsp});
  }
  std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) { return a.tick < b.tick; });
  History h;
  h.n = threads;
  for (Ev& e : evs) h.events.push_back(std::move(e.event));
  return h;
}

namespace {

// Packed register contents: value(32) | pid(8) | seq(16) | value-nil flag.
// pid 0 encodes "never written".
constexpr uint64_t kValNil = 1ull << 56;

uint64_t pack3(uint32_t value, uint32_t pid, uint32_t seq, bool nil) {
  return static_cast<uint64_t>(value) | (static_cast<uint64_t>(pid & 0xff) << 32) |
         (static_cast<uint64_t>(seq & 0xffff) << 40) | (nil ? kValNil : 0);
}
uint32_t triple_value(uint64_t w) { return static_cast<uint32_t>(w & 0xffffffffu); }
uint32_t triple_pid(uint64_t w) { return static_cast<uint32_t>((w >> 32) & 0xff); }
uint32_t triple_seq(uint64_t w) { return static_cast<uint32_t>((w >> 40) & 0xffff); }
bool triple_nil(uint64_t w) { return (w & kValNil) != 0; }

uint64_t pack_ann(uint32_t pid, uint32_t seq) {
  return static_cast<uint64_t>(pid) | (static_cast<uint64_t>(seq) << 8);
}

// The register-only ABA-detecting register, one atomic word per location.
class NativeAba {
 public:
  explicit NativeAba(int n) : n_(n), x_(pack3(0, 0, 0, true)), a_(static_cast<size_t>(n)) {
    for (auto& w : a_) w.store(pack_ann(0, 0), std::memory_order_seq_cst);
  }

  struct Local {
    std::vector<uint32_t> used_q;  // n+1 recent sequence numbers (0xffffffff = none)
    std::set<std::pair<uint32_t, uint32_t>> na;
    int c = 0;
  };

  Local make_local() const {
    Local l;
    l.used_q.assign(static_cast<size_t>(n_ + 1), 0xffffffffu);
    return l;
  }

  // Two shared-memory operations: one announce read, one write of X.
  int64_t dwrite(int p, uint32_t value, bool value_nil, Local& l) {
    uint64_t ann = a_[static_cast<size_t>(l.c)].load(std::memory_order_seq_cst);
    uint32_t r = ann & 0xff, sr = static_cast<uint32_t>(ann >> 8);
    for (auto it = l.na.begin(); it != l.na.end();) {
      if (it->first == static_cast<uint32_t>(l.c))
        it = l.na.erase(it);
      else
        ++it;
    }
    if (r == static_cast<uint32_t>(p)) l.na.insert({static_cast<uint32_t>(l.c), sr});
    l.c = (l.c + 1) % n_;
    uint32_t s = 0;
    for (;; ++s) {
      bool blocked = false;
      for (const auto& pr : l.na)
        if (pr.second == s) blocked = true;
      for (uint32_t q : l.used_q)
        if (q == s) blocked = true;
      if (!blocked) break;
    }
    assert(s <= 2u * static_cast<uint32_t>(n_) + 1u);
    l.used_q.push_back(s);
    l.used_q.erase(l.used_q.begin());
    x_.store(pack3(value, static_cast<uint32_t>(p), s, value_nil), std::memory_order_seq_cst);
    return 2;
  }

  // The stretched read loop; returns (value, nil, changed) plus step count.
  struct ReadResult {
    uint32_t value = 0;
    bool value_nil = true;
    bool changed = false;
    int64_t steps = 0;
  };

  ReadResult dread(int p) {
    ReadResult out;
    bool changed = false;
    for (;;) {
      uint64_t first = x_.load(std::memory_order_seq_cst);
      uint64_t ann = a_[static_cast<size_t>(p - 1)].load(std::memory_order_seq_cst);
      a_[static_cast<size_t>(p - 1)].store(pack_ann(triple_pid(first), triple_seq(first)),
                                           std::memory_order_seq_cst);
      uint64_t second = x_.load(std::memory_order_seq_cst);
      out.steps += 4;
      bool quiet = (ann & 0xff) == triple_pid(first) &&
                   static_cast<uint32_t>(ann >> 8) == triple_seq(first) && first == second;
      if (quiet) {
        out.value = triple_value(second);
        out.value_nil = triple_nil(second);
        out.changed = changed;
        return out;
      }
      changed = true;
    }
  }

 private:
  int n_;
  std::atomic<uint64_t> x_;
  std::vector<std::atomic<uint64_t>> a_;
};

// Double-collect snapshot over one atomic word per component:
// value(8) | seq(48) | nil flag(bit 63).
class NativeDcSnapshot {
 public:
  explicit NativeDcSnapshot(int n) : n_(n), comp_(static_cast<size_t>(n)) {
    for (auto& c : comp_) c.store(1ull << 63, std::memory_order_seq_cst);
  }

  void update(int p, uint8_t value, uint64_t seq) {
    comp_[static_cast<size_t>(p - 1)].store(
        static_cast<uint64_t>(value) | (seq << 8), std::memory_order_seq_cst);
  }

  // Collects until two consecutive collects agree; returns packed values
  // (8 bits per component, 0xff for unwritten).
  uint32_t scan(int64_t* steps) {
    std::vector<uint64_t> c1(static_cast<size_t>(n_)), c2(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i)
      c1[static_cast<size_t>(i)] = comp_[static_cast<size_t>(i)].load(std::memory_order_seq_cst);
    *steps += n_;
    for (;;) {
      for (int i = 0; i < n_; ++i)
        c2[static_cast<size_t>(i)] = comp_[static_cast<size_t>(i)].load(std::memory_order_seq_cst);
      *steps += n_;
      if (c1 == c2) break;
      c1 = c2;
    }
    uint32_t packed = 0;
    for (int i = 0; i < n_; ++i) {
      uint64_t w = c2[static_cast<size_t>(i)];
      uint8_t v = (w >> 63) ? 0xff : static_cast<uint8_t>(w & 0xff);
      packed |= static_cast<uint32_t>(v) << (8 * i);
    }
    return packed;
  }

 private:
  int n_;
  std::vector<std::atomic<uint64_t>> comp_;
};

Val unpack_vector(uint32_t packed, int n) {
  std::vector<Val> kids;
  for (int i = 0; i < n; ++i) {
    uint8_t v = static_cast<uint8_t>((packed >> (8 * i)) & 0xff);
    kids.push_back(v == 0xff ? Val::nil() : Val::integer(v));
  }
  return Val::tup(kids);
}

// The snapshot construction over the two native base objects: the packed
// component vector is the ABA register's value domain.
class NativeSnapshot {
 public:
  explicit NativeSnapshot(int n) : n_(n), s_(n), r_(n) {}

  struct PerThread {
    NativeAba::Local aba;
    uint64_t seq = 0;
  };
  PerThread make_local() const { return {r_.make_local(), 0}; }

  int64_t update(int p, uint8_t value, PerThread& l) {
    int64_t sub_ops = 0;
    s_.update(p, value, ++l.seq);
    sub_ops += 1;
    int64_t steps = 0;
    uint32_t view = s_.scan(&steps);
    sub_ops += 1;
    r_.dwrite(p, view, false, l.aba);
    sub_ops += 1;
    return sub_ops;
  }

  uint32_t scan(int p, PerThread& l) {
    for (;;) {
      NativeAba::ReadResult first = r_.dread(p);
      int64_t steps = 0;
      uint32_t view = s_.scan(&steps);
      NativeAba::ReadResult second = r_.dread(p);
      bool eq = !first.value_nil && !second.value_nil && first.value == view &&
                second.value == view;
      if (first.value_nil && second.value_nil && view == empty_view()) eq = true;
      if (eq && !second.changed) return view;
      if (!eq) r_.dwrite(p, view, false, l.aba);
    }
  }

  uint32_t empty_view() const {
    uint32_t packed = 0;
    for (int i = 0; i < n_; ++i) packed |= 0xffu << (8 * i);
    return packed;
  }

  const NativeAba& aba() const { return r_; }

 private:
  int n_;
  NativeDcSnapshot s_;
  NativeAba r_;
};

}  // namespace

StressResult stress_slaba(int threads, int ops_per_thread, uint64_t seed, double write_ratio) {
  StressResult out;
  out.threads = threads;
  NativeAba reg(threads);
  std::atomic<int64_t> ticker{0};
  std::vector<std::vector<StressRecord>> per_thread(static_cast<size_t>(threads));
  std::atomic<int64_t> max_write_steps{0};
  auto worker = [&](int p) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(p));
    NativeAba::Local local = reg.make_local();
    auto& records = per_thread[static_cast<size_t>(p - 1)];
    records.reserve(static_cast<size_t>(ops_per_thread));
    for (int i = 0; i < ops_per_thread; ++i) {
      bool write = std::uniform_real_distribution<double>(0, 1)(rng) < write_ratio;
      StressRecord rec;
      rec.process = p;
      if (write) {
        uint32_t value = static_cast<uint32_t>(rng() % 100000);
        rec.invocation = {"DWrite", {Val::integer(value)}, p};
        rec.invoke_tick = ticker.fetch_add(1);
        int64_t steps = reg.dwrite(p, value, false, local);
        rec.response_tick = ticker.fetch_add(1);
        rec.response = Val::unit();
        int64_t seen = max_write_steps.load();
        while (steps > seen && !max_write_steps.compare_exchange_weak(seen, steps)) {
        }
      } else {
        rec.invocation = {"DRead", {}, p};
        rec.invoke_tick = ticker.fetch_add(1);
        NativeAba::ReadResult r = reg.dread(p);
        rec.response_tick = ticker.fetch_add(1);
        rec.response =
            Val::pair(r.value_nil ? Val::nil() : Val::integer(r.value), Val::boolean(r.changed));
      }
      records.push_back(std::move(rec));
    }
  };
  std::vector<std::thread> pool;
  for (int p = 1; p <= threads; ++p) pool.emplace_back(worker, p);
  for (auto& th : pool) th.join();
  for (auto& records : per_thread)
    for (auto& r : records) out.records.push_back(std::move(r));
  out.max_dwrite_shared_steps = max_write_steps.load();
  return out;
}

StressResult stress_snapshot(int threads, int ops_per_thread, uint64_t seed, double update_ratio) {
  StressResult out;
  out.threads = threads;
  NativeSnapshot snap(threads);
  std::atomic<int64_t> ticker{0};
  std::vector<std::vector<StressRecord>> per_thread(static_cast<size_t>(threads));
  std::atomic<int64_t> max_update_ops{0};
  auto worker = [&](int p) {
    std::mt19937_64 rng(seed * 0xd1342543de82ef95ull + static_cast<uint64_t>(p));
    NativeSnapshot::PerThread local = snap.make_local();
    auto& records = per_thread[static_cast<size_t>(p - 1)];
    records.reserve(static_cast<size_t>(ops_per_thread));
    for (int i = 0; i < ops_per_thread; ++i) {
      bool update = std::uniform_real_distribution<double>(0, 1)(rng) < update_ratio;
      StressRecord rec;
      rec.process = p;
      if (update) {
        uint8_t value = static_cast<uint8_t>(rng() % 200);
        rec.invocation = {"update", {Val::integer(value)}, p};
        rec.invoke_tick = ticker.fetch_add(1);
        int64_t sub = snap.update(p, value, local);
        rec.response_tick = ticker.fetch_add(1);
        rec.response = Val::unit();
        int64_t seen = max_update_ops.load();
        while (sub > seen && !max_update_ops.compare_exchange_weak(seen, sub)) {
        }
      } else {
        rec.invocation = {"scan", {}, p};
        rec.invoke_tick = ticker.fetch_add(1);
        uint32_t view = snap.scan(p, local);
        rec.response_tick = ticker.fetch_add(1);
        rec.response = unpack_vector(view, threads);
      }
      records.push_back(std::move(rec));
    }
  };
  std::vector<std::thread> pool;
  for (int p = 1; p <= threads; ++p) pool.emplace_back(worker, p);
  for (auto& th : pool) th.join();
  for (auto& records : per_thread)
    for (auto& r : records) out.records.push_back(std::move(r));
  out.max_update_s_ops = max_update_ops.load();
  return out;
}

namespace {

ThroughputReport throughput_run(int threads, int duration_ms, uint64_t seed, bool snapshot_mode) {
  ThroughputReport rep;
  std::atomic<bool> stop{false};
  std::atomic<int64_t> completed{0};
  std::atomic<int64_t> max_write_steps{0};
  NativeAba reg(threads);
  NativeSnapshot snap(threads);
  std::vector<std::map<std::string, int64_t>> per_thread(static_cast<size_t>(threads));
  auto worker = [&](int p) {
    std::mt19937_64 rng(seed + static_cast<uint64_t>(p) * 7919);
    NativeAba::Local aba_local = reg.make_local();
    NativeSnapshot::PerThread snap_local = snap.make_local();
    auto& counts = per_thread[static_cast<size_t>(p - 1)];
    while (!stop.load(std::memory_order_relaxed)) {
      bool write = (rng() & 1) != 0;
      if (snapshot_mode) {
        if (write) {
          snap.update(p, static_cast<uint8_t>(rng() % 200), snap_local);
          counts["update"]++;
        } else {
          snap.scan(p, snap_local);
          counts["scan"]++;
        }
      } else {
        if (write) {
          int64_t steps = reg.dwrite(p, static_cast<uint32_t>(rng() % 100000), false, aba_local);
          int64_t seen = max_write_steps.load();
          while (steps > seen && !max_write_steps.compare_exchange_weak(seen, steps)) {
          }
          counts["DWrite"]++;
        } else {
          reg.dread(p);
          counts["DRead"]++;
        }
      }
      completed.fetch_add(1, std::memory_order_relaxed);
    }
  };
  std::vector<std::thread> pool;
  auto t0 = std::chrono::steady_clock::now();
  for (int p = 1; p <= threads; ++p) pool.emplace_back(worker, p);
  // watchdog: the global op counter must keep increasing every interval
  int64_t last = -1;
  int intervals = std::max(1, duration_ms / 50);
  for (int i = 0; i < intervals; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    int64_t now = completed.load();
    if (now <= last) rep.watchdog_ok = false;
    last = now;
  }
  stop.store(true);
  for (auto& th : pool) th.join();
  auto t1 = std::chrono::steady_clock::now();
  rep.seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.ops = completed.load();
  rep.ops_per_sec = rep.seconds > 0 ? static_cast<double>(rep.ops) / rep.seconds : 0;
  rep.max_dwrite_shared_steps = max_write_steps.load();
  for (const auto& counts : per_thread)
    for (const auto& [k, v] : counts) rep.per_class[k] += v;
  return rep;
}

}  // namespace

ThroughputReport throughput_slaba(int threads, int duration_ms, uint64_t seed) {
  return throughput_run(threads, duration_ms, seed, false);
}
ThroughputReport throughput_snapshot(int threads, int duration_ms, uint64_t seed) {
  return throughput_run(threads, duration_ms, seed, true);
}

}  // namespace slkit
