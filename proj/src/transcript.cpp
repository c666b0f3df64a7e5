#include "slkit/transcript.hpp"

#include <algorithm>
#include <stdexcept>

namespace slkit {

std::string Event::str() const {
  std::string out = kind == Kind::Inv ? "inv" : "rsp";
  out += " obj=" + obj;
  out += " op=" + std::to_string(op_id);
  out += " p=" + std::to_string(process);
  if (kind == Kind::Inv) {
    out += " " + invocation.name + "(";
    for (size_t i = 0; i < invocation.args.size(); ++i) {
      if (i) out += ",";
      out += invocation.args[i].str();
    }
    out += ")";
  } else {
    out += " val=" + response.str();
  }
  if (!line.empty()) out += " line=" + line;
  return out;
}

std::string Transcript::to_text() const {
  std::string out;
  for (size_t i = 0; i < events.size(); ++i) {
    out += "t=" + std::to_string(time_of_index(i)) + " " + events[i].str() + "\n";
  }
  return out;
}

bool well_formed(const Transcript& t) {
  // One open-invocation stack per process.
  std::map<int, std::vector<int64_t>> open;
  for (const Event& e : t.events) {
    auto& stack = open[e.process];
    if (e.kind == Event::Kind::Inv) {
      stack.push_back(e.op_id);
    } else {
      if (stack.empty() || stack.back() != e.op_id) return false;
      stack.pop_back();
    }
  }
  return true;
}

Transcript project_object(const Transcript& t, const std::string& obj) {
  Transcript out;
  out.n = t.n;
  for (const Event& e : t.events)
    if (e.obj == obj) out.events.push_back(e);
  return out;
}

Transcript project_process(const Transcript& t, int process) {
  Transcript out;
  out.n = t.n;
  for (const Event& e : t.events)
    if (e.process == process) out.events.push_back(e);
  return out;
}

History interpreted_history(const Transcript& t, const std::string& top_obj) {
  History out;
  out.n = t.n;
  for (const Event& e : t.events)
    if (e.obj == top_obj) out.events.push_back(e);
  return out;
}

std::vector<OpRecord> collect_ops(const Transcript& t, const std::string& obj) {
  std::vector<OpRecord> ops;
  std::map<int64_t, size_t> index;
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (!obj.empty() && e.obj != obj) continue;
    if (e.kind == Event::Kind::Inv) {
      OpRecord r;
      r.op_id = e.op_id;
      r.obj = e.obj;
      r.process = e.process;
      r.invocation = e.invocation;
      r.inv_time = Transcript::time_of_index(i);
      index[e.op_id] = ops.size();
      ops.push_back(r);
    } else {
      auto it = index.find(e.op_id);
      if (it == index.end()) continue;
      ops[it->second].rsp_time = Transcript::time_of_index(i);
      ops[it->second].response = e.response;
    }
  }
  return ops;
}

bool happens_before(const Transcript& t, int64_t op_a, int64_t op_b) {
  int64_t rsp_a = Transcript::kInfinity;
  int64_t inv_b = -1;
  bool saw_a = false, saw_b = false;
  for (size_t i = 0; i < t.events.size(); ++i) {
    const Event& e = t.events[i];
    if (e.op_id == op_a) {
      saw_a = true;
      if (e.kind == Event::Kind::Rsp) rsp_a = Transcript::time_of_index(i);
    }
    if (e.op_id == op_b) {
      saw_b = true;
      if (e.kind == Event::Kind::Inv) inv_b = Transcript::time_of_index(i);
    }
  }
  if (!saw_a || !saw_b) throw std::invalid_argument("happens_before: unknown op id");
  return inv_b >= 0 && rsp_a < inv_b;
}

namespace {

void complete_rec(const History& h,
                  const std::vector<OpRecord>& pending, size_t idx,
                  const std::function<std::vector<Val>(const OpRecord&)>& candidates,
                  History& acc, const std::function<void(const History&)>& visit) {
  if (idx == pending.size()) {
    visit(acc);
    return;
  }
  const OpRecord& op = pending[idx];
  // Drop the pending operation: erase its invocation event.
  {
    History dropped;
    dropped.n = acc.n;
    for (const Event& e : acc.events)
      if (e.op_id != op.op_id) dropped.events.push_back(e);
    complete_rec(h, pending, idx + 1, candidates, dropped, visit);
  }
  // Or complete it with each candidate response.
  for (const Val& rsp : candidates(op)) {
    History done = acc;
    Event e;
    e.kind = Event::Kind::Rsp;
    e.obj = op.obj;
    e.op_id = op.op_id;
    e.process = op.process;
    e.response = rsp;
    done.events.push_back(e);
    complete_rec(h, pending, idx + 1, candidates, done, visit);
  }
}

}  // namespace

void for_each_completion(const History& h,
                         const std::function<std::vector<Val>(const OpRecord&)>& candidates,
                         const std::function<void(const History&)>& visit) {
  std::vector<OpRecord> pending;
  for (const OpRecord& op : collect_ops(h, ""))
    if (!op.complete()) pending.push_back(op);
  History acc = h;
  complete_rec(h, pending, 0, candidates, acc, visit);
}

std::vector<History> completions(const History& h,
                                 const std::function<std::vector<Val>(const OpRecord&)>& candidates,
                                 size_t cap) {
  std::vector<History> out;
  for_each_completion(h, candidates, [&out, cap](const History& c) {
    if (out.size() < cap) out.push_back(c);
  });
  return out;
}

}  // namespace slkit
