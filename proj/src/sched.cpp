// SPDX-License-Identifier: Apache-2.0

#include "unet/sched.hpp"

#include <cassert>

namespace unet {

const char* msgkind_name(MsgKind k) {
  switch (k) {
    case MsgKind::Snd: return "snd";
    case MsgKind::Rcv: return "rcv";
    case MsgKind::Get: return "get";
    case MsgKind::Set: return "set";
    case MsgKind::Ack: return "ack";
  }
  return "?";
}

Scheduler::EndpointRec* Scheduler::find(EndpointId id) {
  if (id == kNoEndpoint || id > eps_.size()) return nullptr;
  EndpointRec& r = eps_[id - 1];
  return r.ep ? &r : nullptr;
}

const Scheduler::EndpointRec* Scheduler::find(EndpointId id) const {
  return const_cast<Scheduler*>(this)->find(id);
}

EndpointId Scheduler::spawn(Endpoint* ep, DropHandler on_drop) {
  assert(ep && ep->id_ == kNoEndpoint);
  eps_.push_back({ep, std::move(on_drop), {}});
  ep->id_ = static_cast<EndpointId>(eps_.size());
  ep->sched_ = this;
  return ep->id_;
}

Err Scheduler::despawn(EndpointId id) {
  EndpointRec* r = find(id);
  if (!r) return Err::NoSuchEndpoint;
  if (r->on_drop)
    for (const NetMsg& m : r->mailbox) r->on_drop(m);
  r->mailbox.clear();
  r->on_drop = nullptr;
  r->ep->id_ = kNoEndpoint;
  r->ep->sched_ = nullptr;
  r->ep = nullptr;
  return Err::None;
}

Err Scheduler::post(EndpointId to, const NetMsg& m) {
  EndpointRec* r = find(to);
  if (!r) return Err::NoSuchEndpoint;
  if (r->mailbox.size() >= kMailboxCapacity) return Err::QueueFull;
  r->mailbox.push_back(m);
  messages_posted_++;
  return Err::None;
}

void Scheduler::post_task(Task fn) { tasks_.push_back(std::move(fn)); }

uint64_t Scheduler::schedule_at(uint64_t deadline_ns, Task fn) {
  uint64_t id = ++timer_seq_;
  timers_.push({deadline_ns, id, std::move(fn)});
  pending_timers_.insert(id);
  return id;
}

uint64_t Scheduler::schedule_after(uint64_t delta_ns, Task fn) {
  return schedule_at(now_ns_ + delta_ns, std::move(fn));
}

bool Scheduler::cancel_timer(uint64_t id) {
  if (!pending_timers_.erase(id)) return false;
  // The heap entry is dropped lazily when it reaches the top.
  cancelled_.insert(id);
  return true;
}

bool Scheduler::step() { return step_until(UINT64_MAX); }

bool Scheduler::step_until(uint64_t t_ns) {
  for (EndpointRec& r : eps_) {
    if (!r.ep || r.mailbox.empty()) continue;
    NetMsg m = r.mailbox.front();
    r.mailbox.pop_front();
    EndpointId prev = current_;
    current_ = r.ep->id_;
    r.ep->on_msg(m);
    current_ = prev;
    messages_delivered_++;
    return true;
  }
  if (!tasks_.empty()) {
    Task fn = std::move(tasks_.front());
    tasks_.pop_front();
    fn();
    tasks_run_++;
    return true;
  }
  while (!timers_.empty()) {
    if (cancelled_.erase(timers_.top().seq)) {
      timers_.pop();
      continue;
    }
    if (timers_.top().deadline > t_ns) return false;
    // priority_queue::top is const; the heap is popped before running so
    // the callback may schedule freely.
    Timer t = std::move(const_cast<Timer&>(timers_.top()));
    timers_.pop();
    pending_timers_.erase(t.seq);
    if (t.deadline > now_ns_) now_ns_ = t.deadline;
    t.fn();
    timers_fired_++;
    return true;
  }
  return false;
}

void Scheduler::run() {
  while (step()) {
  }
}

void Scheduler::run_until(uint64_t t_ns) {
  while (step_until(t_ns)) {
  }
  if (now_ns_ < t_ns) now_ns_ = t_ns;
}

size_t Scheduler::mailbox_depth(EndpointId id) const {
  const EndpointRec* r = find(id);
  return r ? r->mailbox.size() : 0;
}

bool Scheduler::idle() const {
  if (!tasks_.empty()) return false;
  for (const EndpointRec& r : eps_)
    if (r.ep && !r.mailbox.empty()) return false;
  // Cancelled timers still sitting in the heap do not count as work.
  return pending_timers_.empty();
}

}  // namespace unet
