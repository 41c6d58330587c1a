// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "unet/netmsg.hpp"
#include "unet/result.hpp"
#include "unet/types.hpp"

namespace unet {

class Scheduler;

// A protocol module, interface driver or socket. Endpoints own no thread;
// the scheduler calls on_msg for each delivered message, one at a time.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void on_msg(const NetMsg& m) = 0;

  EndpointId id() const { return id_; }
  Scheduler* sched() const { return sched_; }

 private:
  friend class Scheduler;
  EndpointId id_ = kNoEndpoint;
  Scheduler* sched_ = nullptr;
};

// Cooperative single-threaded run loop with a virtual clock. Work is
// processed in a fixed priority order so runs are reproducible:
//
//   1. endpoint messages, lowest endpoint id first, FIFO per endpoint;
//   2. plain tasks, FIFO;
//   3. timers, earliest deadline first (insertion order breaks ties).
//
// Only firing a timer advances the clock. Messages and tasks take zero
// virtual time, which models the assumption that protocol processing is
// fast compared to the radio medium.
class Scheduler {
 public:
  using Task = std::function<void()>;
  // Called for messages flushed at despawn time so owned packet references
  // can be returned to the buffer they came from.
  using DropHandler = std::function<void(const NetMsg&)>;

  Scheduler() = default;
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  // Registers `ep` and assigns its id. The caller keeps ownership of the
  // object, which must outlive the registration. `on_drop` runs for each
  // message still queued when the endpoint is despawned; it is per
  // endpoint because one scheduler may serve several stacks, each with its
  // own packet buffer.
  EndpointId spawn(Endpoint* ep, DropHandler on_drop = nullptr);
  // Unregisters and flushes undelivered messages through the drop handler.
  Err despawn(EndpointId id);

  // Queues `m` for `to`. Fails with QueueFull when the mailbox is at
  // capacity; the sender then still owns whatever the message carries.
  Err post(EndpointId to, const NetMsg& m);

  // Queues a plain task.
  void post_task(Task fn);

  // One-shot timers. Returns an id usable with cancel_timer until fired.
  uint64_t schedule_at(uint64_t deadline_ns, Task fn);
  uint64_t schedule_after(uint64_t delta_ns, Task fn);
  bool cancel_timer(uint64_t id);

  // Runs one unit of work. Returns false when there is nothing left to do.
  bool step();
  // Like step(), but leaves timers past `t_ns` untouched and returns false
  // when only those remain. The clock is not advanced on a false return.
  bool step_until(uint64_t t_ns);
  // Steps until idle.
  void run();
  // Runs all messages and tasks plus every timer due at or before `t_ns`.
  // Later timers stay pending. On return the clock sits at max(now, t_ns).
  void run_until(uint64_t t_ns);

  uint64_t now() const { return now_ns_; }
  // Endpoint whose on_msg is currently running, kNoEndpoint outside one.
  EndpointId current() const { return current_; }

  size_t mailbox_depth(EndpointId id) const;
  bool idle() const;

  uint64_t messages_delivered() const { return messages_delivered_; }
  uint64_t messages_posted() const { return messages_posted_; }
  uint64_t tasks_run() const { return tasks_run_; }
  uint64_t timers_fired() const { return timers_fired_; }

 private:
  struct EndpointRec {
    Endpoint* ep = nullptr;
    DropHandler on_drop;
    std::deque<NetMsg> mailbox;
  };
  struct Timer {
    uint64_t deadline;
    uint64_t seq;
    Task fn;
  };
  struct TimerOrder {
    bool operator()(const Timer& a, const Timer& b) const {
      return a.deadline != b.deadline ? a.deadline > b.deadline : a.seq > b.seq;
    }
  };

  EndpointRec* find(EndpointId id);
  const EndpointRec* find(EndpointId id) const;

  std::vector<EndpointRec> eps_;  // index = id - 1, despawned slots stay null
  std::deque<Task> tasks_;
  std::priority_queue<Timer, std::vector<Timer>, TimerOrder> timers_;
  std::unordered_set<uint64_t> pending_timers_;
  std::unordered_set<uint64_t> cancelled_;
  uint64_t now_ns_ = 0;
  uint64_t timer_seq_ = 0;
  EndpointId current_ = kNoEndpoint;
  uint64_t messages_delivered_ = 0;
  uint64_t messages_posted_ = 0;
  uint64_t tasks_run_ = 0;
  uint64_t timers_fired_ = 0;
};

}  // namespace unet
