// Copyright 2026 The ptychotile Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include "ptychotile/fabric.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <thread>

#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

const char* to_string(PhaseTag tag) {
  switch (tag) {
    case PhaseTag::VFwd: return "VFWD";
    case PhaseTag::VBwd: return "VBWD";
    case PhaseTag::HFwd: return "HFWD";
    case PhaseTag::HBwd: return "HBWD";
    case PhaseTag::Halo: return "HALO";
    case PhaseTag::Snapshot: return "SNAPSHOT";
    case PhaseTag::Control: return "CONTROL";
  }
  return "?";
}

RegionMessage RegionMessage::carrying(WorkerId src, WorkerId dst,
                                      const RegionArray& data,
                                      const Rect& region, CombineMode mode,
                                      PhaseTag tag) {
  RegionMessage m;
  m.src = src;
  m.dst = dst;
  m.region = region;
  m.slices = data.slices();
  m.mode = mode;
  m.tag = tag;
  if (!region.empty()) {
    RegionArray part = data.extract(region);
    m.payload.assign(part.values().begin(), part.values().end());
  }
  return m;
}

RegionArray RegionMessage::as_array() const {
  RegionArray a(slices, region);
  std::copy(payload.begin(), payload.end(), a.values().begin());
  return a;
}

void fold(const RegionMessage& msg, RegionArray& buffer) {
  if (msg.region.empty()) return;
  if (!buffer.region().contains(msg.region) || msg.slices != buffer.slices()) {
    throw ContractViolation("message region not inside the receiving buffer");
  }
  const RegionArray part = msg.as_array();
  if (msg.mode == CombineMode::Add) {
    buffer.add(part);
  } else {
    buffer.assign(part);
  }
}

std::int64_t TimingBreakdown::total_messages() const {
  std::int64_t n = 0;
  for (const auto& w : workers) n += w.messages_sent;
  return n;
}

double TimingBreakdown::max_compute() const {
  double m = 0.0;
  for (const auto& w : workers) m = std::max(m, w.compute);
  return m;
}

double TimingBreakdown::total_wait() const {
  double t = 0.0;
  for (const auto& w : workers) t += w.wait;
  return t;
}

double TimingBreakdown::total_comm() const {
  double t = 0.0;
  for (const auto& w : workers) t += w.comm;
  return t;
}

bool operator==(const TimingBreakdown& a, const TimingBreakdown& b) {
  if (a.workers.size() != b.workers.size()) return false;
  for (std::size_t i = 0; i < a.workers.size(); ++i) {
    const auto& x = a.workers[i];
    const auto& y = b.workers[i];
    if (!(x.id == y.id) || x.compute != y.compute || x.wait != y.wait ||
        x.comm != y.comm || x.messages_sent != y.messages_sent) {
      return false;
    }
  }
  return true;
}

MessageFabric::MessageFabric(MeshSpec mesh, FabricOptions options)
    : mesh_(mesh), options_(std::move(options)) {
  if (mesh_.rows <= 0 || mesh_.cols <= 0) throw ConfigError("empty mesh");
  agent_count_ = mesh_.workers() + (options_.with_monitor ? 1 : 0);
  agents_.resize(static_cast<std::size_t>(agent_count_));
  for (int r = 0; r < mesh_.rows; ++r) {
    for (int c = 0; c < mesh_.cols; ++c) {
      agents_[static_cast<std::size_t>(mesh_.index(r, c))].timing.id = {r, c};
    }
  }
  const auto pairs = static_cast<std::size_t>(agent_count_) * agent_count_;
  channels_.resize(pairs);
  next_sequence_.assign(pairs, 0);
}

int MessageFabric::agent_index(WorkerId id) const {
  if (id.is_monitor()) {
    if (!options_.with_monitor) throw ContractViolation("fabric has no monitor");
    return mesh_.workers();
  }
  if (id.mesh_r >= mesh_.rows || id.mesh_c < 0 || id.mesh_c >= mesh_.cols) {
    throw ContractViolation("worker id outside the mesh");
  }
  return mesh_.index(id.mesh_r, id.mesh_c);
}

std::deque<RegionMessage>& MessageFabric::channel(int src, int dst) {
  return channels_[static_cast<std::size_t>(src) * agent_count_ + dst];
}

bool MessageFabric::has_match(int self, PhaseTag tag, int src) {
  const auto& q = channel(src, self);
  return std::any_of(q.begin(), q.end(),
                     [&](const RegionMessage& m) { return m.tag == tag; });
}

bool MessageFabric::deadlocked() const {
  bool any_blocked = false;
  for (const auto& a : agents_) {
    if (a.state == State::Ready) return false;
    if (a.state == State::Blocked) any_blocked = true;
  }
  return any_blocked;
}

void MessageFabric::pass_baton(int self) {
  for (int i = 1; i <= agent_count_; ++i) {
    const int j = (self + i) % agent_count_;
    if (agents_[static_cast<std::size_t>(j)].state == State::Ready) {
      current_ = j;
      cv_.notify_all();
      return;
    }
  }
  if (deadlocked()) {
    deadlock_ = true;
    abort_ = true;
    if (!error_) {
      error_ = std::make_exception_ptr(
          DeadlockDetected("no runnable agent while others wait"));
    }
    cv_.notify_all();
  }
}

void MessageFabric::wait_for_turn(std::unique_lock<std::mutex>& lock,
                                  int self) {
  cv_.wait(lock, [&] {
    return abort_ ||
           (agents_[static_cast<std::size_t>(self)].state == State::Ready &&
            (!options_.deterministic || current_ == self));
  });
  if (abort_) throw Aborted{};
}

void MessageFabric::record(int agent, EventKind kind, PhaseTag tag, int peer,
                           double time) {
  if (!options_.record_trace) return;
  trace_.push_back({next_event_++, agent, kind, tag, peer, time});
}

void MessageFabric::agent_main(int self, const std::function<void()>& body) {
  try {
    {
      std::unique_lock lock(mu_);
      wait_for_turn(lock, self);
    }
    body();
  } catch (const Aborted&) {
  } catch (...) {
    std::lock_guard lock(mu_);
    if (!error_) error_ = std::current_exception();
    abort_ = true;
    cv_.notify_all();
  }
  std::lock_guard lock(mu_);
  agents_[static_cast<std::size_t>(self)].state = State::Done;
  if (!abort_) {
    if (options_.deterministic) {
      if (current_ == self) pass_baton(self);
    } else if (deadlocked()) {
      deadlock_ = true;
      abort_ = true;
      if (!error_) {
        error_ = std::make_exception_ptr(
            DeadlockDetected("no runnable agent while others wait"));
      }
    }
  }
  cv_.notify_all();
}

void MessageFabric::run(const std::function<void(WorkerId)>& worker,
                        const std::function<void()>& monitor) {
  if (options_.with_monitor && !monitor) {
    throw ConfigError("fabric configured with a monitor but none given");
  }
  {
    std::lock_guard lock(mu_);
    for (auto& a : agents_) a.state = State::Ready;
    current_ = 0;
    abort_ = false;
    deadlock_ = false;
    error_ = nullptr;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(agent_count_));
  for (int r = 0; r < mesh_.rows; ++r) {
    for (int c = 0; c < mesh_.cols; ++c) {
      const WorkerId id{r, c};
      threads.emplace_back([this, id, &worker] {
        agent_main(mesh_.index(id.mesh_r, id.mesh_c), [&] { worker(id); });
      });
    }
  }
  if (options_.with_monitor) {
    threads.emplace_back(
        [this, &monitor] { agent_main(mesh_.workers(), monitor); });
  }
  for (auto& t : threads) t.join();
  if (error_) std::rethrow_exception(error_);
}

void MessageFabric::send(RegionMessage msg) {
  if (msg.src == msg.dst) throw ContractViolation("self-send is forbidden");
  if (msg.payload.size() !=
      static_cast<std::size_t>(msg.region.area()) * msg.slices) {
    throw ContractViolation("payload does not match region x slices");
  }
  if (is_exchange(msg.tag) && options_.validate && !options_.validate(msg)) {
    std::ostringstream os;
    os << to_string(msg.tag) << " region " << msg.region
       << " violates the exchange contract";
    throw ContractViolation(os.str());
  }
  const auto t0 = Clock::now();
  const int s = agent_index(msg.src);
  const int d = agent_index(msg.dst);
  std::lock_guard lock(mu_);
  if (abort_) throw Aborted{};
  Agent& sender = agents_[static_cast<std::size_t>(s)];
  msg.sequence =
      next_sequence_[static_cast<std::size_t>(s) * agent_count_ + d]++;
  if (is_exchange(msg.tag)) {
    if (options_.timing == TimingMode::Simulated) {
      const double cost =
          options_.cost.per_message +
          options_.cost.per_voxel * static_cast<double>(msg.payload.size());
      sender.clock += cost;
      sender.timing.comm += cost;
    }
    ++sender.timing.messages_sent;
  }
  msg.timestamp = sender.clock;
  record(s, EventKind::Send, msg.tag, d, sender.clock);
  const PhaseTag tag = msg.tag;
  channel(s, d).push_back(std::move(msg));

  Agent& receiver = agents_[static_cast<std::size_t>(d)];
  if (receiver.state == State::Blocked && receiver.wait_src == s &&
      receiver.wait_tag == tag) {
    receiver.state = State::Ready;
    if (!options_.deterministic) cv_.notify_all();
  }
  if (options_.timing == TimingMode::WallClock && is_exchange(tag)) {
    sender.timing.comm += seconds_since(t0);
  }
}

RegionMessage MessageFabric::await_region(WorkerId self, PhaseTag tag,
                                          WorkerId src) {
  const int me = agent_index(self);
  const int s = agent_index(src);
  if (me == s) throw ContractViolation("cannot receive from self");
  const auto t0 = Clock::now();
  std::unique_lock lock(mu_);
  Agent& agent = agents_[static_cast<std::size_t>(me)];
  RegionMessage msg;
  while (true) {
    if (abort_) throw Aborted{};
    auto& q = channel(s, me);
    auto it = std::find_if(q.begin(), q.end(),
                           [&](const RegionMessage& m) { return m.tag == tag; });
    if (it != q.end()) {
      msg = std::move(*it);
      q.erase(it);
      break;
    }
    agent.state = State::Blocked;
    agent.wait_tag = tag;
    agent.wait_src = s;
    if (deadlocked()) {
      deadlock_ = true;
      abort_ = true;
      if (!error_) {
        std::ostringstream os;
        os << "agent " << me << " waits for " << to_string(tag) << " from "
           << s << " and no agent can run";
        error_ = std::make_exception_ptr(DeadlockDetected(os.str()));
      }
      cv_.notify_all();
      throw Aborted{};
    }
    if (options_.deterministic) pass_baton(me);
    wait_for_turn(lock, me);
  }
  agent.state = State::Ready;
  if (options_.timing == TimingMode::Simulated) {
    if (msg.timestamp > agent.clock) {
      if (!self.is_monitor()) agent.timing.wait += msg.timestamp - agent.clock;
      agent.clock = msg.timestamp;
    }
  } else if (!self.is_monitor()) {
    agent.timing.wait += seconds_since(t0);
  }
  record(me, EventKind::Receive, tag, s, agent.clock);
  return msg;
}

void MessageFabric::charge_compute(WorkerId self, double sim_units,
                                   double wall_seconds) {
  const int me = agent_index(self);
  std::lock_guard lock(mu_);
  Agent& a = agents_[static_cast<std::size_t>(me)];
  if (options_.timing == TimingMode::Simulated) {
    a.clock += sim_units;
    a.timing.compute += sim_units;
  } else {
    a.timing.compute += wall_seconds;
  }
}

double MessageFabric::clock(WorkerId self) const {
  const int me = agent_index(self);
  std::lock_guard lock(mu_);
  return agents_[static_cast<std::size_t>(me)].clock;
}

TimingBreakdown MessageFabric::timing() const {
  std::lock_guard lock(mu_);
  TimingBreakdown t;
  for (int i = 0; i < mesh_.workers(); ++i) {
    t.workers.push_back(agents_[static_cast<std::size_t>(i)].timing);
  }
  return t;
}

std::vector<TraceEvent> MessageFabric::trace() const {
  std::lock_guard lock(mu_);
  return trace_;
}

}  // namespace ptychotile
