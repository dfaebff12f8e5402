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
#pragma once

/// \file fabric.hpp
/// Point-to-point message passing between the agents of a worker mesh.
///
/// Every agent runs on its own thread and owns its data exclusively; the
/// only cross-agent data flow is through immutable RegionMessage payloads.
/// Sends never block. Messages between a fixed (src, dst) pair are
/// delivered in send order, and a receive names the phase tag and source it
/// expects, so the order in which payloads are folded into a buffer is
/// fixed by the protocol rather than by thread timing.
///
/// In deterministic mode a baton is passed between agents: exactly one
/// agent runs at a time and control moves, in increasing agent order, only
/// when the running agent blocks or finishes. In free-running mode all
/// agents run concurrently.
///
/// Time is accounted per agent in simulated units (a Lamport-style clock:
/// compute and sends advance the local clock, a receive advances it to the
/// message timestamp and books the difference as waiting) or in wall-clock
/// seconds.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "ptychotile/array.hpp"
#include "ptychotile/geometry.hpp"

namespace ptychotile {

struct WorkerId {
  int mesh_r = 0;
  int mesh_c = 0;

  /// Address of the instrumentation agent that collects snapshots.
  static constexpr WorkerId monitor() { return {-1, -1}; }
  bool is_monitor() const { return mesh_r < 0; }
  friend bool operator==(const WorkerId&, const WorkerId&) = default;
};

enum class CombineMode { Add, Replace };

enum class PhaseTag { VFwd, VBwd, HFwd, HBwd, Halo, Snapshot, Control };

const char* to_string(PhaseTag tag);

/// Tags whose traffic is part of the algorithm and is charged as
/// communication. Snapshot and Control traffic is instrumentation.
inline bool is_exchange(PhaseTag tag) {
  return tag != PhaseTag::Snapshot && tag != PhaseTag::Control;
}

struct RegionMessage {
  WorkerId src;
  WorkerId dst;
  Rect region;
  int slices = 0;
  std::vector<double> payload;
  CombineMode mode = CombineMode::Add;
  PhaseTag tag = PhaseTag::VFwd;
  std::int64_t sequence = 0;  // assigned by the fabric, per (src, dst)
  double timestamp = 0.0;     // sender clock at send, assigned by the fabric

  /// Message carrying a copy of `data` restricted to `region`.
  static RegionMessage carrying(WorkerId src, WorkerId dst,
                                const RegionArray& data, const Rect& region,
                                CombineMode mode, PhaseTag tag);
  RegionArray as_array() const;
};

/// ADD folds the payload into `buffer`, REPLACE overwrites the region.
void fold(const RegionMessage& msg, RegionArray& buffer);

enum class TimingMode { Simulated, WallClock };

struct CostModel {
  double per_probe = 1.0;    // one probe gradient
  double per_message = 0.5;  // fixed cost of one send
  double per_voxel = 1e-4;   // payload cost per transferred value
};

struct WorkerTiming {
  WorkerId id;
  double compute = 0.0;
  double wait = 0.0;
  double comm = 0.0;
  std::int64_t messages_sent = 0;
};

struct TimingBreakdown {
  std::vector<WorkerTiming> workers;

  std::int64_t total_messages() const;
  double max_compute() const;
  double total_wait() const;
  double total_comm() const;
  friend bool operator==(const TimingBreakdown& a, const TimingBreakdown& b);
};

enum class EventKind { Send, Receive };

struct TraceEvent {
  std::int64_t seq = 0;
  int agent = 0;  // mesh index; workers() for the monitor
  EventKind kind = EventKind::Send;
  PhaseTag tag = PhaseTag::VFwd;
  int peer = 0;
  double time = 0.0;  // sender / receiver clock after the event
};

struct FabricOptions {
  bool deterministic = true;
  TimingMode timing = TimingMode::Simulated;
  CostModel cost;
  bool with_monitor = false;
  bool record_trace = true;
  /// Extra contract check on every exchange message; return false to reject.
  std::function<bool(const RegionMessage&)> validate;
};

class MessageFabric {
 public:
  MessageFabric(MeshSpec mesh, FabricOptions options);
  MessageFabric(const MessageFabric&) = delete;
  MessageFabric& operator=(const MessageFabric&) = delete;

  /// Runs `worker` once per mesh cell (and `monitor`, if enabled) to
  /// completion. Rethrows the first exception raised by any agent;
  /// DeadlockDetected if every live agent is blocked with nothing to read.
  void run(const std::function<void(WorkerId)>& worker,
           const std::function<void()>& monitor = {});

  /// Enqueues `msg` and returns. A self-send or a malformed payload throws
  /// ContractViolation.
  void send(RegionMessage msg);

  /// Blocks until a message from `src` with `tag` is available for `self`
  /// and removes it from the channel.
  RegionMessage await_region(WorkerId self, PhaseTag tag, WorkerId src);

  /// Books `sim_units` of compute (simulated mode) or `wall_seconds`
  /// (wall-clock mode) for `self`.
  void charge_compute(WorkerId self, double sim_units, double wall_seconds);

  /// Current clock of an agent.
  double clock(WorkerId self) const;

  TimingBreakdown timing() const;
  std::vector<TraceEvent> trace() const;
  const MeshSpec& mesh() const { return mesh_; }

 private:
  enum class State { Ready, Blocked, Done };
  struct Agent {
    State state = State::Ready;
    PhaseTag wait_tag = PhaseTag::VFwd;
    int wait_src = -1;
    double clock = 0.0;
    WorkerTiming timing;
  };
  struct Aborted {};

  int agent_index(WorkerId id) const;
  std::deque<RegionMessage>& channel(int src, int dst);
  bool has_match(int self, PhaseTag tag, int src);
  bool deadlocked() const;
  void pass_baton(int self);
  void wait_for_turn(std::unique_lock<std::mutex>& lock, int self);
  void agent_main(int self, const std::function<void()>& body);
  void record(int agent, EventKind kind, PhaseTag tag, int peer, double time);

  MeshSpec mesh_;
  FabricOptions options_;
  int agent_count_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Agent> agents_;
  std::vector<std::deque<RegionMessage>> channels_;  // src * n + dst
  std::vector<std::int64_t> next_sequence_;
  std::vector<TraceEvent> trace_;
  std::int64_t next_event_ = 0;
  int current_ = 0;  // baton holder in deterministic mode
  bool abort_ = false;
  bool deadlock_ = false;
  std::exception_ptr error_;
};

}  // namespace ptychotile
