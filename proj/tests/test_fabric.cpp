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
#include <gtest/gtest.h>

#include <atomic>

#include "ptychotile/error.hpp"
#include "ptychotile/fabric.hpp"

namespace ptychotile {
namespace {

RegionMessage msg(WorkerId src, WorkerId dst, double value, PhaseTag tag,
                  CombineMode mode = CombineMode::Add) {
  RegionArray a(1, {0, 0, 2, 5}, value);
  return RegionMessage::carrying(src, dst, a, a.region(), mode, tag);
}

class FabricModes : public ::testing::TestWithParam<bool> {};

TEST_P(FabricModes, FifoPerPair) {
  MessageFabric f({1, 2}, {.deterministic = GetParam()});
  std::vector<double> got;
  std::vector<std::int64_t> seqs;
  f.run([&](WorkerId me) {
    if (me.mesh_c == 0) {
      for (int i = 0; i < 5; ++i) f.send(msg(me, {0, 1}, i, PhaseTag::VFwd));
    } else {
      for (int i = 0; i < 5; ++i) {
        const RegionMessage m = f.await_region(me, PhaseTag::VFwd, {0, 0});
        got.push_back(m.payload.front());
        seqs.push_back(m.sequence);
      }
    }
  });
  EXPECT_EQ(got, (std::vector<double>{0, 1, 2, 3, 4}));
  for (std::size_t i = 1; i < seqs.size(); ++i) EXPECT_GT(seqs[i], seqs[i - 1]);
}

TEST_P(FabricModes, ReceiveMatchesTag) {
  MessageFabric f({1, 2}, {.deterministic = GetParam()});
  double first = 0.0;
  double second = 0.0;
  f.run([&](WorkerId me) {
    if (me.mesh_c == 0) {
      f.send(msg(me, {0, 1}, 1.0, PhaseTag::VFwd));
      f.send(msg(me, {0, 1}, 2.0, PhaseTag::HFwd));
    } else {
      first = f.await_region(me, PhaseTag::HFwd, {0, 0}).payload.front();
      second = f.await_region(me, PhaseTag::VFwd, {0, 0}).payload.front();
    }
  });
  EXPECT_EQ(first, 2.0);
  EXPECT_EQ(second, 1.0);
}

TEST_P(FabricModes, WorkerExceptionIsRethrown) {
  MessageFabric f({2, 2}, {.deterministic = GetParam()});
  EXPECT_THROW(f.run([&](WorkerId me) {
                 if (me.mesh_r == 1 && me.mesh_c == 1) throw ShapeMismatch("boom");
                 // the others wait on something that never comes
                 f.await_region(me, PhaseTag::VFwd, {1, 1});
               }),
               ShapeMismatch);
}

INSTANTIATE_TEST_SUITE_P(Modes, FabricModes, ::testing::Values(true, false));

TEST(Fabric, SelfSendIsRejected) {
  MessageFabric f({1, 2}, {});
  EXPECT_THROW(f.run([&](WorkerId me) {
                 if (me.mesh_c == 0) f.send(msg(me, me, 1.0, PhaseTag::VFwd));
               }),
               ContractViolation);
}

TEST(Fabric, MalformedPayloadIsRejected) {
  MessageFabric f({1, 2}, {});
  EXPECT_THROW(f.run([&](WorkerId me) {
                 if (me.mesh_c != 0) return;
                 RegionMessage m = msg(me, {0, 1}, 1.0, PhaseTag::VFwd);
                 m.payload.pop_back();
                 f.send(m);
               }),
               ContractViolation);
}

TEST(Fabric, ValidateHookRejectsExchangeTraffic) {
  FabricOptions o;
  o.validate = [](const RegionMessage& m) { return m.region.width() < 3; };
  MessageFabric f({1, 2}, o);
  EXPECT_THROW(f.run([&](WorkerId me) {
                 if (me.mesh_c == 0) f.send(msg(me, {0, 1}, 1.0, PhaseTag::HFwd));
               }),
               ContractViolation);
}

TEST(Fabric, DeadlockDetected) {
  MessageFabric f({1, 2}, {});
  EXPECT_THROW(f.run([&](WorkerId me) {
                 f.await_region(me, PhaseTag::VBwd, {0, 1 - me.mesh_c});
               }),
               DeadlockDetected);
}

TEST(Fabric, DeadlockAfterPartnerFinishes) {
  MessageFabric f({1, 2}, {});
  EXPECT_THROW(f.run([&](WorkerId me) {
                 if (me.mesh_c == 1) f.await_region(me, PhaseTag::VBwd, {0, 0});
               }),
               DeadlockDetected);
}

TEST(Fold, ReplaceAfterAddOverwrites) {
  RegionArray buf(1, {0, 0, 4, 6}, 1.0);
  fold(msg({0, 0}, {0, 1}, 2.0, PhaseTag::VFwd, CombineMode::Add), buf);
  EXPECT_EQ(buf.at(0, 1, 1), 3.0);
  fold(msg({0, 0}, {0, 1}, 7.0, PhaseTag::VBwd, CombineMode::Replace), buf);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) {
      const bool in = y < 2 && x < 5;
      EXPECT_EQ(buf.at(0, y, x), in ? 7.0 : 1.0);
    }
  }
}

TEST(Fold, RegionOutsideBufferIsRejected) {
  RegionArray buf(1, {1, 1, 4, 6});
  EXPECT_THROW(fold(msg({0, 0}, {0, 1}, 2.0, PhaseTag::VFwd), buf),
               ContractViolation);
}

TEST(Fabric, SimulatedClock) {
  MessageFabric f({1, 2}, {});
  f.run([&](WorkerId me) {
    if (me.mesh_c == 0) {
      f.charge_compute(me, 5.0, 0.0);
      f.send(msg(me, {0, 1}, 1.0, PhaseTag::VFwd));
    } else {
      f.charge_compute(me, 1.0, 0.0);
      f.await_region(me, PhaseTag::VFwd, {0, 0});
    }
  });
  const TimingBreakdown t = f.timing();
  ASSERT_EQ(t.workers.size(), 2u);
  const double send_cost = 0.5 + 10 * 1e-4;
  EXPECT_DOUBLE_EQ(t.workers[0].compute, 5.0);
  EXPECT_DOUBLE_EQ(t.workers[0].comm, send_cost);
  EXPECT_EQ(t.workers[0].messages_sent, 1);
  EXPECT_DOUBLE_EQ(t.workers[1].compute, 1.0);
  EXPECT_DOUBLE_EQ(t.workers[1].wait, 5.0 + send_cost - 1.0);
  EXPECT_DOUBLE_EQ(t.workers[1].comm, 0.0);
  EXPECT_DOUBLE_EQ(f.clock({0, 1}), 5.0 + send_cost);
}

TEST(Fabric, InstrumentationIsNotCharged) {
  MessageFabric f({1, 2}, {.with_monitor = true});
  f.run(
      [&](WorkerId me) {
        f.charge_compute(me, 2.0, 0.0);
        f.send(msg(me, WorkerId::monitor(), 1.0, PhaseTag::Snapshot));
      },
      [&] {
        for (int c = 0; c < 2; ++c) {
          f.await_region(WorkerId::monitor(), PhaseTag::Snapshot, {0, c});
        }
      });
  const TimingBreakdown t = f.timing();
  EXPECT_EQ(t.total_messages(), 0);
  EXPECT_EQ(t.total_comm(), 0.0);
  EXPECT_EQ(t.total_wait(), 0.0);
  std::size_t monitor_events = 0;
  for (const auto& e : f.trace()) monitor_events += (e.agent == 2);
  EXPECT_EQ(monitor_events, 2u);
}

TEST(Fabric, MonitorRequiresBody) {
  MessageFabric f({1, 1}, {.with_monitor = true});
  EXPECT_THROW(f.run([](WorkerId) {}), ConfigError);
}

TEST(Fabric, BatonRunsOneAgentAtATime) {
  MessageFabric f({2, 3}, {.deterministic = true});
  std::atomic<int> running{0};
  std::atomic<int> peak{0};
  f.run([&](WorkerId me) {
    for (int round = 0; round < 3; ++round) {
      const int now = ++running;
      peak = std::max(peak.load(), now);
      --running;
      const int next = (f.mesh().index(me.mesh_r, me.mesh_c) + 1) % 6;
      const int prev = (f.mesh().index(me.mesh_r, me.mesh_c) + 5) % 6;
      f.send(msg(me, {next / 3, next % 3}, round, PhaseTag::HBwd));
      f.await_region(me, PhaseTag::HBwd, {prev / 3, prev % 3});
    }
  });
  EXPECT_EQ(peak.load(), 1);
}

TEST(Fabric, DeterministicTraceIsReproducible) {
  auto run_once = [] {
    MessageFabric f({2, 2}, {.deterministic = true});
    f.run([&](WorkerId me) {
      const WorkerId other{1 - me.mesh_r, me.mesh_c};
      f.charge_compute(me, 1.0 + me.mesh_c, 0.0);
      f.send(msg(me, other, 1.0, PhaseTag::VFwd));
      f.await_region(me, PhaseTag::VFwd, other);
    });
    return std::make_pair(f.trace(), f.timing());
  };
  const auto a = run_once();
  const auto b = run_once();
  ASSERT_EQ(a.first.size(), b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    EXPECT_EQ(a.first[i].seq, b.first[i].seq);
    EXPECT_EQ(a.first[i].agent, b.first[i].agent);
    EXPECT_EQ(a.first[i].time, b.first[i].time);
  }
  EXPECT_TRUE(a.second == b.second);
}

}  // namespace
}  // namespace ptychotile
