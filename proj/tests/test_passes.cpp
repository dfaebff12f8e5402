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

#include <random>

#include "ptychotile/error.hpp"
#include "ptychotile/passes.hpp"
#include "ptychotile/verify.hpp"

namespace ptychotile {
namespace {

BufferMesh filled_mesh(MeshSpec mesh, Extent e, int halo, int slices,
                       std::uint64_t seed) {
  const auto tiles = decompose_mesh(e, mesh, halo, ScanPattern{});
  BufferMesh m = BufferMesh::zeros(mesh, tiles, slices);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& b : m.buffers) {
    for (double& v : b.data.values()) v = n(rng);
  }
  return m;
}

bool same(const BufferMesh& a, const BufferMesh& b) {
  if (a.buffers.size() != b.buffers.size()) return false;
  for (std::size_t i = 0; i < a.buffers.size(); ++i) {
    if (!(a.buffers[i].data == b.buffers[i].data)) return false;
  }
  return true;
}

TEST(Passes, SingleTileIsIdentity) {
  const BufferMesh m = filled_mesh({1, 1}, {12, 12}, 3, 2, 1);
  EXPECT_TRUE(same(neighbor_add_exchange(m), m));
  EXPECT_TRUE(same(vertical_forward(m), m));
  EXPECT_TRUE(same(vertical_backward(m), m));
  EXPECT_TRUE(same(horizontal_forward(m), m));
  EXPECT_TRUE(same(horizontal_backward(m), m));
  EXPECT_TRUE(same(full_pass(m), m));
}

TEST(Passes, SingleRowOrColumnIsIdentityAcross) {
  const BufferMesh row = filled_mesh({1, 3}, {10, 30}, 3, 1, 2);
  EXPECT_TRUE(same(vertical_forward(row), row));
  EXPECT_TRUE(same(vertical_backward(row), row));
  const BufferMesh col = filled_mesh({3, 1}, {30, 10}, 3, 1, 3);
  EXPECT_TRUE(same(horizontal_forward(col), col));
  EXPECT_TRUE(same(horizontal_backward(col), col));
}

TEST(Passes, ZeroHaloIsIdentity) {
  const BufferMesh m = filled_mesh({3, 3}, {30, 30}, 0, 1, 4);
  EXPECT_TRUE(same(vertical_forward(m), m));
  EXPECT_TRUE(same(horizontal_forward(m), m));
  EXPECT_TRUE(same(full_pass(m), m));
}

TEST(NeighborAddExchange, TwoTilesSumOnOverlap) {
  const auto tiles = decompose_mesh({20, 10}, {2, 1}, 3, ScanPattern{});
  BufferMesh m = BufferMesh::zeros({2, 1}, tiles, 1);
  m.at(0, 0).data.fill(1.0);
  m.at(1, 0).data.fill(2.0);
  const Rect ov = overlap_region(tiles[0], tiles[1]);
  const BufferMesh out = neighbor_add_exchange(m);
  for (int i = 0; i < 2; ++i) {
    const RegionArray& d = out.buffers[i].data;
    for (int y = d.region().y0; y < d.region().y1; ++y) {
      for (int x = d.region().x0; x < d.region().x1; ++x) {
        EXPECT_EQ(d.at(0, y, x), ov.contains(y, x) ? 3.0 : i + 1.0);
      }
    }
  }
}

TEST(NeighborAddExchange, MatchesOracleAtLowOverlap) {
  const AccumulationCase c = accumulation_case({3, 3}, 1.0 / 3.0);
  const auto grads = random_circle_gradients(c.scan, 2, 7);
  BufferMesh m = BufferMesh::zeros(c.mesh, c.tiles, 2);
  for (auto& b : m.buffers) {
    for (int idx : b.tile.probe_indices) b.data.add(grads[static_cast<std::size_t>(idx)]);
  }
  const RegionArray oracle = global_sum_oracle(grads, c.extent, 2);
  EXPECT_LE(max_relative_deviation(neighbor_add_exchange(m), oracle), 1e-12);
}

TEST(VerticalForward, ThreeTileColumnOfOnes) {
  const auto tiles = decompose_mesh({30, 10}, {3, 1}, 6, ScanPattern{});
  BufferMesh m = BufferMesh::zeros({3, 1}, tiles, 1);
  for (auto& b : m.buffers) b.data.fill(1.0);
  const BufferMesh out = vertical_forward(m);
  const RegionArray& bottom = out.at(2, 0).data;
  int twos = 0;
  int threes = 0;
  for (int y = bottom.region().y0; y < bottom.region().y1; ++y) {
    // middle holds 1 + [in top], bottom adds middle where they overlap
    const double mid = tiles[1].extended.contains(y, 0)
                           ? 1.0 + (tiles[0].extended.contains(y, 0) ? 1.0 : 0.0)
                           : 0.0;
    const double expect = 1.0 + mid;
    EXPECT_EQ(bottom.at(0, y, 3), expect) << "row " << y;
    twos += expect == 2.0;
    threes += expect == 3.0;
  }
  EXPECT_EQ(threes, tiles[0].extended.intersect(tiles[2].extended).height());
  EXPECT_GT(twos, 0);
}

TEST(VerticalBackward, AgreementAndIdempotence) {
  const BufferMesh m = vertical_forward(filled_mesh({4, 2}, {40, 20}, 4, 2, 5));
  const BufferMesh once = vertical_backward(m);
  EXPECT_TRUE(same(vertical_backward(once), once));
  for (int c = 0; c < 2; ++c) {
    for (int r = 0; r < 4; ++r) {
      for (int q = r + 1; q < 4; ++q) {
        const Rect ov = overlap_region(once.at(r, c).tile, once.at(q, c).tile);
        if (ov.empty()) continue;
        EXPECT_EQ(once.at(r, c).data.extract(ov), once.at(q, c).data.extract(ov));
      }
    }
  }
}

TEST(HorizontalPasses, TransposeSymmetry) {
  const BufferMesh m = filled_mesh({3, 4}, {30, 41}, 4, 2, 6);
  const BufferMesh t = transpose(m);
  const BufferMesh hf = horizontal_forward(m);
  const BufferMesh vf = transpose(vertical_forward(t));
  const BufferMesh hb = horizontal_backward(hf);
  const BufferMesh vb = transpose(vertical_backward(vertical_forward(t)));
  for (std::size_t i = 0; i < m.buffers.size(); ++i) {
    EXPECT_EQ(hf.buffers[i].data, vf.buffers[i].data);
    EXPECT_EQ(hb.buffers[i].data, vb.buffers[i].data);
  }
}

TEST(FullPass, MatchesComposition) {
  const BufferMesh m = filled_mesh({3, 3}, {33, 33}, 4, 1, 8);
  const BufferMesh composed =
      horizontal_backward(horizontal_forward(vertical_backward(vertical_forward(m))));
  EXPECT_TRUE(same(full_pass(m), composed));
}

class AccumulationTheorem
    : public ::testing::TestWithParam<std::tuple<int, int, double>> {};

TEST_P(AccumulationTheorem, EveryBufferEqualsGlobalSum) {
  const auto [rows, cols, ratio] = GetParam();
  const AccumulationCase c = accumulation_case({rows, cols}, ratio);
  EXPECT_NEAR(c.scan.overlap_ratio(), ratio, 1e-12);
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto grads = random_circle_gradients(c.scan, 2, seed);
    BufferMesh m = BufferMesh::zeros(c.mesh, c.tiles, 2);
    for (auto& b : m.buffers) {
      for (int idx : b.tile.probe_indices) b.data.add(grads[static_cast<std::size_t>(idx)]);
    }
    const RegionArray oracle = global_sum_oracle(grads, c.extent, 2);
    EXPECT_LE(max_relative_deviation(full_pass(m), oracle), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Meshes, AccumulationTheorem,
    ::testing::Values(std::make_tuple(2, 2, 1.0 / 3.0), std::make_tuple(3, 3, 1.0 / 3.0),
                      std::make_tuple(4, 3, 1.0 / 3.0), std::make_tuple(2, 2, 0.75),
                      std::make_tuple(3, 3, 0.75), std::make_tuple(4, 3, 0.75)));

TEST(NeighborAddExchange, FallsShortAtHighOverlap) {
  const AccumulationCase c = accumulation_case({3, 3}, 0.75);
  const auto grads = random_circle_gradients(c.scan, 1, 3);
  BufferMesh m = BufferMesh::zeros(c.mesh, c.tiles, 1);
  for (auto& b : m.buffers) {
    for (int idx : b.tile.probe_indices) b.data.add(grads[static_cast<std::size_t>(idx)]);
  }
  const RegionArray oracle = global_sum_oracle(grads, c.extent, 1);
  EXPECT_GT(max_relative_deviation(neighbor_add_exchange(m), oracle), 1e-3);
}

TEST(GlobalSumOracle, Basics) {
  const Extent e{10, 10};
  RegionArray empty = global_sum_oracle({}, e, 2);
  for (double v : empty.values()) EXPECT_EQ(v, 0.0);

  RegionArray a(1, {1, 1, 5, 5}, 1.0);
  RegionArray b(1, {3, 3, 8, 8}, 2.0);
  const RegionArray one = global_sum_oracle({a}, e, 1);
  const RegionArray two = global_sum_oracle({a, b}, e, 1);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const double ea = a.region().contains(y, x) ? 1.0 : 0.0;
      const double eb = b.region().contains(y, x) ? 2.0 : 0.0;
      EXPECT_EQ(one.at(0, y, x), ea);
      EXPECT_EQ(two.at(0, y, x), ea + eb);
    }
  }
}

TEST(Stitch, RoundTripAndHaloIgnored) {
  const Extent e{23, 17};
  RegionArray full(2, Rect::of(e));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (double& v : full.values()) v = n(rng);
  for (MeshSpec mesh : {MeshSpec{1, 1}, MeshSpec{3, 2}, MeshSpec{2, 4}}) {
    const auto tiles = decompose_mesh(e, mesh, 3, ScanPattern{});
    std::vector<std::pair<TileSpec, RegionArray>> parts;
    for (const auto& t : tiles) {
      RegionArray d = full.extract(t.extended);
      // Scribble on the halo.
      for (int y = t.extended.y0; y < t.extended.y1; ++y) {
        for (int x = t.extended.x0; x < t.extended.x1; ++x) {
          if (!t.interior.contains(y, x)) d.at(1, y, x) = 99.0;
        }
      }
      parts.emplace_back(t, d);
    }
    EXPECT_EQ(stitch(parts, e), full);
  }
}

TEST(Stitch, IncompleteCover) {
  const Extent e{20, 20};
  auto tiles = decompose_mesh(e, {2, 2}, 1, ScanPattern{});
  std::vector<std::pair<TileSpec, RegionArray>> parts;
  for (const auto& t : tiles) parts.emplace_back(t, RegionArray(1, t.extended));
  auto missing = parts;
  missing.pop_back();
  EXPECT_THROW(stitch(missing, e), IncompleteCover);
  auto doubled = parts;
  doubled.push_back(parts.front());
  EXPECT_THROW(stitch(doubled, e), IncompleteCover);
  EXPECT_THROW(stitch({}, e), IncompleteCover);
}

}  // namespace
}  // namespace ptychotile
