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

#include <cmath>
#include <random>

#include "ptychotile/error.hpp"
#include "ptychotile/gradients.hpp"
#include "ptychotile/passes.hpp"
#include "ptychotile/verify.hpp"

namespace ptychotile {
namespace {

struct Instance {
  Probe probe;
  Volume volume;
  ProbeLocation loc;
  Measurement y;
};

Volume random_volume(int slices, Extent e, std::uint64_t seed, double scale) {
  Volume v = Volume::zeros(slices, e);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, scale);
  for (double& x : v.data.values()) x = u(rng);
  return v;
}

// Measurement from one volume, evaluated at a perturbed one.
Instance small_instance(std::uint64_t seed, int n = 16, int slices = 2) {
  ProbeParams p;
  p.grid_size = n;
  p.aperture_semiangle = 0.25;
  p.aperture_rolloff = 0.5;
  p.defocus = 3.0;
  p.propagator = 2.0;
  Instance in;
  in.probe = make_probe(p);
  const Extent e{n + 8, n + 8};
  in.loc = {0, e.height / 2, e.width / 2};
  const Volume truth = random_volume(slices, e, seed, 0.5);
  in.y = diffract(multislice_propagate(in.probe, in.loc, truth));
  in.volume = random_volume(slices, e, seed + 100, 0.5);
  return in;
}

double max_abs(const RegionArray& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

TEST(Loss, ZeroAtGeneratingVolume) {
  Instance in = small_instance(1);
  const Measurement y =
      diffract(multislice_propagate(in.probe, in.loc, in.volume));
  EXPECT_EQ(loss(y, in.probe, in.loc, in.volume), 0.0);
}

TEST(Loss, ZeroMeasurementGivesProbeEnergy) {
  Instance in = small_instance(2);
  Measurement zero{Array2<double>(16, 16), 0};
  EXPECT_NEAR(loss(zero, in.probe, in.loc, in.volume), 1.0, 1e-12);
}

TEST(Loss, InvariantUnderGlobalPhaseShift) {
  Instance in = small_instance(3);
  Volume shifted = in.volume;
  const double sigma = in.probe.params.interaction_constant;
  for (double& v : shifted.data.values()) v += 2.0 * M_PI / sigma;
  EXPECT_NEAR(loss(in.y, in.probe, in.loc, in.volume),
              loss(in.y, in.probe, in.loc, shifted), 1e-12);
}

TEST(Loss, RejectsWrongDetector) {
  Instance in = small_instance(4);
  Measurement bad{Array2<double>(8, 8), 0};
  EXPECT_THROW(loss(bad, in.probe, in.loc, in.volume), ShapeMismatch);
}

TEST(Grad, VanishesAtPerfectReconstruction) {
  Instance in = small_instance(5);
  const Measurement y =
      diffract(multislice_propagate(in.probe, in.loc, in.volume));
  EXPECT_LE(max_abs(grad(y, in.probe, in.loc, in.volume)), 1e-10);
}

TEST(Grad, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Instance in = small_instance(10 + seed);
    const GradField g = grad(in.y, in.probe, in.loc, in.volume);
    const GradField fd = grad_fd_oracle(in.y, in.probe, in.loc, in.volume, 1e-5);
    EXPECT_EQ(g.region(), fd.region());
    EXPECT_LE(relative_l2(g, fd), 1e-5) << "seed " << seed;
  }
}

TEST(Grad, RegionIsTheWindow) {
  Instance in = small_instance(6);
  const GradField g = grad(in.y, in.probe, in.loc, in.volume);
  EXPECT_EQ(g.region(), probe_window(in.loc, 16));
  EXPECT_EQ(g.slices(), 2);
}

TEST(Grad, OutOfBoundsWindow) {
  Instance in = small_instance(7);
  EXPECT_THROW(grad(in.y, in.probe, {0, 2, 12}, in.volume), WindowOutOfBounds);
}

TEST(Grad, ConcentratedInsideCircleForTightProbe) {
  ProbeParams p;
  p.grid_size = 64;
  p.aperture_semiangle = 0.2;
  p.aperture_rolloff = 1.0;
  p.propagator = 0.5;
  const Probe probe = make_probe(p);
  const int radius = 20;
  double outside = 0.0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (!in_circle({0, 32, 32}, radius, y, x)) outside += std::norm(probe.field(y, x));
    }
  }
  ASSERT_LT(outside, 1e-6);

  const Extent e{96, 96};
  const ProbeLocation loc{0, 48, 48};
  const Measurement y =
      diffract(multislice_propagate(probe, loc, Volume::zeros(2, e)));
  const Volume v = random_volume(2, e, 1, 0.5);
  const GradField g = grad(y, probe, loc, v);
  double in_max = 0.0;
  double out_max = 0.0;
  for (int s = 0; s < 2; ++s) {
    for (int yy = g.region().y0; yy < g.region().y1; ++yy) {
      for (int xx = g.region().x0; xx < g.region().x1; ++xx) {
        const double a = std::abs(g.at(s, yy, xx));
        double& m = in_circle(loc, radius, yy, xx) ? in_max : out_max;
        m = std::max(m, a);
      }
    }
  }
  EXPECT_GT(in_max, 0.0);
  EXPECT_LE(out_max, 1e-3 * in_max);
}

TEST(Grad, SumOfProbeGradientsIsGradientOfSum) {
  ProbeParams p;
  p.grid_size = 16;
  p.aperture_semiangle = 0.25;
  p.propagator = 1.0;
  const Probe probe = make_probe(p);
  const Extent e{32, 32};
  const ScanPattern scan = build_raster_scan(2, 2, 6, {13, 13}, 5, e);
  const Volume truth = random_volume(2, e, 1, 0.5);
  const auto ys = simulate_measurements(truth, scan, probe);
  const Volume v = random_volume(2, e, 2, 0.5);

  std::vector<GradField> parts;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    parts.push_back(grad(ys[i], probe, scan.locations[i], v));
  }
  const RegionArray summed = global_sum_oracle(parts, e, 2);

  auto total = [&](const Volume& w) {
    double f = 0.0;
    for (std::size_t i = 0; i < scan.size(); ++i) {
      f += loss(ys[i], probe, scan.locations[i], w);
    }
    return f;
  };
  const GradField fd = fd_gradient(total, v, Rect::of(e), 1e-5);
  EXPECT_LE(relative_l2(summed, fd), 1e-5);
}

TEST(FdOracle, LinearFunctionIsExact) {
  const Volume v = random_volume(2, {6, 5}, 3, 1.0);
  auto f = [](const Volume& w) {
    double s = 0.0;
    for (double x : w.data.values()) s += 0.37 * x;
    return s;
  };
  const GradField g = fd_gradient(f, v, {1, 1, 4, 4}, 1e-3);
  for (double x : g.values()) EXPECT_NEAR(x, 0.37, 1e-12);
}

TEST(FdOracle, StationaryPointIsNearZero) {
  ProbeParams p;
  p.grid_size = 16;
  p.aperture_semiangle = 0.25;
  const Probe probe = make_probe(p);
  const Volume v = Volume::zeros(1, {24, 24});
  const ProbeLocation loc{0, 12, 12};
  const Measurement y = diffract(multislice_propagate(probe, loc, v));
  EXPECT_LE(max_abs(grad_fd_oracle(y, probe, loc, v, 1e-5)), 1e-8);
}

TEST(FdOracle, SecondOrderInEpsilon) {
  // Smooth cubic: central-difference error is eps^2 f'''/6 exactly.
  const Volume v = random_volume(1, {3, 3}, 4, 1.0);
  auto f = [](const Volume& w) {
    double s = 0.0;
    for (double x : w.data.values()) s += x * x * x;
    return s;
  };
  const double eps = 1e-2;
  const GradField a = fd_gradient(f, v, {0, 0, 3, 3}, eps);
  const GradField b = fd_gradient(f, v, {0, 0, 3, 3}, eps / 2);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      const double exact = 3.0 * v.data.at(0, y, x) * v.data.at(0, y, x);
      const double ea = a.at(0, y, x) - exact;
      const double eb = b.at(0, y, x) - exact;
      EXPECT_NEAR(ea / eb, 4.0, 1e-3);
    }
  }
}

TEST(FdOracle, RejectsNonPositiveEpsilon) {
  const Volume v = Volume::zeros(1, {2, 2});
  auto f = [](const Volume&) { return 0.0; };
  EXPECT_THROW(fd_gradient(f, v, {0, 0, 2, 2}, 0.0), ConfigError);
}

TEST(MaskToCircle, LargeRadiusIsIdentity) {
  RegionArray g(2, {0, 0, 16, 16});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (double& x : g.values()) x = n(rng);
  EXPECT_EQ(mask_to_circle(g, {0, 8, 8}, 23), g);
}

TEST(MaskToCircle, RadiusZeroKeepsCentreColumn) {
  RegionArray g(3, {0, 0, 9, 9}, 1.0);
  const GradField m = mask_to_circle(g, {0, 4, 5}, 0);
  for (int s = 0; s < 3; ++s) {
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 9; ++x) {
        EXPECT_EQ(m.at(s, y, x), (y == 4 && x == 5) ? 1.0 : 0.0);
      }
    }
  }
}

TEST(MaskToCircle, MaskedSumMatchesBruteForce) {
  const Extent e{20, 20};
  const ProbeLocation a{0, 8, 8};
  const ProbeLocation b{1, 11, 10};
  RegionArray ga(1, {2, 2, 14, 14});
  RegionArray gb(1, {5, 4, 17, 16});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (double& x : ga.values()) x = n(rng);
  for (double& x : gb.values()) x = n(rng);
  const RegionArray sum =
      global_sum_oracle({mask_to_circle(ga, a, 4), mask_to_circle(gb, b, 4)}, e, 1);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      double expect = 0.0;
      if (ga.region().contains(y, x) && in_circle(a, 4, y, x)) expect += ga.at(0, y, x);
      if (gb.region().contains(y, x) && in_circle(b, 4, y, x)) expect += gb.at(0, y, x);
      EXPECT_EQ(sum.at(0, y, x), expect);
    }
  }
}

TEST(ApplyStep, ZeroAlphaOrZeroGradientLeavesVolume) {
  RegionArray v(1, {0, 0, 4, 4}, 2.5);
  const RegionArray before = v;
  RegionArray g(1, {1, 1, 3, 3}, 7.0);
  apply_step(v, g, StepSize(0.0));
  EXPECT_EQ(v, before);
  apply_step(v, RegionArray(1, {1, 1, 3, 3}), StepSize(1.0));
  EXPECT_EQ(v, before);
}

TEST(ApplyStep, HalvesDistanceOnScalarQuadratic) {
  // f(v) = c (v - v*)^2, f' = 2c (v - v*); alpha = 1 / (4c) halves v - v*.
  const double c = 3.0;
  const double target = 0.75;
  RegionArray v(1, {0, 0, 1, 1}, 2.0);
  RegionArray g(1, {0, 0, 1, 1}, 2.0 * c * (2.0 - target));
  apply_step(v, g, StepSize(1.0 / (4.0 * c)));
  EXPECT_DOUBLE_EQ(v.at(0, 0, 0) - target, (2.0 - target) / 2.0);
}

TEST(ApplyStep, ShapeChecks) {
  RegionArray v(1, {0, 0, 4, 4});
  EXPECT_THROW(apply_step(v, RegionArray(1, {2, 2, 6, 6}), StepSize(1.0)),
               ShapeMismatch);
  EXPECT_THROW(apply_step(v, RegionArray(2, {0, 0, 2, 2}), StepSize(1.0)),
               ShapeMismatch);
  EXPECT_THROW(StepSize(-1.0), ConfigError);
}

TEST(ApplyStep, SmallStepDescends) {
  Instance in = small_instance(20);
  const LossAndGrad lg = loss_and_grad(in.y, in.probe, in.loc, in.volume);
  ASSERT_GT(lg.loss, 0.0);
  double alpha = 1.0;
  Volume next = in.volume;
  for (int k = 0; k < 40; ++k, alpha /= 2.0) {
    next = in.volume;
    apply_step(next.data, lg.grad, StepSize(alpha));
    if (loss(in.y, in.probe, in.loc, next) < lg.loss) break;
  }
  EXPECT_LT(loss(in.y, in.probe, in.loc, next), lg.loss);
  EXPECT_NEAR(lg.loss, loss(in.y, in.probe, in.loc, in.volume), 1e-14);
}

TEST(CheckGradientFd, TwentySeeds) {
  const CheckReport r = check_gradient_fd(20, 1e-5);
  EXPECT_TRUE(r.passed) << r.metric;
  EXPECT_LE(r.metric, 1e-5);
}

}  // namespace
}  // namespace ptychotile
