// Copyright 2026 The ipmon Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipmon/detector.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace ipmon {
namespace {

FeatureVector Fv(std::optional<double> d1, std::optional<double> d2,
                 std::optional<double> d3, double v) {
  FeatureVector x;
  x.values = {d1, d2, d3, v};
  return x;
}

FeatureVector VolumeOnly(double v) {
  return Fv(std::nullopt, std::nullopt, std::nullopt, v);
}

// 120 volume observations spread over 95..105.
ReferenceDetector WarmVolumeDetector() {
  ReferenceDetector det(DetectorConfig{});
  for (int i = 0; i < 120; ++i) {
    det.Observe(VolumeOnly(100 + (i * 7) % 11 - 5));
  }
  return det;
}

// Constant baseline; the multi-bucket history is all zeros afterwards.
ReferenceDetector FlatDetector() {
  ReferenceDetector det(DetectorConfig{});
  for (int i = 0; i < 120; ++i) det.Observe(Fv(40, 600, 50, 100));
  return det;
}

TEST(SquashTest, ThreeDeviationsMapToOneHalf) {
  EXPECT_NEAR(Squash(3.0), 0.5, 1e-12);
  EXPECT_EQ(Squash(0.0), 0.0);
  EXPECT_LE(Squash(1e300), 1.0);
}

TEST(ReferenceDetectorTest, WarmupEmitsZeroScores) {
  ReferenceDetector det(DetectorConfig{});
  for (int i = 0; i < 120; ++i) {
    const Detection d = det.Observe(Fv(40, 600 * (i + 1), 50, 0));
    for (Feature f : kAllFeatures) {
      ASSERT_EQ(d.scores.a[f], 0.0);
      ASSERT_FALSE(d.labels.y[f]);
    }
  }
  EXPECT_FALSE(det.warming_up());
}

TEST(ReferenceDetectorTest, ValueAtMedianScoresZero) {
  ReferenceDetector det = FlatDetector();
  const Detection d = det.Observe(Fv(40, 600, 50, 100));
  for (Feature f : kAllFeatures) EXPECT_EQ(d.scores.a[f], 0.0);
}

// Frozen value from an independent recomputation of the scoring formula
// over the same synthetic baseline: median 100, unit 5 (floor), current
// deviation 15.8, multi-bucket mean 1.41818..., blend 4.29454...
TEST(ReferenceDetectorTest, VolumeCollapseScoresAboveThreshold) {
  ReferenceDetector det = WarmVolumeDetector();
  const Detection d = det.Observe(VolumeOnly(21));
  ASSERT_TRUE(d.scores.a[Feature::kV]);
  EXPECT_NEAR(*d.scores.a[Feature::kV], 0.6292586729413492, 1e-12);
  EXPECT_GT(*d.scores.a[Feature::kV], 0.4);
  EXPECT_TRUE(d.labels.y[Feature::kV]);
}

TEST(ReferenceDetectorTest, SlowD2WithHighVolumeScoresOnlyD2) {
  ReferenceDetector det = FlatDetector();
  const ScoreVector a = det.Score(Fv(40, 900, 50, 130));
  EXPECT_GT(*a.a[Feature::kD2], 0.0);
  EXPECT_EQ(*a.a[Feature::kV], 0.0);
}

TEST(ReferenceDetectorTest, AbsentFeaturesAreNotScored) {
  ReferenceDetector det = FlatDetector();
  const Detection d = det.Observe(VolumeOnly(0));
  EXPECT_FALSE(d.scores.a[Feature::kD1]);
  EXPECT_FALSE(d.labels.y[Feature::kD1]);
  EXPECT_TRUE(d.scores.a[Feature::kV]);
  EXPECT_TRUE(d.labels.y[Feature::kV]);
}

TEST(ReferenceDetectorTest, LabeledBinsStayOutOfBaseline) {
  ReferenceDetector det = FlatDetector();
  const std::size_t before = det.baseline_size(Feature::kD2);
  const Detection d = det.Observe(Fv(40, 60'000, 50, 100));
  ASSERT_TRUE(d.labels.any());
  EXPECT_EQ(det.baseline_size(Feature::kD2), before);
  det.Observe(Fv(40, 600, 50, 100));
  EXPECT_EQ(det.baseline_size(Feature::kD2), before + 1);
}

TEST(ReferenceDetectorTest, ScoreDoesNotChangeState) {
  ReferenceDetector a = WarmVolumeDetector();
  ReferenceDetector b = WarmVolumeDetector();
  a.Score(VolumeOnly(3));
  EXPECT_EQ(a.Observe(VolumeOnly(50)).scores, b.Observe(VolumeOnly(50)).scores);
}

TEST(RobustStatsTest, FloorWhenMadIsZero) {
  DetectorConfig cfg;
  const std::vector<double> flat(10, 200.0);
  const RobustStats s = ComputeRobustStats(flat, cfg);
  EXPECT_EQ(s.mad, 0.0);
  EXPECT_DOUBLE_EQ(s.unit, 10.0);
  const std::vector<double> zeros(10, 0.0);
  EXPECT_DOUBLE_EQ(ComputeRobustStats(zeros, cfg).unit, 1.0);
}

TEST(RobustStatsTest, ScaledMadAboveFloor) {
  DetectorConfig cfg;
  const std::vector<double> b = {1, 2, 3, 4, 100};
  const RobustStats s = ComputeRobustStats(b, cfg);
  EXPECT_EQ(s.median, 3);
  EXPECT_EQ(s.mad, 1);
  EXPECT_DOUBLE_EQ(s.unit, 1.4826);
}

TEST(DetectorConfigTest, Validation) {
  DetectorConfig cfg;
  EXPECT_NO_THROW(cfg.Validate(1000));
  cfg.latency_budget = 1000;
  EXPECT_THROW(cfg.Validate(1000), std::invalid_argument);
  cfg = {};
  cfg.theta[Feature::kV] = 1.0;
  EXPECT_THROW(cfg.Validate(1000), std::invalid_argument);
  cfg = {};
  cfg.multi_bucket_window = 0;
  EXPECT_THROW(cfg.Validate(1000), std::invalid_argument);
}

TEST(BinarizeTest, StrictInequalityAtEachThreshold) {
  const PerFeature<double> theta{0.4, 0.4, 0.4, 0.25};
  ScoreVector a;
  a.a = {0.4, std::nextafter(0.4, 1.0), std::nullopt, 0.25};
  const LabelVector y = Binarize(a, theta);
  EXPECT_FALSE(y.y[Feature::kD1]);
  EXPECT_TRUE(y.y[Feature::kD2]);
  EXPECT_FALSE(y.y[Feature::kD3]);
  EXPECT_FALSE(y.y[Feature::kV]);
}

// Grid crossing every threshold: y = 1 iff a > theta.
TEST(BinarizePropertyTest, LabelLaw) {
  const PerFeature<double> theta{0.4, 0.4, 0.4, 0.25};
  for (Feature f : kAllFeatures) {
    const double t = theta[f];
    std::vector<double> grid = {0.0, 1.0, t, std::nextafter(t, 0.0),
                                std::nextafter(t, 1.0)};
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    for (double s : grid) {
      ScoreVector a;
      a.a[f] = s;
      const LabelVector y = Binarize(a, theta);
      ASSERT_EQ(y.y[f], s > t) << ToString(f) << " " << s;
      for (Feature g : kAllFeatures) {
        if (g != f) {
          ASSERT_FALSE(y.y[g]);
        }
      }
    }
  }
}

ReferenceDetector RandomWarmDetector(std::mt19937_64& rng) {
  std::lognormal_distribution<double> d(std::log(100.0), 0.3);
  std::poisson_distribution<int> v(100);
  ReferenceDetector det(DetectorConfig{});
  for (int i = 0; i < 200; ++i) det.Observe(Fv(d(rng), d(rng), d(rng), v(rng)));
  return det;
}

TEST(DetectorPropertyTest, ScoresStayInUnitInterval) {
  std::mt19937_64 rng(3);
  const double big = std::numeric_limits<double>::max();
  const std::vector<double> adversarial = {0.0, 1e-300, 1.0, 1e9, 1e300, big};
  std::uniform_int_distribution<std::size_t> pick(0, adversarial.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int trial = 0; trial < 20; ++trial) {
    ReferenceDetector det(DetectorConfig{});
    for (int i = 0; i < 400; ++i) {
      auto val = [&] { return i % 3 == 0 ? adversarial[pick(rng)] : u(rng); };
      const Detection d = det.Observe(Fv(val(), val(), val(), val()));
      for (Feature f : kAllFeatures) {
        ASSERT_TRUE(d.scores.a[f]);
        ASSERT_GE(*d.scores.a[f], 0.0);
        ASSERT_LE(*d.scores.a[f], 1.0);
      }
    }
  }
}

TEST(DetectorPropertyTest, FrozenBaselineMonotonicity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const ReferenceDetector det = RandomWarmDetector(rng);
    for (Feature f : kDeltaFeatures) {
      double prev = 0.0;
      for (double x = 0; x <= 2000; x += 5) {
        FeatureVector fv = Fv(100, 100, 100, 100);
        fv.values[f] = x;
        const double s = *det.Score(fv).a[f];
        ASSERT_GE(s, prev) << ToString(f) << " x=" << x;
        prev = s;
      }
    }
    double prev = 0.0;
    for (double v = 300; v >= 0; v -= 1) {
      const double s = *det.Score(Fv(100, 100, 100, v)).a[Feature::kV];
      ASSERT_GE(s, prev) << "v=" << v;
      prev = s;
    }
  }
}

TEST(DetectorPropertyTest, FrozenBaselineOneSidedness) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ReferenceDetector det = RandomWarmDetector(rng);
    // Push recent deviations up so that only the current bin decides.
    for (int i = 0; i < 5; ++i) det.Observe(Fv(150, 150, 150, 60));
    for (Feature f : kDeltaFeatures) {
      for (double x = 0; x < 80; x += 0.5) {
        FeatureVector fv = Fv(100, 100, 100, 100);
        fv.values[f] = x;
        ASSERT_EQ(*det.Score(fv).a[f], 0.0) << ToString(f) << " x=" << x;
      }
    }
    for (double v = 130; v < 400; v += 1) {
      ASSERT_EQ(*det.Score(Fv(100, 100, 100, v)).a[Feature::kV], 0.0);
    }
  }
}

TEST(DetectorPropertyTest, DeterministicReplay) {
  std::mt19937_64 r1(9), r2(9);
  ReferenceDetector a = RandomWarmDetector(r1);
  ReferenceDetector b = RandomWarmDetector(r2);
  for (int i = 0; i < 50; ++i) {
    const FeatureVector x = Fv(100 + i, 100, 100 - i, 100 - i);
    ASSERT_EQ(a.Observe(x).scores, b.Observe(x).scores);
  }
}

}  // namespace
}  // namespace ipmon
