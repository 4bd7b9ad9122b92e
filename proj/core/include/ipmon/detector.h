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

// Online anomaly scoring of aggregated observations.
//
// Every detector maps an observation x = (d1, d2, d3, v) to a score vector
// a in [0,1]^4 and derives labels y^j = 1[a^j > theta^j]. The scoring
// algorithm is pluggable through AnomalyDetector; ReferenceDetector is the
// bundled robust-statistics implementation.

#ifndef IPMON_DETECTOR_H_
#define IPMON_DETECTOR_H_

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>

#include "ipmon/aggregator.h"
#include "ipmon/payment_model.h"

namespace ipmon {

enum class Feature : std::size_t { kD1 = 0, kD2 = 1, kD3 = 2, kV = 3 };

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures = {
    Feature::kD1, Feature::kD2, Feature::kD3, Feature::kV};
inline constexpr std::array<Feature, 3> kDeltaFeatures = {
    Feature::kD1, Feature::kD2, Feature::kD3};

// "d1", "d2", "d3", "v".
std::string_view ToString(Feature f);
std::optional<Feature> ParseFeature(std::string_view token);

template <typename T>
class PerFeature {
 public:
  constexpr PerFeature() = default;
  constexpr PerFeature(T d1, T d2, T d3, T v) : values_{d1, d2, d3, v} {}

  constexpr T& operator[](Feature f) {
    return values_[static_cast<std::size_t>(f)];
  }
  constexpr const T& operator[](Feature f) const {
    return values_[static_cast<std::size_t>(f)];
  }

  bool operator==(const PerFeature&) const = default;

 private:
  std::array<T, kFeatureCount> values_{};
};

// Delta features may be absent (empty bin); v is always present.
struct FeatureVector {
  PerFeature<std::optional<double>> values;

  static FeatureVector FromObservation(const AggregatedObservation& obs);
  bool operator==(const FeatureVector&) const = default;
};

struct ScoreVector {
  PerFeature<std::optional<double>> a;

  bool operator==(const ScoreVector&) const = default;
};

struct LabelVector {
  PerFeature<bool> y;

  bool any() const;
  bool operator==(const LabelVector&) const = default;
};

// y^j = 1 iff a^j > theta^j. Absent scores label 0.
LabelVector Binarize(const ScoreVector& scores,
                     const PerFeature<double>& theta);

// Which side of the baseline counts as anomalous.
enum class DeviationSide { kHigh, kLow };

struct DetectorConfig {
  PerFeature<double> theta{0.4, 0.4, 0.4, 0.25};
  // Observations scored as all-zero while the baseline fills.
  std::size_t warmup_bins = 120;
  // Trailing non-anomalous observations kept for median/MAD.
  std::size_t baseline_window = 600;
  // Trailing bins averaged into the multi-bucket deviation.
  std::size_t multi_bucket_window = 11;
  PerFeature<DeviationSide> side{DeviationSide::kHigh, DeviationSide::kHigh,
                                 DeviationSide::kHigh, DeviationSide::kLow};
  // Per-bin end-to-end processing budget; must stay below eta.
  Millis latency_budget = 250;
  // Weight of the single-bucket deviation; the multi-bucket deviation gets
  // the complement.
  double single_bucket_weight = 0.2;
  // Consistency factor turning MAD into a standard-deviation estimate.
  double mad_scale = 1.4826;
  // Lower bound of the deviation unit, as a fraction of the baseline median.
  double mad_floor_fraction = 0.05;

  // Throws std::invalid_argument.
  void Validate(Millis eta) const;
};

struct Detection {
  ScoreVector scores;
  LabelVector labels;
};

// Stateful, online detector contract: exactly one Detection per observation.
class AnomalyDetector {
 public:
  virtual ~AnomalyDetector() = default;
  virtual Detection Observe(const FeatureVector& x) = 0;
  virtual std::string_view name() const = 0;
};

// Scale chosen so that a deviation of three robust standard deviations maps
// to a score of one half.
inline const double kSquashScale = 3.0 / std::log(2.0);

// s = 1 - exp(-d / kSquashScale) for d > 0, else 0.
double Squash(double deviation);

struct RobustStats {
  double median = 0;
  double mad = 0;
  // Deviation unit: mad_scale * MAD, never below the floor.
  double unit = 1;
};

// Requires a non-empty baseline.
RobustStats ComputeRobustStats(std::span<const double> baseline,
                               const DetectorConfig& cfg);

// Deviation of x in robust units, signed so that positive means "towards the
// anomalous side".
double DirectedDeviation(double x, const RobustStats& stats,
                         DeviationSide side);

// Zero unless current > 0; otherwise blends current with max(0, mean(recent)).
// `recent` holds the trailing directed deviations and includes the current
// one.
double BlendDeviation(double current, std::span<const double> recent,
                      double single_bucket_weight);

// Robust median/MAD detector with one-sided deviations, multi-bucket blending
// and exponential squashing. Observations carrying any label are kept out of
// the baseline.
class ReferenceDetector final : public AnomalyDetector {
 public:
  explicit ReferenceDetector(DetectorConfig config, Millis eta = 1000);

  Detection Observe(const FeatureVector& x) override;
  std::string_view name() const override { return "reference"; }

  // Scores x against the current state without updating it.
  ScoreVector Score(const FeatureVector& x) const;

  bool warming_up() const { return observed_ < config_.warmup_bins; }
  std::size_t baseline_size(Feature f) const { return baseline_[f].size(); }
  const DetectorConfig& config() const { return config_; }

 private:
  std::optional<double> ScoreFeature(Feature f, double value,
                                     double* deviation) const;
  void UpdateBaseline(const FeatureVector& x);

  DetectorConfig config_;
  std::size_t observed_ = 0;
  PerFeature<std::deque<double>> baseline_;
  PerFeature<std::deque<double>> recent_;
};

}  // namespace ipmon

#endif  // IPMON_DETECTOR_H_
