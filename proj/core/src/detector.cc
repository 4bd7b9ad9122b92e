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

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ipmon {

std::string_view ToString(Feature f) {
  switch (f) {
    case Feature::kD1:
      return "d1";
    case Feature::kD2:
      return "d2";
    case Feature::kD3:
      return "d3";
    case Feature::kV:
      return "v";
  }
  return "?";
}

std::optional<Feature> ParseFeature(std::string_view token) {
  for (Feature f : kAllFeatures) {
    if (ToString(f) == token) return f;
  }
  return std::nullopt;
}

FeatureVector FeatureVector::FromObservation(const AggregatedObservation& obs) {
  FeatureVector x;
  if (obs.p_tilde) {
    x.values[Feature::kD1] = obs.p_tilde->d1;
    x.values[Feature::kD2] = obs.p_tilde->d2;
    x.values[Feature::kD3] = obs.p_tilde->d3;
  }
  x.values[Feature::kV] = static_cast<double>(obs.v);
  return x;
}

bool LabelVector::any() const {
  return std::any_of(kAllFeatures.begin(), kAllFeatures.end(),
                     [this](Feature f) { return y[f]; });
}

LabelVector Binarize(const ScoreVector& scores,
                     const PerFeature<double>& theta) {
  LabelVector labels;
  for (Feature f : kAllFeatures) {
    labels.y[f] = scores.a[f].has_value() && *scores.a[f] > theta[f];
  }
  return labels;
}

void DetectorConfig::Validate(Millis eta) const {
  for (Feature f : kAllFeatures) {
    if (!(theta[f] > 0.0 && theta[f] < 1.0)) {
      throw std::invalid_argument("threshold for " + std::string(ToString(f)) +
                                  " must lie in (0, 1)");
    }
  }
  if (multi_bucket_window < 1) {
    throw std::invalid_argument("multi_bucket_window must be >= 1");
  }
  if (baseline_window < 1) {
    throw std::invalid_argument("baseline_window must be >= 1");
  }
  if (warmup_bins < 1 || warmup_bins > baseline_window) {
    throw std::invalid_argument(
        "warmup_bins must lie in [1, baseline_window]");
  }
  if (latency_budget <= 0 || latency_budget >= eta) {
    throw std::invalid_argument("latency_budget must lie in (0, eta)");
  }
  if (!(single_bucket_weight >= 0.0 && single_bucket_weight <= 1.0)) {
    throw std::invalid_argument("single_bucket_weight must lie in [0, 1]");
  }
  if (!(mad_scale > 0.0) || !(mad_floor_fraction > 0.0)) {
    throw std::invalid_argument("mad_scale and mad_floor_fraction must be > 0");
  }
}

double Squash(double deviation) {
  if (!(deviation > 0.0)) return 0.0;
  if (std::isinf(deviation)) return 1.0;
  return std::clamp(1.0 - std::exp(-deviation / kSquashScale), 0.0, 1.0);
}

RobustStats ComputeRobustStats(std::span<const double> baseline,
                               const DetectorConfig& cfg) {
  std::vector<double> work(baseline.begin(), baseline.end());
  RobustStats stats;
  stats.median = Median(work);
  for (double& w : work) w = std::abs(w - stats.median);
  stats.mad = Median(work);
  // The floor also bounds a small nonzero MAD: per-bin medians at high
  // volume are far steadier than the same quantity in a thinned-out bin.
  const double floor = stats.median != 0.0
                           ? cfg.mad_floor_fraction * std::abs(stats.median)
                           : 1.0;
  stats.unit = std::max(cfg.mad_scale * stats.mad, floor);
  return stats;
}

double DirectedDeviation(double x, const RobustStats& stats,
                         DeviationSide side) {
  // Clamped so that extreme inputs saturate instead of overflowing.
  constexpr double kLimit = 1e9;
  const double z = std::clamp((x - stats.median) / stats.unit, -kLimit, kLimit);
  return side == DeviationSide::kHigh ? z : -z;
}

double BlendDeviation(double current, std::span<const double> recent,
                      double single_bucket_weight) {
  // A bin on the benign side scores zero whatever its neighbours did.
  if (!(current > 0.0)) return 0.0;
  double multi = 0.0;
  if (!recent.empty()) {
    multi = std::accumulate(recent.begin(), recent.end(), 0.0) /
            static_cast<double>(recent.size());
  }
  return single_bucket_weight * current +
         (1.0 - single_bucket_weight) * std::max(0.0, multi);
}

ReferenceDetector::ReferenceDetector(DetectorConfig config, Millis eta)
    : config_(config) {
  config_.Validate(eta);
}

std::optional<double> ReferenceDetector::ScoreFeature(Feature f, double value,
                                                      double* deviation) const {
  const auto& base = baseline_[f];
  if (base.empty()) {
    *deviation = 0.0;
    return 0.0;
  }
  const std::vector<double> window(base.begin(), base.end());
  const RobustStats stats = ComputeRobustStats(window, config_);
  *deviation = DirectedDeviation(value, stats, config_.side[f]);

  // Trailing window of directed deviations, the current one included.
  const auto& hist = recent_[f];
  const std::size_t keep =
      std::min(hist.size(), config_.multi_bucket_window - 1);
  std::vector<double> recent(hist.end() - static_cast<std::ptrdiff_t>(keep),
                             hist.end());
  recent.push_back(*deviation);
  const double blended =
      BlendDeviation(*deviation, recent, config_.single_bucket_weight);
  return Squash(blended);
}

ScoreVector ReferenceDetector::Score(const FeatureVector& x) const {
  ScoreVector scores;
  for (Feature f : kAllFeatures) {
    if (!x.values[f]) continue;
    if (warming_up()) {
      scores.a[f] = 0.0;
      continue;
    }
    double deviation = 0.0;
    scores.a[f] = ScoreFeature(f, *x.values[f], &deviation);
  }
  return scores;
}

Detection ReferenceDetector::Observe(const FeatureVector& x) {
  Detection d;
  const bool warmup = warming_up();
  for (Feature f : kAllFeatures) {
    if (!x.values[f]) continue;
    double deviation = 0.0;
    const auto score = ScoreFeature(f, *x.values[f], &deviation);
    d.scores.a[f] = warmup ? 0.0 : *score;
    // Deviations seen during warmup seed the multi-bucket history.
    auto& hist = recent_[f];
    hist.push_back(deviation);
    while (hist.size() > config_.multi_bucket_window) hist.pop_front();
  }
  d.labels = Binarize(d.scores, config_.theta);
  if (warmup || !d.labels.any()) UpdateBaseline(x);
  ++observed_;
  return d;
}

void ReferenceDetector::UpdateBaseline(const FeatureVector& x) {
  for (Feature f : kAllFeatures) {
    if (!x.values[f]) continue;
    auto& base = baseline_[f];
    base.push_back(*x.values[f]);
    while (base.size() > config_.baseline_window) base.pop_front();
  }
}

}  // namespace ipmon
