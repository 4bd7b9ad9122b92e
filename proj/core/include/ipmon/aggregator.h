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

// Resampling of the irregular settled-payment stream into a regular series.
//
// Bin k (k >= 1) covers [alpha + (k-1)*eta, alpha + k*eta) and is represented
// by tau_k = alpha + (k-1)*eta. Each bin carries the component-wise aggregate
// of the (delta1, delta2, delta3) triples settled in it and the count v.
// Empty bins are emitted with v = 0 and no delta aggregate.

#ifndef IPMON_AGGREGATOR_H_
#define IPMON_AGGREGATOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ipmon/payment_model.h"

namespace ipmon {

enum class AggregationFn { kMean, kMedian };

std::string_view ToString(AggregationFn fn);
AggregationFn ParseAggregationFn(std::string_view token);

struct AggregationConfig {
  Millis eta = 1000;
  Millis alpha = 0;
  // Absent in streaming mode.
  std::optional<Millis> omega;
  AggregationFn agg_fn = AggregationFn::kMedian;

  void Validate() const;
};

struct DeltaTriple {
  double d1 = 0;
  double d2 = 0;
  double d3 = 0;

  bool operator==(const DeltaTriple&) const = default;
};

struct AggregatedObservation {
  Millis tau = 0;
  std::optional<DeltaTriple> p_tilde;
  std::int64_t v = 0;

  bool operator==(const AggregatedObservation&) const = default;
};

class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class StreamingModeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// k = floor((settled_at - alpha) / eta) + 1. Throws OutOfRangeError when
// settled_at < alpha.
std::int64_t BinIndex(Millis settled_at, const AggregationConfig& cfg);

// m = ceil((omega - alpha) / eta). Throws StreamingModeError without omega.
std::int64_t BinCount(const AggregationConfig& cfg);

inline Millis BinStart(std::int64_t k, const AggregationConfig& cfg) {
  return cfg.alpha + (k - 1) * cfg.eta;
}

// Median of a sample; the even-count median averages the two middle values.
// `values` is reordered. Undefined for an empty span.
double Median(std::span<double> values);

// Aggregates the payments of one bin. Empty input yields v = 0 and no
// p_tilde.
AggregatedObservation Aggregate(std::span<const SettledPayment> payments,
                                AggregationFn fn, Millis tau);

// Batch resampling over [alpha, omega); requires omega. Payments outside the
// range throw OutOfRangeError.
std::vector<AggregatedObservation> Resample(
    std::span<const SettledPayment> payments, const AggregationConfig& cfg);

// Streaming resampler. Payments are buffered per bin; CloseBins emits every
// bin whose interval end is <= the watermark, in index order, exactly once,
// including empty bins between populated ones.
class Aggregator {
 public:
  explicit Aggregator(AggregationConfig config);

  // Returns false (and drops the payment) when its bin is already closed or
  // when settled_at < alpha.
  bool Add(const SettledPayment& payment);

  std::vector<AggregatedObservation> CloseBins(Millis watermark);

  // Index of the next bin to be emitted.
  std::int64_t next_bin() const { return next_bin_; }
  const AggregationConfig& config() const { return config_; }

 private:
  struct BinBuffer {
    std::vector<SettledPayment> payments;
  };

  AggregationConfig config_;
  std::int64_t next_bin_ = 1;
  std::map<std::int64_t, BinBuffer> open_;
};

}  // namespace ipmon

#endif  // IPMON_AGGREGATOR_H_
