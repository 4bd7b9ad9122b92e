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

#include "ipmon/aggregator.h"

#include <algorithm>
#include <numeric>
#include <string>

namespace ipmon {
namespace {

// Floor division for a possibly negative numerator and positive divisor.
std::int64_t FloorDiv(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && (num < 0)) --q;
  return q;
}

}  // namespace

std::string_view ToString(AggregationFn fn) {
  return fn == AggregationFn::kMean ? "mean" : "median";
}

AggregationFn ParseAggregationFn(std::string_view token) {
  if (token == "mean") return AggregationFn::kMean;
  if (token == "median") return AggregationFn::kMedian;
  throw ParseError("unknown aggregation function '" + std::string(token) + "'");
}

void AggregationConfig::Validate() const {
  if (eta <= 0) throw std::invalid_argument("eta must be positive");
  if (omega && *omega < alpha) {
    throw std::invalid_argument("omega must be >= alpha");
  }
}

std::int64_t BinIndex(Millis settled_at, const AggregationConfig& cfg) {
  if (settled_at < cfg.alpha) {
    throw OutOfRangeError("timestamp " + std::to_string(settled_at) +
                          " precedes alpha " + std::to_string(cfg.alpha));
  }
  return FloorDiv(settled_at - cfg.alpha, cfg.eta) + 1;
}

std::int64_t BinCount(const AggregationConfig& cfg) {
  if (!cfg.omega) {
    throw StreamingModeError("bin count is undefined without omega");
  }
  const std::int64_t span = *cfg.omega - cfg.alpha;
  return (span + cfg.eta - 1) / cfg.eta;
}

double Median(std::span<double> values) {
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return lower + (upper - lower) / 2.0;
}

AggregatedObservation Aggregate(std::span<const SettledPayment> payments,
                                AggregationFn fn, Millis tau) {
  AggregatedObservation obs;
  obs.tau = tau;
  obs.v = static_cast<std::int64_t>(payments.size());
  if (payments.empty()) return obs;

  const double n = static_cast<double>(payments.size());
  DeltaTriple agg;
  if (fn == AggregationFn::kMean) {
    double s1 = 0, s2 = 0, s3 = 0;
    for (const auto& p : payments) {
      s1 += static_cast<double>(p.delta1);
      s2 += static_cast<double>(p.delta2);
      s3 += static_cast<double>(p.delta3);
    }
    agg = {s1 / n, s2 / n, s3 / n};
  } else {
    std::vector<double> col(payments.size());
    auto column_median = [&](auto field) {
      std::transform(payments.begin(), payments.end(), col.begin(),
                     [&](const SettledPayment& p) {
                       return static_cast<double>(p.*field);
                     });
      return Median(col);
    };
    agg = {column_median(&SettledPayment::delta1),
           column_median(&SettledPayment::delta2),
           column_median(&SettledPayment::delta3)};
  }
  obs.p_tilde = agg;
  return obs;
}

std::vector<AggregatedObservation> Resample(
    std::span<const SettledPayment> payments, const AggregationConfig& cfg) {
  cfg.Validate();
  const std::int64_t m = BinCount(cfg);
  std::vector<std::vector<SettledPayment>> bins(static_cast<std::size_t>(m));
  for (const auto& p : payments) {
    const std::int64_t k = BinIndex(p.settled_at, cfg);
    if (k > m) {
      throw OutOfRangeError("timestamp " + std::to_string(p.settled_at) +
                            " is past omega");
    }
    bins[static_cast<std::size_t>(k - 1)].push_back(p);
  }
  std::vector<AggregatedObservation> out;
  out.reserve(bins.size());
  for (std::int64_t k = 1; k <= m; ++k) {
    out.push_back(Aggregate(bins[static_cast<std::size_t>(k - 1)], cfg.agg_fn,
                            BinStart(k, cfg)));
  }
  return out;
}

Aggregator::Aggregator(AggregationConfig config) : config_(config) {
  config_.Validate();
}

bool Aggregator::Add(const SettledPayment& payment) {
  if (payment.settled_at < config_.alpha) return false;
  const std::int64_t k = BinIndex(payment.settled_at, config_);
  if (k < next_bin_) return false;
  if (config_.omega && k > BinCount(config_)) return false;
  open_[k].payments.push_back(payment);
  return true;
}

std::vector<AggregatedObservation> Aggregator::CloseBins(Millis watermark) {
  std::vector<AggregatedObservation> out;
  std::int64_t last = FloorDiv(watermark - config_.alpha, config_.eta);
  if (config_.omega) last = std::min(last, BinCount(config_));
  for (; next_bin_ <= last; ++next_bin_) {
    auto it = open_.find(next_bin_);
    if (it == open_.end()) {
      out.push_back(Aggregate({}, config_.agg_fn, BinStart(next_bin_, config_)));
      continue;
    }
    out.push_back(Aggregate(it->second.payments, config_.agg_fn,
                            BinStart(next_bin_, config_)));
    open_.erase(it);
  }
  return out;
}

}  // namespace ipmon
