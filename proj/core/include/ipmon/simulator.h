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

// Synthetic instant-payment traffic with controlled disturbances.
//
// Transactions arrive as a Poisson process. Each draws log-normal phase
// durations; transactions arriving inside an injection window get their
// targeted durations stretched and may be turned into beneficiary timeouts
// (no inbound pacs.002, hence no settlement).

#ifndef IPMON_SIMULATOR_H_
#define IPMON_SIMULATOR_H_

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ipmon/detector.h"
#include "ipmon/payment_model.h"

namespace ipmon {

// Log-normal law given by its median and geometric standard deviation.
struct LogNormalLaw {
  double median_ms = 1;
  double gsd = 1.5;
};

struct TrafficProfile {
  // Transactions per second.
  double arrival_rate = 100;
  LogNormalLaw d1{40, 1.3};
  LogNormalLaw d2{600, 1.5};
  LogNormalLaw d3{50, 1.3};
  // Outside windows, the rest are rejected by the beneficiary.
  double settle_probability = 1.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct InjectionWindow {
  Millis start_ms = 0;
  Millis end_ms = 0;
  // Delta features only.
  std::vector<Feature> targets;
  double delay_multiplier = 1.0;
  double drop_fraction = 0.0;
  std::string label;

  bool Covers(Millis t) const { return t >= start_ms && t < end_ms; }
  bool Targets(Feature f) const;
  void Validate() const;
};

struct Scenario {
  std::string name;
  std::string description;
  // Where the scenario comes from (for `scenarios` listings).
  std::string provenance;
  TrafficProfile profile;
  std::vector<InjectionWindow> windows;
  Millis total_duration_ms = 0;

  // Throws std::invalid_argument.
  void Validate() const;
};

struct SimulatedTransaction {
  std::string tx_id;
  Millis arrival = 0;
  TransactionOutcome outcome = TransactionOutcome::kSettled;
  // Realized durations; delta2/delta3 are meaningless for expired ones.
  Millis delta1 = 0;
  Millis delta2 = 0;
  Millis delta3 = 0;
  // Some legs fall after the end of the capture and were not emitted.
  bool truncated = false;
};

struct GroundTruth {
  std::string scenario;
  std::uint64_t seed = 0;
  Millis total_duration_ms = 0;
  std::vector<InjectionWindow> windows;
};

struct SimulationOutput {
  // Ordered by timestamp; every event lies in [0, total_duration_ms).
  std::vector<TraceEvent> events;
  std::vector<SimulatedTransaction> transactions;
  GroundTruth truth;
};

// Deterministic in (scenario, seed). The number of random draws per transaction
// does not depend on the windows, so an identity window (multiplier 1, drop
// 0) leaves the event stream unchanged.
SimulationOutput Generate(const Scenario& scenario_def);

// s1-mild-internal, s2-multi-internal, s3-external, s4-heavy-internal,
// nsp-incident. Window multipliers and drop fractions of s1-s4 are
// calibration constants for the reference detector.
const std::vector<Scenario>& BuiltinScenarios();
std::optional<Scenario> FindBuiltinScenario(std::string_view name);
std::vector<std::string> BuiltinScenarioNames();

// Declarative scenario file (JSON). See docs/configuration.md.
Scenario ParseScenarioConfig(std::string_view text);
std::string EncodeScenarioConfig(const Scenario& scenario_def);

std::string EncodeGroundTruth(const GroundTruth& truth);
GroundTruth DecodeGroundTruth(std::string_view text);

}  // namespace ipmon

#endif  // IPMON_SIMULATOR_H_
