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

#include "ipmon/simulator.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace ipmon {
namespace {

using Json = nlohmann::ordered_json;

constexpr Millis kMinute = 60'000;
// Traffic before the first window lets the detector warm up and fill its
// baseline; traffic after the last one shows the recovery.
constexpr Millis kLead = 5 * kMinute;
constexpr Millis kTail = 3 * kMinute;

std::string TxId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tx%09zu", index);
  return buf;
}

Scenario MakeScenario(std::string name, std::string description,
                          std::string provenance, Millis window_minutes,
                          std::vector<Feature> targets, double multiplier,
                          double drop) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.provenance = std::move(provenance);
  InjectionWindow w;
  w.start_ms = kLead;
  w.end_ms = kLead + window_minutes * kMinute;
  w.targets = std::move(targets);
  w.delay_multiplier = multiplier;
  w.drop_fraction = drop;
  w.label = s.name;
  s.windows.push_back(w);
  s.total_duration_ms = w.end_ms + kTail;
  return s;
}

std::vector<Scenario> MakeBuiltins() {
  using F = Feature;
  std::vector<Scenario> out;
  out.push_back(MakeScenario(
      "s1-mild-internal", "mild stress on one core CSM component",
      "testbed scenario 1: mild internal stress (7 min)", 7,
      {F::kD1, F::kD3}, 2.0, 0.0));
  out.push_back(MakeScenario(
      "s2-multi-internal", "moderate stress on several CSM components",
      "testbed scenario 2: stress on multiple internal components (5 min)", 5,
      {F::kD1, F::kD3}, 2.5, 0.13));
  out.push_back(MakeScenario(
      "s3-external", "participants outside the CSM answer slowly",
      "testbed scenario 3: external participant disturbances (16 min)", 16,
      {F::kD2}, 3.0, 0.13));
  out.push_back(MakeScenario(
      "s4-heavy-internal", "severe degradation of several CSM components",
      "testbed scenario 4: heavy internal stress (21 min)", 21,
      {F::kD1, F::kD3}, 5.0, 0.32));
  out.push_back(MakeScenario(
      "nsp-incident",
      "network service provider outage between the CSM and participants",
      "production network service provider incident (~15 min, 78.62% "
      "settled-volume drop, d2 above 10 s)",
      15, {F::kD2}, 18.0, 0.7862));
  // Production volume is higher than on the testbed.
  out.back().profile.arrival_rate = 400;
  return out;
}

Json EncodeWindow(const InjectionWindow& w) {
  Json j;
  j["start_ms"] = w.start_ms;
  j["end_ms"] = w.end_ms;
  Json targets = Json::array();
  for (Feature f : w.targets) targets.push_back(ToString(f));
  j["targets"] = targets;
  j["label"] = w.label;
  j["delay_multiplier"] = w.delay_multiplier;
  j["drop_fraction"] = w.drop_fraction;
  return j;
}

InjectionWindow DecodeWindow(const Json& j) {
  InjectionWindow w;
  w.start_ms = j.at("start_ms").get<Millis>();
  w.end_ms = j.at("end_ms").get<Millis>();
  for (const auto& t : j.at("targets")) {
    const auto f = ParseFeature(t.get<std::string>());
    if (!f) throw ParseError("unknown target '" + t.get<std::string>() + "'");
    w.targets.push_back(*f);
  }
  w.label = j.value("label", std::string());
  w.delay_multiplier = j.value("delay_multiplier", 1.0);
  w.drop_fraction = j.value("drop_fraction", 0.0);
  return w;
}

Json EncodeLogNormal(const LogNormalLaw& d) {
  Json j;
  j["median_ms"] = d.median_ms;
  j["gsd"] = d.gsd;
  return j;
}

LogNormalLaw DecodeLogNormal(const Json& j, LogNormalLaw fallback) {
  fallback.median_ms = j.value("median_ms", fallback.median_ms);
  fallback.gsd = j.value("gsd", fallback.gsd);
  return fallback;
}

}  // namespace

void TrafficProfile::Validate() const {
  if (!(arrival_rate > 0)) throw std::invalid_argument("arrival_rate must be > 0");
  for (const LogNormalLaw* d : {&d1, &d2, &d3}) {
    if (!(d->median_ms > 0)) throw std::invalid_argument("medians must be > 0");
    if (!(d->gsd >= 1)) {
      throw std::invalid_argument("geometric std must be >= 1");
    }
  }
  if (!(settle_probability >= 0 && settle_probability <= 1)) {
    throw std::invalid_argument("settle_probability must lie in [0, 1]");
  }
}

bool InjectionWindow::Targets(Feature f) const {
  return std::find(targets.begin(), targets.end(), f) != targets.end();
}

void InjectionWindow::Validate() const {
  if (start_ms >= end_ms) throw std::invalid_argument("window start >= end");
  if (!(delay_multiplier >= 1)) {
    throw std::invalid_argument("delay_multiplier must be >= 1");
  }
  if (!(drop_fraction >= 0 && drop_fraction <= 1)) {
    throw std::invalid_argument("drop_fraction must lie in [0, 1]");
  }
  for (Feature f : targets) {
    if (f == Feature::kV) {
      throw std::invalid_argument("window targets must be delta features");
    }
  }
}

void Scenario::Validate() const {
  profile.Validate();
  if (total_duration_ms <= 0) {
    throw std::invalid_argument("total_duration_ms must be > 0");
  }
  for (const auto& w : windows) {
    w.Validate();
    if (w.start_ms < 0 || w.end_ms > total_duration_ms) {
      throw std::invalid_argument("window '" + w.label +
                                  "' lies outside the scenario duration");
    }
  }
}

SimulationOutput Generate(const Scenario& scenario_def) {
  scenario_def.Validate();
  const TrafficProfile& prof = scenario_def.profile;
  std::mt19937_64 rng(prof.seed);
  std::exponential_distribution<double> gap(prof.arrival_rate / 1000.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::array<const LogNormalLaw*, 3> laws = {&prof.d1, &prof.d2,
                                                    &prof.d3};

  SimulationOutput out;
  out.truth.scenario = scenario_def.name;
  out.truth.seed = prof.seed;
  out.truth.total_duration_ms = scenario_def.total_duration_ms;
  out.truth.windows = scenario_def.windows;

  // The capture ends at total_duration_ms: later legs are cut.
  std::vector<TraceEvent> events;
  bool cut = false;
  auto emit = [&](const std::string& id, Leg leg, Millis t) {
    if (t >= scenario_def.total_duration_ms) {
      cut = true;
      return;
    }
    events.push_back(MakeEvent(id, leg, t));
  };

  double clock_ms = 0;
  for (std::size_t index = 0;; ++index) {
    // Fixed draw count per transaction.
    clock_ms += gap(rng);
    std::array<double, 3> z{};
    for (double& zi : z) zi = normal(rng);
    const double u_settle = unit(rng);
    const double u_drop = unit(rng);

    const Millis arrival = static_cast<Millis>(std::floor(clock_ms));
    if (arrival >= scenario_def.total_duration_ms) break;

    std::array<double, 3> factor = {1.0, 1.0, 1.0};
    double keep = 1.0;
    for (const auto& w : scenario_def.windows) {
      if (!w.Covers(arrival)) continue;
      for (std::size_t j = 0; j < kDeltaFeatures.size(); ++j) {
        if (w.Targets(kDeltaFeatures[j])) factor[j] *= w.delay_multiplier;
      }
      keep *= 1.0 - w.drop_fraction;
    }

    std::array<Millis, 3> delta{};
    for (std::size_t j = 0; j < 3; ++j) {
      const double sample =
          laws[j]->median_ms * std::exp(std::log(laws[j]->gsd) * z[j]);
      delta[j] = static_cast<Millis>(std::llround(sample * factor[j]));
    }

    SimulatedTransaction tx;
    tx.tx_id = TxId(index);
    tx.arrival = arrival;
    tx.delta1 = delta[0];
    tx.delta2 = delta[1];
    tx.delta3 = delta[2];

    cut = false;
    const Millis t_out008 = arrival + delta[0];
    const Millis t_in002 = t_out008 + delta[1];
    const Millis t_out002 = t_in002 + delta[2];
    emit(tx.tx_id, Leg::kInbound008, arrival);
    emit(tx.tx_id, Leg::kOutbound008, t_out008);
    if (u_drop < 1.0 - keep) {
      // Beneficiary timeout: the reply never reaches the CSM.
      tx.outcome = TransactionOutcome::kExpired;
    } else if (u_settle >= prof.settle_probability) {
      tx.outcome = TransactionOutcome::kRejected;
      emit(tx.tx_id, Leg::kInbound002, t_in002);
      emit(tx.tx_id, Leg::kRejectionRelay, t_out002);
    } else {
      tx.outcome = TransactionOutcome::kSettled;
      emit(tx.tx_id, Leg::kInbound002, t_in002);
      emit(tx.tx_id, Leg::kOutbound002, t_out002);
    }
    tx.truncated = cut;
    out.transactions.push_back(std::move(tx));
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  out.events = std::move(events);
  return out;
}

const std::vector<Scenario>& BuiltinScenarios() {
  static const std::vector<Scenario> kBuiltins = MakeBuiltins();
  return kBuiltins;
}

std::optional<Scenario> FindBuiltinScenario(std::string_view name) {
  for (const auto& s : BuiltinScenarios()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::vector<std::string> BuiltinScenarioNames() {
  std::vector<std::string> names;
  for (const auto& s : BuiltinScenarios()) names.push_back(s.name);
  return names;
}

Scenario ParseScenarioConfig(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    Scenario s;
    s.name = j.value("name", std::string("custom"));
    s.description = j.value("description", std::string());
    s.provenance = j.value("provenance", std::string("user config"));
    s.total_duration_ms = j.at("duration_ms").get<Millis>();
    if (j.contains("profile")) {
      const Json& p = j.at("profile");
      TrafficProfile& prof = s.profile;
      prof.arrival_rate = p.value("arrival_rate", prof.arrival_rate);
      if (p.contains("d1")) prof.d1 = DecodeLogNormal(p.at("d1"), prof.d1);
      if (p.contains("d2")) prof.d2 = DecodeLogNormal(p.at("d2"), prof.d2);
      if (p.contains("d3")) prof.d3 = DecodeLogNormal(p.at("d3"), prof.d3);
      prof.settle_probability =
          p.value("settle_probability", prof.settle_probability);
      prof.seed = p.value("seed", prof.seed);
    }
    if (j.contains("windows")) {
      for (const auto& w : j.at("windows")) s.windows.push_back(DecodeWindow(w));
    }
    s.Validate();
    return s;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  }
}

std::string EncodeScenarioConfig(const Scenario& scenario_def) {
  Json j;
  j["name"] = scenario_def.name;
  j["description"] = scenario_def.description;
  j["provenance"] = scenario_def.provenance;
  j["duration_ms"] = scenario_def.total_duration_ms;
  Json p;
  p["arrival_rate"] = scenario_def.profile.arrival_rate;
  p["d1"] = EncodeLogNormal(scenario_def.profile.d1);
  p["d2"] = EncodeLogNormal(scenario_def.profile.d2);
  p["d3"] = EncodeLogNormal(scenario_def.profile.d3);
  p["settle_probability"] = scenario_def.profile.settle_probability;
  p["seed"] = scenario_def.profile.seed;
  j["profile"] = p;
  Json windows = Json::array();
  for (const auto& w : scenario_def.windows) windows.push_back(EncodeWindow(w));
  j["windows"] = windows;
  return j.dump(2);
}

std::string EncodeGroundTruth(const GroundTruth& truth) {
  Json j;
  j["scenario"] = truth.scenario;
  j["seed"] = truth.seed;
  j["duration_ms"] = truth.total_duration_ms;
  Json windows = Json::array();
  for (const auto& w : truth.windows) windows.push_back(EncodeWindow(w));
  j["windows"] = windows;
  return j.dump(2);
}

GroundTruth DecodeGroundTruth(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    GroundTruth t;
    t.scenario = j.value("scenario", std::string());
    t.seed = j.value("seed", std::uint64_t{0});
    t.total_duration_ms = j.value("duration_ms", Millis{0});
    for (const auto& w : j.at("windows")) t.windows.push_back(DecodeWindow(w));
    return t;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("ground truth: ") + e.what());
  }
}

}  // namespace ipmon
