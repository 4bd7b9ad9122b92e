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

#include "ipmon/records.h"

#include "json.hpp"

namespace ipmon {
namespace {

using Json = nlohmann::ordered_json;

Json OptionalNumber(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::optional<double> ReadOptionalNumber(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) {
    throw ParseError(std::string("field '") + key + "' is not a number");
  }
  return v.get<double>();
}

Json EncodeScores(const ScoreVector& a) {
  Json j = Json::object();
  for (Feature f : kAllFeatures) j[std::string(ToString(f))] = OptionalNumber(a.a[f]);
  return j;
}

Json EncodeLabels(const LabelVector& y) {
  Json j = Json::object();
  for (Feature f : kAllFeatures) j[std::string(ToString(f))] = y.y[f] ? 1 : 0;
  return j;
}

ScoreVector DecodeScores(const Json& j) {
  ScoreVector a;
  for (Feature f : kAllFeatures) {
    a.a[f] = ReadOptionalNumber(j, std::string(ToString(f)).c_str());
  }
  return a;
}

LabelVector DecodeLabels(const Json& j) {
  LabelVector y;
  for (Feature f : kAllFeatures) {
    const int bit = j.at(std::string(ToString(f))).get<int>();
    if (bit != 0 && bit != 1) throw ParseError("label must be 0 or 1");
    y.y[f] = bit == 1;
  }
  return y;
}

template <typename Fn>
auto Decode(std::string_view line, Fn&& fn) {
  try {
    const Json j = Json::parse(line);
    if (!j.is_object()) throw ParseError("record is not a JSON object");
    return fn(j);
  } catch (const Json::exception& e) {
    throw ParseError(e.what());
  }
}

}  // namespace

std::string EncodeEvent(const TraceEvent& e) {
  Json j;
  j["tx_id"] = e.tx_id;
  j["kind"] = ToToken(e.kind);
  j["dir"] = ToToken(e.direction);
  j["ts_ms"] = e.timestamp;
  j["cp"] = ToToken(e.counterparty);
  return j.dump();
}

std::string EncodePayment(const SettledPayment& p) {
  Json j;
  j["tx_id"] = p.tx_id;
  j["settled_ms"] = p.settled_at;
  j["d1_ms"] = p.delta1;
  j["d2_ms"] = p.delta2;
  j["d3_ms"] = p.delta3;
  return j.dump();
}

std::string EncodeObservation(const AggregatedObservation& o) {
  Json j;
  j["tau_ms"] = o.tau;
  if (o.p_tilde) {
    j["d1"] = o.p_tilde->d1;
    j["d2"] = o.p_tilde->d2;
    j["d3"] = o.p_tilde->d3;
  } else {
    j["d1"] = nullptr;
    j["d2"] = nullptr;
    j["d3"] = nullptr;
  }
  j["v"] = o.v;
  return j.dump();
}

std::string EncodeScore(const ScoreRecord& s) {
  Json j;
  j["tau_ms"] = s.tau;
  j["a"] = EncodeScores(s.detection.scores);
  j["y"] = EncodeLabels(s.detection.labels);
  return j.dump();
}

std::string EncodeVerdict(const Verdict& v) {
  Json j;
  j["tau_ms"] = v.tau;
  j["localization"] =
      v.localization ? std::string(ToString(*v.localization)) : "none";
  j["severity"] = ToString(v.severity);
  j["impact"] = v.business_impact;
  j["timeout_risk"] = v.timeout_risk;
  j["rules"] = v.triggering_rules;
  j["a"] = EncodeScores(v.scores);
  j["y"] = EncodeLabels(v.labels);
  return j.dump();
}

TraceEvent DecodeEvent(std::string_view line) {
  return Decode(line, [](const Json& j) {
    TraceEvent e;
    e.tx_id = j.at("tx_id").get<std::string>();
    e.kind = ParseMessageKind(j.at("kind").get<std::string>());
    e.direction = ParseDirection(j.at("dir").get<std::string>());
    const Json& ts = j.at("ts_ms");
    if (!ts.is_number_integer()) throw ParseError("ts_ms must be an integer");
    e.timestamp = ts.get<Millis>();
    e.counterparty = ParseCounterparty(j.at("cp").get<std::string>());
    return e;
  });
}

SettledPayment DecodePayment(std::string_view line) {
  return Decode(line, [](const Json& j) {
    SettledPayment p;
    p.tx_id = j.at("tx_id").get<std::string>();
    p.settled_at = j.at("settled_ms").get<Millis>();
    p.delta1 = j.at("d1_ms").get<Millis>();
    p.delta2 = j.at("d2_ms").get<Millis>();
    p.delta3 = j.at("d3_ms").get<Millis>();
    return p;
  });
}

AggregatedObservation DecodeObservation(std::string_view line) {
  return Decode(line, [](const Json& j) {
    AggregatedObservation o;
    o.tau = j.at("tau_ms").get<Millis>();
    o.v = j.at("v").get<std::int64_t>();
    const auto d1 = ReadOptionalNumber(j, "d1");
    const auto d2 = ReadOptionalNumber(j, "d2");
    const auto d3 = ReadOptionalNumber(j, "d3");
    if (d1 && d2 && d3) {
      o.p_tilde = DeltaTriple{*d1, *d2, *d3};
    } else if (d1 || d2 || d3) {
      throw ParseError("delta aggregates must be all present or all null");
    }
    if ((o.v > 0) != o.p_tilde.has_value()) {
      throw ParseError("delta aggregates present iff v > 0");
    }
    return o;
  });
}

ScoreRecord DecodeScore(std::string_view line) {
  return Decode(line, [](const Json& j) {
    ScoreRecord s;
    s.tau = j.at("tau_ms").get<Millis>();
    s.detection.scores = DecodeScores(j.at("a"));
    s.detection.labels = DecodeLabels(j.at("y"));
    return s;
  });
}

Verdict DecodeVerdict(std::string_view line) {
  return Decode(line, [](const Json& j) {
    Verdict v;
    v.tau = j.at("tau_ms").get<Millis>();
    const std::string loc = j.at("localization").get<std::string>();
    if (loc != "none") v.localization = ParseLocalization(loc);
    v.severity = ParseSeverity(j.at("severity").get<std::string>());
    v.business_impact = j.at("impact").get<bool>();
    v.timeout_risk = j.at("timeout_risk").get<bool>();
    v.triggering_rules = j.at("rules").get<std::vector<std::string>>();
    v.scores = DecodeScores(j.at("a"));
    if (j.contains("y")) v.labels = DecodeLabels(j.at("y"));
    return v;
  });
}

void ForEachLine(std::istream& in,
                 const std::function<void(std::string_view, std::size_t)>& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, number);
  }
}

}  // namespace ipmon
