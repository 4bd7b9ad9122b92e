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

// JSONL encodings of every stage boundary. Keys are written in a fixed
// order, so equal records always serialize to identical bytes.
//
//   trace:        {"tx_id","kind","dir","ts_ms","cp"}
//   payment:      {"tx_id","settled_ms","d1_ms","d2_ms","d3_ms"}
//   observation:  {"tau_ms","d1","d2","d3","v"}          (deltas may be null)
//   score:        {"tau_ms","a":{d1,d2,d3,v},"y":{d1,d2,d3,v}}
//   verdict:      {"tau_ms","localization","severity","impact",
//                  "timeout_risk","rules","a","y"}

#ifndef IPMON_RECORDS_H_
#define IPMON_RECORDS_H_

#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ipmon/aggregator.h"
#include "ipmon/detector.h"
#include "ipmon/explainer.h"
#include "ipmon/payment_model.h"

namespace ipmon {

struct ScoreRecord {
  Millis tau = 0;
  Detection detection;
};

std::string EncodeEvent(const TraceEvent& e);
std::string EncodePayment(const SettledPayment& p);
std::string EncodeObservation(const AggregatedObservation& o);
std::string EncodeScore(const ScoreRecord& s);
std::string EncodeVerdict(const Verdict& v);

// Decoders throw ParseError on malformed input.
TraceEvent DecodeEvent(std::string_view line);
SettledPayment DecodePayment(std::string_view line);
AggregatedObservation DecodeObservation(std::string_view line);
ScoreRecord DecodeScore(std::string_view line);
Verdict DecodeVerdict(std::string_view line);

// Thrown when a line of a JSONL input cannot be decoded. Carries the 1-based
// line number.
class LineError : public ParseError {
 public:
  LineError(std::size_t line, const std::string& what)
      : ParseError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Calls `fn(line, line_number)` for every non-blank line of `in`.
void ForEachLine(std::istream& in,
                 const std::function<void(std::string_view, std::size_t)>& fn);

}  // namespace ipmon

#endif  // IPMON_RECORDS_H_
