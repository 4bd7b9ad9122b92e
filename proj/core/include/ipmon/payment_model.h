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

// Message- and transaction-level vocabulary of an SCT Inst flow as seen from
// the clearing and settlement mechanism (CSM).
//
// A settled transaction crosses the CSM boundary four times:
//
//   originator PSP --pacs.008--> CSM --pacs.008--> beneficiary PSP
//   originator PSP <--pacs.002-- CSM <--pacs.002-- beneficiary PSP
//                                    (confirmation sent to both parties)
//
// The gaps between these legs are the three processing-time features.

#ifndef IPMON_PAYMENT_MODEL_H_
#define IPMON_PAYMENT_MODEL_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ipmon {

// Integer milliseconds since the epoch (or since simulation start).
using Millis = std::int64_t;

enum class MessageKind { kPacs008, kPacs002 };

// Observed from the CSM's perspective.
enum class Direction { kInboundToCsm, kOutboundFromCsm };

enum class Counterparty { kOriginator, kBeneficiary, kBoth };

enum class TransactionOutcome { kSettled, kExpired, kRejected, kFailed };

// The legal (kind, direction, counterparty) signatures.
enum class Leg {
  kInbound008,      // pacs.008 from the originator PSP
  kOutbound008,     // pacs.008 forwarded to the beneficiary PSP
  kInbound002,      // pacs.002 reply from the beneficiary PSP
  kOutbound002,     // settlement confirmations to both PSPs
  kRejectionRelay,  // negative pacs.002 relayed to the originator only
};

struct TraceEvent {
  std::string tx_id;
  MessageKind kind = MessageKind::kPacs008;
  Direction direction = Direction::kInboundToCsm;
  Millis timestamp = 0;
  Counterparty counterparty = Counterparty::kOriginator;

  bool operator==(const TraceEvent&) const = default;
};

// A settled instant payment reduced to its three phase durations.
//  delta1: CSM conditional phase  (outbound pacs.008 - inbound pacs.008)
//  delta2: time outside the CSM   (inbound pacs.002 - outbound pacs.008)
//  delta3: CSM settlement phase   (outbound pacs.002 - inbound pacs.002)
struct SettledPayment {
  std::string tx_id;
  Millis settled_at = 0;
  Millis delta1 = 0;
  Millis delta2 = 0;
  Millis delta3 = 0;

  // Lower bound on the end-to-end processing time.
  Millis total() const { return delta1 + delta2 + delta3; }

  bool operator==(const SettledPayment&) const = default;
};

struct EventValidation {
  bool ok = true;
  // Offending field ("timestamp", "leg signature"); empty when ok.
  std::string field;
  std::string message;

  static EventValidation Ok() { return {}; }
  static EventValidation Violation(std::string field, std::string message) {
    return {false, std::move(field), std::move(message)};
  }
};

// Maps a (kind, direction, counterparty) triple to its leg, or nullopt when
// the combination never occurs in the core flow.
std::optional<Leg> LegOf(MessageKind kind, Direction direction,
                         Counterparty counterparty);
inline std::optional<Leg> LegOf(const TraceEvent& e) {
  return LegOf(e.kind, e.direction, e.counterparty);
}

EventValidation ValidateEvent(const TraceEvent& e);

// Builds the event that realizes `leg` for a transaction.
TraceEvent MakeEvent(std::string tx_id, Leg leg, Millis timestamp);

// Wire tokens of the JSONL trace record.
std::string_view ToToken(MessageKind kind);
std::string_view ToToken(Direction direction);
std::string_view ToToken(Counterparty counterparty);
std::string_view ToString(TransactionOutcome outcome);
std::string_view ToString(Leg leg);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inverse of ToToken; throws ParseError on an unknown token.
MessageKind ParseMessageKind(std::string_view token);
Direction ParseDirection(std::string_view token);
Counterparty ParseCounterparty(std::string_view token);

}  // namespace ipmon

#endif  // IPMON_PAYMENT_MODEL_H_
