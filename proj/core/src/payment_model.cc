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

#include "ipmon/payment_model.h"

#include <string>
#include <utility>

namespace ipmon {

std::optional<Leg> LegOf(MessageKind kind, Direction direction,
                         Counterparty counterparty) {
  const bool inbound = direction == Direction::kInboundToCsm;
  if (kind == MessageKind::kPacs008) {
    if (inbound && counterparty == Counterparty::kOriginator) {
      return Leg::kInbound008;
    }
    if (!inbound && counterparty == Counterparty::kBeneficiary) {
      return Leg::kOutbound008;
    }
    return std::nullopt;
  }
  if (inbound) {
    if (counterparty == Counterparty::kBeneficiary) return Leg::kInbound002;
    return std::nullopt;
  }
  switch (counterparty) {
    case Counterparty::kBoth:
      return Leg::kOutbound002;
    case Counterparty::kOriginator:
      return Leg::kRejectionRelay;
    case Counterparty::kBeneficiary:
      return std::nullopt;
  }
  return std::nullopt;
}

EventValidation ValidateEvent(const TraceEvent& e) {
  if (e.timestamp < 0) {
    return EventValidation::Violation(
        "timestamp", "negative timestamp " + std::to_string(e.timestamp));
  }
  if (!LegOf(e)) {
    std::string msg = "illegal leg (";
    msg += ToToken(e.kind);
    msg += ", ";
    msg += ToToken(e.direction);
    msg += ", ";
    msg += ToToken(e.counterparty);
    msg += ")";
    return EventValidation::Violation("leg signature", std::move(msg));
  }
  return EventValidation::Ok();
}

TraceEvent MakeEvent(std::string tx_id, Leg leg, Millis timestamp) {
  TraceEvent e;
  e.tx_id = std::move(tx_id);
  e.timestamp = timestamp;
  switch (leg) {
    case Leg::kInbound008:
      e.kind = MessageKind::kPacs008;
      e.direction = Direction::kInboundToCsm;
      e.counterparty = Counterparty::kOriginator;
      break;
    case Leg::kOutbound008:
      e.kind = MessageKind::kPacs008;
      e.direction = Direction::kOutboundFromCsm;
      e.counterparty = Counterparty::kBeneficiary;
      break;
    case Leg::kInbound002:
      e.kind = MessageKind::kPacs002;
      e.direction = Direction::kInboundToCsm;
      e.counterparty = Counterparty::kBeneficiary;
      break;
    case Leg::kOutbound002:
      e.kind = MessageKind::kPacs002;
      e.direction = Direction::kOutboundFromCsm;
      e.counterparty = Counterparty::kBoth;
      break;
    case Leg::kRejectionRelay:
      e.kind = MessageKind::kPacs002;
      e.direction = Direction::kOutboundFromCsm;
      e.counterparty = Counterparty::kOriginator;
      break;
  }
  return e;
}

std::string_view ToToken(MessageKind kind) {
  return kind == MessageKind::kPacs008 ? "pacs008" : "pacs002";
}

std::string_view ToToken(Direction direction) {
  return direction == Direction::kInboundToCsm ? "in" : "out";
}

std::string_view ToToken(Counterparty counterparty) {
  switch (counterparty) {
    case Counterparty::kOriginator:
      return "orig";
    case Counterparty::kBeneficiary:
      return "benef";
    case Counterparty::kBoth:
      return "both";
  }
  return "?";
}

std::string_view ToString(TransactionOutcome outcome) {
  switch (outcome) {
    case TransactionOutcome::kSettled:
      return "settled";
    case TransactionOutcome::kExpired:
      return "expired";
    case TransactionOutcome::kRejected:
      return "rejected";
    case TransactionOutcome::kFailed:
      return "failed";
  }
  return "?";
}

std::string_view ToString(Leg leg) {
  switch (leg) {
    case Leg::kInbound008:
      return "inbound_pacs008";
    case Leg::kOutbound008:
      return "outbound_pacs008";
    case Leg::kInbound002:
      return "inbound_pacs002";
    case Leg::kOutbound002:
      return "outbound_pacs002";
    case Leg::kRejectionRelay:
      return "rejection_relay";
  }
  return "?";
}

MessageKind ParseMessageKind(std::string_view token) {
  if (token == "pacs008") return MessageKind::kPacs008;
  if (token == "pacs002") return MessageKind::kPacs002;
  throw ParseError("unknown message kind '" + std::string(token) + "'");
}

Direction ParseDirection(std::string_view token) {
  if (token == "in") return Direction::kInboundToCsm;
  if (token == "out") return Direction::kOutboundFromCsm;
  throw ParseError("unknown direction '" + std::string(token) + "'");
}

Counterparty ParseCounterparty(std::string_view token) {
  if (token == "orig") return Counterparty::kOriginator;
  if (token == "benef") return Counterparty::kBeneficiary;
  if (token == "both") return Counterparty::kBoth;
  throw ParseError("unknown counterparty '" + std::string(token) + "'");
}

}  // namespace ipmon
