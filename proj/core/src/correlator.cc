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

#include "ipmon/correlator.h"

#include <algorithm>
#include <stdexcept>

namespace ipmon {

void CorrelatorConfig::Validate() const {
  if (eviction_timeout <= 0) {
    throw std::invalid_argument("eviction_timeout must be positive");
  }
  if (max_pending == 0) {
    throw std::invalid_argument("max_pending must be positive");
  }
}

std::string_view ToString(NoticeKind kind) {
  switch (kind) {
    case NoticeKind::kDuplicateLeg:
      return "duplicate_leg";
    case NoticeKind::kNegativeInterval:
      return "negative_interval";
    case NoticeKind::kEvicted:
      return "evicted";
    case NoticeKind::kRejected:
      return "rejected";
  }
  return "?";
}

Correlator::Correlator(CorrelatorConfig config) : config_(config) {
  config_.Validate();
}

IngestResult Correlator::Ingest(const TraceEvent& e) {
  IngestResult result;
  const std::optional<Leg> leg = LegOf(e);
  if (!leg) return result;

  if (tombstones_.count(e.tx_id) != 0) {
    result.notices.push_back({NoticeKind::kDuplicateLeg, e.tx_id});
    return result;
  }

  if (*leg == Leg::kRejectionRelay) {
    if (pending_.count(e.tx_id) != 0) {
      by_age_.erase({pending_[e.tx_id].first_seen, e.tx_id});
      pending_.erase(e.tx_id);
    }
    Finalize(e.tx_id);
    result.notices.push_back({NoticeKind::kRejected, e.tx_id});
    return result;
  }

  auto it = pending_.find(e.tx_id);
  if (it == pending_.end()) {
    if (pending_.size() >= config_.max_pending) {
      // Capacity eviction: oldest first_seen goes first.
      const std::string oldest = by_age_.begin()->second;
      Evict(oldest, result.notices);
    }
    PendingTransaction fresh;
    fresh.tx_id = e.tx_id;
    fresh.first_seen = e.timestamp;
    it = pending_.emplace(e.tx_id, std::move(fresh)).first;
    by_age_.insert({e.timestamp, e.tx_id});
  }

  PendingTransaction& tx = it->second;
  std::optional<Millis>* slot = nullptr;
  switch (*leg) {
    case Leg::kInbound008:
      slot = &tx.t_in008;
      break;
    case Leg::kOutbound008:
      slot = &tx.t_out008;
      break;
    case Leg::kInbound002:
      slot = &tx.t_in002;
      break;
    case Leg::kOutbound002:
      slot = &tx.t_out002;
      break;
    case Leg::kRejectionRelay:
      return result;
  }
  if (slot->has_value()) {
    result.notices.push_back({NoticeKind::kDuplicateLeg, e.tx_id});
    return result;
  }
  *slot = e.timestamp;
  if (e.timestamp < tx.first_seen) {
    // Out-of-order arrival: first_seen tracks the earliest leg observed.
    by_age_.erase({tx.first_seen, tx.tx_id});
    tx.first_seen = e.timestamp;
    by_age_.insert({tx.first_seen, tx.tx_id});
  }

  if (!tx.t_in008 || !tx.t_out008 || !tx.t_in002 || !tx.t_out002) {
    return result;
  }

  SettledPayment p;
  p.tx_id = tx.tx_id;
  p.delta1 = *tx.t_out008 - *tx.t_in008;
  p.delta2 = *tx.t_in002 - *tx.t_out008;
  p.delta3 = *tx.t_out002 - *tx.t_in002;
  p.settled_at = *tx.t_out002;

  const std::string tx_id = tx.tx_id;
  by_age_.erase({tx.first_seen, tx_id});
  pending_.erase(it);
  Finalize(tx_id);

  if (p.delta1 < 0 || p.delta2 < 0 || p.delta3 < 0) {
    result.notices.push_back({NoticeKind::kNegativeInterval, tx_id});
    return result;
  }
  result.payment = std::move(p);
  return result;
}

std::vector<StreamNotice> Correlator::AdvanceClock(Millis now) {
  std::vector<StreamNotice> notices;
  clock_ = std::max(clock_, now);
  while (!by_age_.empty() &&
         by_age_.begin()->first + config_.eviction_timeout <= clock_) {
    const std::string tx_id = by_age_.begin()->second;
    Evict(tx_id, notices);
  }
  ExpireTombstones();
  return notices;
}

std::vector<StreamNotice> Correlator::Drain() {
  std::vector<StreamNotice> notices;
  while (!by_age_.empty()) {
    const std::string tx_id = by_age_.begin()->second;
    Evict(tx_id, notices);
  }
  return notices;
}

void Correlator::Finalize(const std::string& tx_id) {
  tombstones_[tx_id] = clock_;
  tombstone_age_.insert({clock_, tx_id});
}

void Correlator::Evict(const std::string& tx_id,
                       std::vector<StreamNotice>& out) {
  auto it = pending_.find(tx_id);
  if (it == pending_.end()) return;
  by_age_.erase({it->second.first_seen, tx_id});
  pending_.erase(it);
  Finalize(tx_id);
  out.push_back({NoticeKind::kEvicted, tx_id});
}

void Correlator::ExpireTombstones() {
  while (!tombstone_age_.empty() &&
         tombstone_age_.begin()->first + config_.eviction_timeout <= clock_) {
    auto node = tombstone_age_.begin();
    auto it = tombstones_.find(node->second);
    if (it != tombstones_.end() && it->second == node->first) {
      tombstones_.erase(it);
    }
    tombstone_age_.erase(node);
  }
}

}  // namespace ipmon
