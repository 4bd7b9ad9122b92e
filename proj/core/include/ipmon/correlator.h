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

#ifndef IPMON_CORRELATOR_H_
#define IPMON_CORRELATOR_H_

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ipmon/payment_model.h"

namespace ipmon {

struct CorrelatorConfig {
  // Pending transactions with first_seen + eviction_timeout <= clock are
  // evicted as non-settled.
  Millis eviction_timeout = 25'000;
  std::size_t max_pending = 1'000'000;

  // Throws std::invalid_argument.
  void Validate() const;
};

enum class NoticeKind {
  kDuplicateLeg,
  kNegativeInterval,
  kEvicted,
  kRejected,
};

std::string_view ToString(NoticeKind kind);

struct StreamNotice {
  NoticeKind kind;
  std::string tx_id;

  bool operator==(const StreamNotice&) const = default;
};

struct PendingTransaction {
  std::string tx_id;
  std::optional<Millis> t_in008;
  std::optional<Millis> t_out008;
  std::optional<Millis> t_in002;
  std::optional<Millis> t_out002;
  Millis first_seen = 0;
};

struct IngestResult {
  std::optional<SettledPayment> payment;
  std::vector<StreamNotice> notices;
};

// Reconstructs per-transaction state from a stream of trace events and emits
// a SettledPayment once all four legs of a transaction have been seen, in
// whatever order they arrive.
//
// Single-writer: one ingestion sequence per instance. Finalized transaction
// ids are remembered for one eviction_timeout so that late duplicates are
// reported instead of opening a fresh pending entry.
class Correlator {
 public:
  explicit Correlator(CorrelatorConfig config = {});

  // `e` must have passed ValidateEvent.
  IngestResult Ingest(const TraceEvent& e);

  // Moves the clock to max(clock, now) and evicts expired pending entries.
  std::vector<StreamNotice> AdvanceClock(Millis now);

  // Evicts everything still pending (end of stream).
  std::vector<StreamNotice> Drain();

  std::size_t pending_count() const { return pending_.size(); }
  Millis clock() const { return clock_; }
  const CorrelatorConfig& config() const { return config_; }

 private:
  using AgeKey = std::pair<Millis, std::string>;

  void Finalize(const std::string& tx_id);
  void Evict(const std::string& tx_id, std::vector<StreamNotice>& out);
  void ExpireTombstones();

  CorrelatorConfig config_;
  Millis clock_ = 0;
  std::unordered_map<std::string, PendingTransaction> pending_;
  // Pending entries ordered by (first_seen, tx_id); oldest first.
  std::set<AgeKey> by_age_;
  // Finalized ids ordered by finalization clock.
  std::unordered_map<std::string, Millis> tombstones_;
  std::set<AgeKey> tombstone_age_;
};

}  // namespace ipmon

#endif  // IPMON_CORRELATOR_H_
