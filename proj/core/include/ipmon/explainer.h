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

// Interpretation of score/label vectors.
//
// Localization rules (labels only):
//   L1  d1 or d3 anomalous, d2 normal        -> internal to the CSM
//   L2  d2 anomalous, d1 and d3 normal       -> external
// Severity rules (scores and labels):
//   C1  delta anomaly without volume anomaly -> performance degradation;
//       a delta score >= 0.75 flags a timeout risk
//   C2  volume anomaly, 0.25 <= a(v) < 0.5   -> minor incident
//   C3  volume anomaly, 0.5  <= a(v) < 0.75  -> major incident
//   C4  volume anomaly, a(v) >= 0.75         -> critical incident

#ifndef IPMON_EXPLAINER_H_
#define IPMON_EXPLAINER_H_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipmon/detector.h"
#include "ipmon/payment_model.h"

namespace ipmon {

enum class Localization { kInternal, kExternal, kMixed, kIndeterminate };

enum class Severity {
  kNone,
  kPerformanceDegradation,
  kMinor,
  kMajor,
  kCritical,
};

std::string_view ToString(Localization loc);
std::string_view ToString(Severity severity);
Localization ParseLocalization(std::string_view token);
Severity ParseSeverity(std::string_view token);

inline constexpr double kMinorBand = 0.25;
inline constexpr double kMajorBand = 0.5;
inline constexpr double kCriticalBand = 0.75;

struct Verdict {
  Millis tau = 0;
  // Absent when no label is set.
  std::optional<Localization> localization;
  Severity severity = Severity::kNone;
  bool business_impact = false;
  bool timeout_risk = false;
  std::vector<std::string> triggering_rules;
  ScoreVector scores;
  LabelVector labels;

  bool operator==(const Verdict&) const = default;
};

// A volume label whose score sits below the minor band cannot come from the
// default thresholds.
class InconsistentLabelsError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Requires at least one label; returns nullopt otherwise.
std::optional<Localization> Localize(const LabelVector& y);

struct Classification {
  Severity severity = Severity::kNone;
  bool timeout_risk = false;
};

// Throws InconsistentLabelsError.
Classification Classify(const ScoreVector& a, const LabelVector& y);

// Pure composition of Localize and Classify.
Verdict Explain(const ScoreVector& a, const LabelVector& y, Millis tau);

// Table-style pattern code of a verdict: EPC, IPC, EIN, IIN, EIJ, IIJ, or
// empty when the verdict matches none of them.
std::string PatternCode(const Verdict& v);

}  // namespace ipmon

#endif  // IPMON_EXPLAINER_H_
