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

#include "ipmon/explainer.h"

#include <string>

namespace ipmon {

std::string_view ToString(Localization loc) {
  switch (loc) {
    case Localization::kInternal:
      return "internal";
    case Localization::kExternal:
      return "external";
    case Localization::kMixed:
      return "mixed";
    case Localization::kIndeterminate:
      return "indeterminate";
  }
  return "?";
}

std::string_view ToString(Severity severity) {
  switch (severity) {
    case Severity::kNone:
      return "none";
    case Severity::kPerformanceDegradation:
      return "performance_degradation";
    case Severity::kMinor:
      return "minor";
    case Severity::kMajor:
      return "major";
    case Severity::kCritical:
      return "critical";
  }
  return "?";
}

Localization ParseLocalization(std::string_view token) {
  for (Localization loc : {Localization::kInternal, Localization::kExternal,
                           Localization::kMixed, Localization::kIndeterminate}) {
    if (ToString(loc) == token) return loc;
  }
  throw ParseError("unknown localization '" + std::string(token) + "'");
}

Severity ParseSeverity(std::string_view token) {
  for (Severity s : {Severity::kNone, Severity::kPerformanceDegradation,
                     Severity::kMinor, Severity::kMajor, Severity::kCritical}) {
    if (ToString(s) == token) return s;
  }
  throw ParseError("unknown severity '" + std::string(token) + "'");
}

std::optional<Localization> Localize(const LabelVector& y) {
  if (!y.any()) return std::nullopt;
  const bool internal = y.y[Feature::kD1] || y.y[Feature::kD3];
  const bool external = y.y[Feature::kD2];
  if (internal && !external) return Localization::kInternal;
  if (external && !internal) return Localization::kExternal;
  if (internal && external) return Localization::kMixed;
  return Localization::kIndeterminate;
}

Classification Classify(const ScoreVector& a, const LabelVector& y) {
  Classification c;
  if (y.y[Feature::kV]) {
    if (!a.a[Feature::kV]) {
      throw InconsistentLabelsError("volume labeled without a volume score");
    }
    const double av = *a.a[Feature::kV];
    if (av < kMinorBand) {
      throw InconsistentLabelsError("volume labeled with a(v) = " +
                                    std::to_string(av) +
                                    " below the minor band");
    }
    if (av < kMajorBand) {
      c.severity = Severity::kMinor;
    } else if (av < kCriticalBand) {
      c.severity = Severity::kMajor;
    } else {
      c.severity = Severity::kCritical;
    }
    return c;
  }
  for (Feature f : kDeltaFeatures) {
    if (!y.y[f]) continue;
    c.severity = Severity::kPerformanceDegradation;
    if (a.a[f] && *a.a[f] >= kCriticalBand) c.timeout_risk = true;
  }
  return c;
}

Verdict Explain(const ScoreVector& a, const LabelVector& y, Millis tau) {
  Verdict v;
  v.tau = tau;
  v.scores = a;
  v.labels = y;
  v.localization = Localize(y);
  const Classification c = Classify(a, y);
  v.severity = c.severity;
  v.timeout_risk = c.timeout_risk;
  v.business_impact = c.severity == Severity::kMinor ||
                      c.severity == Severity::kMajor ||
                      c.severity == Severity::kCritical;

  if (v.localization == Localization::kInternal) {
    v.triggering_rules.emplace_back("L1");
  } else if (v.localization == Localization::kExternal) {
    v.triggering_rules.emplace_back("L2");
  }
  switch (v.severity) {
    case Severity::kPerformanceDegradation:
      v.triggering_rules.emplace_back("C1");
      break;
    case Severity::kMinor:
      v.triggering_rules.emplace_back("C2");
      break;
    case Severity::kMajor:
      v.triggering_rules.emplace_back("C3");
      break;
    case Severity::kCritical:
      v.triggering_rules.emplace_back("C4");
      break;
    case Severity::kNone:
      break;
  }
  return v;
}

std::string PatternCode(const Verdict& v) {
  if (!v.localization) return "";
  std::string code;
  switch (*v.localization) {
    case Localization::kInternal:
      code = "I";
      break;
    case Localization::kExternal:
      code = "E";
      break;
    default:
      return "";
  }
  switch (v.severity) {
    case Severity::kPerformanceDegradation:
      if (!v.timeout_risk) return "";
      return code + "PC";
    case Severity::kMinor:
      return code + "IN";
    case Severity::kMajor:
      return code + "IJ";
    default:
      return "";
  }
}

}  // namespace ipmon
