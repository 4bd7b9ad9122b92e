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

#ifndef IPMON_TOOLS_CLI_H_
#define IPMON_TOOLS_CLI_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ipmon/explainer.h"
#include "ipmon/pipeline.h"

namespace ipmon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs `ipmon` with the given arguments (argv[0] excluded). Reads standard
// input only when a path argument is "-".
int Run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err);

enum class ReportFormat { kText, kCsv, kJson };

// Verdict table with the columns of the localization/severity matrix:
// pattern, scores, localization, incident, business impact.
void RenderReport(std::span<const Verdict> verdicts, ReportFormat format,
                  std::ostream& out);

// Human-readable run summary: per-window max scores and episodes.
void RenderSummary(const RunSummary& summary, std::ostream& out);

}  // namespace ipmon::cli

#endif  // IPMON_TOOLS_CLI_H_
