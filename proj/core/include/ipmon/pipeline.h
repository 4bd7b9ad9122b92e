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

// correlate -> aggregate -> detect -> explain, in one streaming pass.
//
// The JSONL record of every stage boundary is the hand-off format: running
// the stages one by one over intermediate files (CorrelateStream,
// AggregateStream, ScoreStream, ExplainStream) yields the same bytes as the
// fused run.

#ifndef IPMON_PIPELINE_H_
#define IPMON_PIPELINE_H_

#include <cstddef>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipmon/aggregator.h"
#include "ipmon/correlator.h"
#include "ipmon/detector.h"
#include "ipmon/explainer.h"
#include "ipmon/records.h"
#include "ipmon/simulator.h"

namespace ipmon {

struct EmitFlags {
  bool payments = false;
  bool observations = false;
  bool scores = false;
  bool verdicts = true;
};

struct PipelineConfig {
  CorrelatorConfig correlator;
  // alpha is taken from `aggregation` only when auto_alpha is false;
  // otherwise it is the first settled timestamp rounded down to a multiple
  // of eta. omega is always derived from the data.
  AggregationConfig aggregation;
  bool auto_alpha = true;
  DetectorConfig detector;
  EmitFlags emit;

  // Throws std::invalid_argument.
  void Validate() const;
};

// JSON configuration file. Keys that are absent keep their value in `base`;
// unknown keys are rejected. Throws ParseError. See docs/configuration.md.
PipelineConfig ParsePipelineConfig(std::string_view text,
                                   const PipelineConfig& base = {});
std::string EncodePipelineConfig(const PipelineConfig& cfg);

// Receives every record the pipeline produces. Default handlers ignore.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void OnPayment(const SettledPayment&) {}
  virtual void OnObservation(const AggregatedObservation&) {}
  virtual void OnScore(const ScoreRecord&) {}
  virtual void OnVerdict(const Verdict&) {}
};

// Writes the selected streams as JSONL. Null streams are skipped.
class JsonlSink : public RecordSink {
 public:
  struct Streams {
    std::ostream* payments = nullptr;
    std::ostream* observations = nullptr;
    std::ostream* scores = nullptr;
    std::ostream* verdicts = nullptr;
  };
  explicit JsonlSink(Streams streams) : streams_(streams) {}

  void OnPayment(const SettledPayment& p) override;
  void OnObservation(const AggregatedObservation& o) override;
  void OnScore(const ScoreRecord& s) override;
  void OnVerdict(const Verdict& v) override;

 private:
  Streams streams_;
};

// Keeps everything in memory.
class CollectingSink : public RecordSink {
 public:
  void OnPayment(const SettledPayment& p) override { payments.push_back(p); }
  void OnObservation(const AggregatedObservation& o) override {
    observations.push_back(o);
  }
  void OnScore(const ScoreRecord& s) override { scores.push_back(s); }
  void OnVerdict(const Verdict& v) override { verdicts.push_back(v); }

  std::vector<SettledPayment> payments;
  std::vector<AggregatedObservation> observations;
  std::vector<ScoreRecord> scores;
  std::vector<Verdict> verdicts;
};

class EventSource {
 public:
  virtual ~EventSource() = default;
  // nullopt at end of input. May throw LineError.
  virtual std::optional<TraceEvent> Next() = 0;
};

class VectorEventSource : public EventSource {
 public:
  explicit VectorEventSource(std::span<const TraceEvent> events)
      : events_(events) {}
  std::optional<TraceEvent> Next() override;

 private:
  std::span<const TraceEvent> events_;
  std::size_t next_ = 0;
};

// Reads the JSONL trace format. A line that does not decode is fatal and
// reported with its line number.
class JsonlEventSource : public EventSource {
 public:
  explicit JsonlEventSource(std::istream& in) : in_(in) {}
  std::optional<TraceEvent> Next() override;

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

// Aggregate verdict of a run of bins: the highest severity, the most
// frequent attributable localization (internal/external/mixed; indeterminate
// only when nothing else occurs) and the union of the flags.
struct EpisodeVerdict {
  Localization localization = Localization::kIndeterminate;
  Severity severity = Severity::kNone;
  bool business_impact = false;
  bool timeout_risk = false;
};

// nullopt when no verdict has a severity above None.
std::optional<EpisodeVerdict> Summarize(std::span<const Verdict> verdicts);

// Maximal run of consecutive anomalous bins.
struct Episode {
  Millis start_tau = 0;
  Millis end_tau = 0;  // tau of the last bin
  std::size_t bins = 0;
  EpisodeVerdict verdict;
};

// Scores observed for bins whose tau lies inside an injection window.
struct WindowReport {
  InjectionWindow window;
  std::size_t bins = 0;
  PerFeature<std::optional<double>> max_score;
  PerFeature<bool> labeled;
  std::optional<EpisodeVerdict> verdict;

  // Max score restricted to features labeled at least once; the others are
  // reported as not detected.
  std::optional<double> detected_max(Feature f) const {
    return labeled[f] ? max_score[f] : std::nullopt;
  }
};

struct LatencyStats {
  double max_ms = 0;
  double mean_ms = 0;
  Millis budget_ms = 0;
  bool within_budget = true;
};

struct RunSummary {
  std::string detector;
  std::size_t events_read = 0;
  std::size_t invalid_events = 0;
  std::size_t settled_payments = 0;
  std::size_t late_payments = 0;
  std::map<std::string, std::size_t> notices;
  std::size_t bins = 0;
  std::size_t anomalous_bins = 0;
  // Keyed by "<localization>/<severity>".
  std::map<std::string, std::size_t> verdict_histogram;
  std::vector<Episode> episodes;
  std::vector<WindowReport> windows;
  LatencyStats latency;
};

std::string EncodeSummary(const RunSummary& summary);

struct RunOptions {
  // Injection windows to report on (ground truth).
  std::vector<InjectionWindow> windows;
  // Runs feature extraction and scoring on separate threads connected by
  // bounded channels. Output is identical to the sequential run.
  bool threaded = false;
  std::size_t channel_capacity = 4096;
  // Replaces the reference detector when set.
  std::unique_ptr<AnomalyDetector> detector;
};

RunSummary RunPipeline(EventSource& source, const PipelineConfig& cfg,
                       RecordSink& sink, RunOptions options = {});

// Stage-by-stage runners over JSONL streams.
void CorrelateStream(std::istream& trace, std::ostream& payments,
                     const PipelineConfig& cfg);
void AggregateStream(std::istream& payments, std::ostream& observations,
                     const PipelineConfig& cfg);
void ScoreStream(std::istream& observations, std::ostream& scores,
                 const PipelineConfig& cfg);
void ExplainStream(std::istream& scores, std::ostream& verdicts);

}  // namespace ipmon

#endif  // IPMON_PIPELINE_H_
