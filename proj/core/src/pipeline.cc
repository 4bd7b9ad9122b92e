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

#include "ipmon/pipeline.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <exception>
#include <initializer_list>
#include <stdexcept>
#include <thread>

#include "ipmon/channel.h"
#include "json.hpp"

namespace ipmon {
namespace {

using Json = nlohmann::ordered_json;
using SteadyClock = std::chrono::steady_clock;

double MillisSince(SteadyClock::time_point start) {
  return std::chrono::duration<double, std::milli>(SteadyClock::now() - start)
      .count();
}

// A closed bin plus the feature-extraction work attributed to it.
struct BinMessage {
  AggregatedObservation observation;
  double extraction_ms = 0;
};

// What the feature stage hands to the scoring stage.
struct StageMessage {
  std::optional<SettledPayment> payment;
  std::optional<BinMessage> bin;
};

// Settled payments -> closed bins, with the watermark rule: bins whose end
// lies at least `lateness` before the stream clock are final.
class BinningStage {
 public:
  explicit BinningStage(const PipelineConfig& cfg)
      : cfg_(cfg), lateness_(cfg.correlator.eviction_timeout) {}

  bool Add(const SettledPayment& p) {
    if (!aggregator_) {
      AggregationConfig agg = cfg_.aggregation;
      agg.omega.reset();
      if (cfg_.auto_alpha) {
        agg.alpha = p.settled_at - (p.settled_at % agg.eta);
      }
      aggregator_.emplace(agg);
    }
    if (!aggregator_->Add(p)) return false;
    max_settled_ = std::max(max_settled_.value_or(p.settled_at), p.settled_at);
    return true;
  }

  void Close(Millis clock, std::vector<AggregatedObservation>& out) {
    if (!aggregator_) return;
    auto closed = aggregator_->CloseBins(clock - lateness_);
    out.insert(out.end(), closed.begin(), closed.end());
  }

  // Closes every bin up to the one holding the latest settled payment.
  void Finish(std::vector<AggregatedObservation>& out) {
    if (!aggregator_ || !max_settled_) return;
    const AggregationConfig& agg = aggregator_->config();
    const std::int64_t last = BinIndex(*max_settled_, agg);
    auto closed = aggregator_->CloseBins(BinStart(last + 1, agg));
    out.insert(out.end(), closed.begin(), closed.end());
  }

 private:
  const PipelineConfig& cfg_;
  Millis lateness_;
  std::optional<Aggregator> aggregator_;
  std::optional<Millis> max_settled_;
};

// Events -> payments -> closed bins.
class FeatureStage {
 public:
  FeatureStage(const PipelineConfig& cfg, RunSummary& counters)
      : correlator_(cfg.correlator), binning_(cfg), counters_(counters) {}

  template <typename Emit>
  void OnEvent(const TraceEvent& e, Emit&& emit) {
    const auto start = SteadyClock::now();
    ++counters_.events_read;
    if (!ValidateEvent(e).ok) {
      ++counters_.invalid_events;
      pending_ms_ += MillisSince(start);
      return;
    }
    Count(correlator_.AdvanceClock(e.timestamp));
    IngestResult r = correlator_.Ingest(e);
    Count(r.notices);
    std::vector<AggregatedObservation> closed;
    if (r.payment) {
      if (binning_.Add(*r.payment)) {
        ++counters_.settled_payments;
      } else {
        ++counters_.late_payments;
        r.payment.reset();
      }
    }
    binning_.Close(correlator_.clock(), closed);
    pending_ms_ += MillisSince(start);
    if (r.payment) emit(StageMessage{std::move(r.payment), std::nullopt});
    Flush(closed, emit);
  }

  template <typename Emit>
  void Finish(Emit&& emit) {
    const auto start = SteadyClock::now();
    Count(correlator_.Drain());
    std::vector<AggregatedObservation> closed;
    binning_.Finish(closed);
    pending_ms_ += MillisSince(start);
    Flush(closed, emit);
  }

 private:
  void Count(const std::vector<StreamNotice>& notices) {
    for (const auto& n : notices) ++counters_.notices[std::string(ToString(n.kind))];
  }

  // The extraction work accumulated since the previous closure is charged
  // in full to every bin closed now.
  template <typename Emit>
  void Flush(std::vector<AggregatedObservation>& closed, Emit&& emit) {
    if (closed.empty()) return;
    for (auto& obs : closed) {
      emit(StageMessage{std::nullopt, BinMessage{std::move(obs), pending_ms_}});
    }
    pending_ms_ = 0;
  }

  Correlator correlator_;
  BinningStage binning_;
  RunSummary& counters_;
  double pending_ms_ = 0;
};

class SummaryBuilder {
 public:
  SummaryBuilder(RunSummary& summary, const PipelineConfig& cfg,
                 const std::vector<InjectionWindow>& windows)
      : summary_(summary), eta_(cfg.aggregation.eta) {
    summary_.latency.budget_ms = cfg.detector.latency_budget;
    for (const auto& w : windows) {
      WindowReport report;
      report.window = w;
      summary_.windows.push_back(report);
    }
    window_verdicts_.resize(windows.size());
  }

  void OnBin(Millis tau, const Detection& d, const std::optional<Verdict>& v,
             double work_ms) {
    ++summary_.bins;
    summary_.latency.max_ms = std::max(summary_.latency.max_ms, work_ms);
    latency_sum_ += work_ms;

    if (v) {
      ++summary_.anomalous_bins;
      const std::string key =
          std::string(v->localization ? ToString(*v->localization) : "none") +
          "/" + std::string(ToString(v->severity));
      ++summary_.verdict_histogram[key];
      if (!episode_.empty() && tau != last_tau_ + eta_) CloseEpisode();
      episode_.push_back(*v);
      last_tau_ = tau;
    } else {
      CloseEpisode();
    }

    for (std::size_t i = 0; i < summary_.windows.size(); ++i) {
      WindowReport& report = summary_.windows[i];
      if (!report.window.Covers(tau)) continue;
      ++report.bins;
      for (Feature f : kAllFeatures) {
        if (const auto& a = d.scores.a[f]) {
          report.max_score[f] = std::max(report.max_score[f].value_or(*a), *a);
        }
        if (d.labels.y[f]) report.labeled[f] = true;
      }
      if (v) window_verdicts_[i].push_back(*v);
    }
  }

  void Finish() {
    CloseEpisode();
    for (std::size_t i = 0; i < summary_.windows.size(); ++i) {
      summary_.windows[i].verdict = Summarize(window_verdicts_[i]);
    }
    if (summary_.bins > 0) {
      summary_.latency.mean_ms =
          latency_sum_ / static_cast<double>(summary_.bins);
    }
    summary_.latency.within_budget =
        summary_.latency.max_ms < static_cast<double>(summary_.latency.budget_ms);
  }

 private:
  void CloseEpisode() {
    if (episode_.empty()) return;
    Episode e;
    e.start_tau = episode_.front().tau;
    e.end_tau = episode_.back().tau;
    e.bins = episode_.size();
    e.verdict = Summarize(episode_).value_or(EpisodeVerdict{});
    summary_.episodes.push_back(e);
    episode_.clear();
  }

  RunSummary& summary_;
  Millis eta_;
  double latency_sum_ = 0;
  std::vector<Verdict> episode_;
  Millis last_tau_ = 0;
  std::vector<std::vector<Verdict>> window_verdicts_;
};

// Observations -> scores -> verdicts.
class ScoringStage {
 public:
  ScoringStage(AnomalyDetector& detector, RecordSink& sink,
               SummaryBuilder& summary)
      : detector_(detector), sink_(sink), summary_(summary) {}

  void OnMessage(const StageMessage& m) {
    if (m.payment) sink_.OnPayment(*m.payment);
    if (!m.bin) return;
    const AggregatedObservation& obs = m.bin->observation;
    const auto start = SteadyClock::now();
    ScoreRecord record{obs.tau,
                       detector_.Observe(FeatureVector::FromObservation(obs))};
    std::optional<Verdict> verdict;
    if (record.detection.labels.any()) {
      verdict = Explain(record.detection.scores, record.detection.labels,
                        obs.tau);
    }
    const double work_ms = m.bin->extraction_ms + MillisSince(start);

    sink_.OnObservation(obs);
    sink_.OnScore(record);
    if (verdict) sink_.OnVerdict(*verdict);
    summary_.OnBin(obs.tau, record.detection, verdict, work_ms);
  }

 private:
  AnomalyDetector& detector_;
  RecordSink& sink_;
  SummaryBuilder& summary_;
};

void RunSequential(EventSource& source, FeatureStage& features,
                   ScoringStage& scoring) {
  auto emit = [&](StageMessage m) { scoring.OnMessage(m); };
  while (auto e = source.Next()) features.OnEvent(*e, emit);
  features.Finish(emit);
}

void RunThreaded(EventSource& source, FeatureStage& features,
                 ScoringStage& scoring, std::size_t capacity) {
  BoundedChannel<TraceEvent> events(capacity);
  BoundedChannel<StageMessage> messages(capacity);
  std::exception_ptr reader_error;
  std::exception_ptr feature_error;

  std::thread reader([&] {
    try {
      while (auto e = source.Next()) {
        if (!events.Push(std::move(*e))) break;
      }
    } catch (...) {
      reader_error = std::current_exception();
    }
    events.Close();
  });

  std::thread extractor([&] {
    try {
      auto emit = [&](StageMessage m) {
        if (!messages.Push(std::move(m))) {
          throw std::runtime_error("scoring stage stopped");
        }
      };
      while (auto e = events.Pop()) features.OnEvent(*e, emit);
      if (!reader_error) features.Finish(emit);
    } catch (...) {
      feature_error = std::current_exception();
      events.Close();
    }
    messages.Close();
  });

  std::exception_ptr scoring_error;
  try {
    while (auto m = messages.Pop()) scoring.OnMessage(*m);
  } catch (...) {
    scoring_error = std::current_exception();
    messages.Close();
    events.Close();
  }
  extractor.join();
  reader.join();
  for (const auto& err : {reader_error, scoring_error, feature_error}) {
    if (err) std::rethrow_exception(err);
  }
}

Json EncodeEpisodeVerdict(const EpisodeVerdict& v) {
  Json j;
  j["localization"] = ToString(v.localization);
  j["severity"] = ToString(v.severity);
  j["impact"] = v.business_impact;
  j["timeout_risk"] = v.timeout_risk;
  return j;
}

// Rejects keys outside `allowed` so that typos do not pass silently.
void CheckKeys(const Json& j, const char* section,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ParseError(std::string(section) + " must be an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) {
      throw ParseError("unknown key '" + item.key() + "' in " + section);
    }
  }
}

template <typename T>
void Read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig ParsePipelineConfig(std::string_view text,
                                   const PipelineConfig& base) {
  PipelineConfig cfg = base;
  try {
    const Json j = Json::parse(text);
    CheckKeys(j, "config", {"correlator", "aggregation", "detector"});
    if (j.contains("correlator")) {
      const Json& c = j.at("correlator");
      CheckKeys(c, "correlator", {"eviction_timeout_ms", "max_pending"});
      Read(c, "eviction_timeout_ms", cfg.correlator.eviction_timeout);
      Read(c, "max_pending", cfg.correlator.max_pending);
    }
    if (j.contains("aggregation")) {
      const Json& a = j.at("aggregation");
      CheckKeys(a, "aggregation", {"eta_ms", "agg", "alpha_ms"});
      Read(a, "eta_ms", cfg.aggregation.eta);
      if (a.contains("agg")) {
        cfg.aggregation.agg_fn =
            ParseAggregationFn(a.at("agg").get<std::string>());
      }
      if (a.contains("alpha_ms")) {
        if (a.at("alpha_ms").is_null()) {
          cfg.auto_alpha = true;
        } else {
          cfg.aggregation.alpha = a.at("alpha_ms").get<Millis>();
          cfg.auto_alpha = false;
        }
      }
    }
    if (j.contains("detector")) {
      const Json& d = j.at("detector");
      CheckKeys(d, "detector",
                {"theta", "warmup_bins", "baseline_window",
                 "multi_bucket_window", "single_bucket_weight", "mad_scale",
                 "mad_floor_fraction", "latency_budget_ms"});
      DetectorConfig& det = cfg.detector;
      if (d.contains("theta")) {
        const Json& t = d.at("theta");
        CheckKeys(t, "detector.theta", {"d1", "d2", "d3", "v"});
        for (Feature f : kAllFeatures) {
          Read(t, std::string(ToString(f)).c_str(), det.theta[f]);
        }
      }
      Read(d, "warmup_bins", det.warmup_bins);
      Read(d, "baseline_window", det.baseline_window);
      Read(d, "multi_bucket_window", det.multi_bucket_window);
      Read(d, "single_bucket_weight", det.single_bucket_weight);
      Read(d, "mad_scale", det.mad_scale);
      Read(d, "mad_floor_fraction", det.mad_floor_fraction);
      Read(d, "latency_budget_ms", det.latency_budget);
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

std::string EncodePipelineConfig(const PipelineConfig& cfg) {
  Json j;
  Json c;
  c["eviction_timeout_ms"] = cfg.correlator.eviction_timeout;
  c["max_pending"] = cfg.correlator.max_pending;
  j["correlator"] = c;
  Json a;
  a["eta_ms"] = cfg.aggregation.eta;
  a["agg"] = ToString(cfg.aggregation.agg_fn);
  a["alpha_ms"] = cfg.auto_alpha ? Json(nullptr) : Json(cfg.aggregation.alpha);
  j["aggregation"] = a;
  const DetectorConfig& det = cfg.detector;
  Json d;
  Json theta;
  for (Feature f : kAllFeatures) theta[std::string(ToString(f))] = det.theta[f];
  d["theta"] = theta;
  d["warmup_bins"] = det.warmup_bins;
  d["baseline_window"] = det.baseline_window;
  d["multi_bucket_window"] = det.multi_bucket_window;
  d["single_bucket_weight"] = det.single_bucket_weight;
  d["mad_scale"] = det.mad_scale;
  d["mad_floor_fraction"] = det.mad_floor_fraction;
  d["latency_budget_ms"] = det.latency_budget;
  j["detector"] = d;
  return j.dump(2);
}

void PipelineConfig::Validate() const {
  correlator.Validate();
  aggregation.Validate();
  detector.Validate(aggregation.eta);
}

void JsonlSink::OnPayment(const SettledPayment& p) {
  if (streams_.payments) *streams_.payments << EncodePayment(p) << '\n';
}

void JsonlSink::OnObservation(const AggregatedObservation& o) {
  if (streams_.observations) {
    *streams_.observations << EncodeObservation(o) << '\n';
  }
}

void JsonlSink::OnScore(const ScoreRecord& s) {
  if (streams_.scores) *streams_.scores << EncodeScore(s) << '\n';
}

void JsonlSink::OnVerdict(const Verdict& v) {
  if (streams_.verdicts) *streams_.verdicts << EncodeVerdict(v) << '\n';
}

std::optional<TraceEvent> VectorEventSource::Next() {
  if (next_ >= events_.size()) return std::nullopt;
  return events_[next_++];
}

std::optional<TraceEvent> JsonlEventSource::Next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      return DecodeEvent(line);
    } catch (const ParseError& e) {
      throw LineError(line_, e.what());
    }
  }
  if (in_.bad()) throw LineError(line_ + 1, "read failure");
  return std::nullopt;
}

std::optional<EpisodeVerdict> Summarize(std::span<const Verdict> verdicts) {
  EpisodeVerdict out;
  std::array<std::size_t, 4> counts{};
  bool any = false;
  for (const Verdict& v : verdicts) {
    if (v.severity == Severity::kNone) continue;
    any = true;
    out.severity = std::max(out.severity, v.severity);
    out.business_impact = out.business_impact || v.business_impact;
    out.timeout_risk = out.timeout_risk || v.timeout_risk;
    if (v.localization) ++counts[static_cast<std::size_t>(*v.localization)];
  }
  if (!any) return std::nullopt;
  // Ties go to the earlier enumerator.
  std::size_t best = static_cast<std::size_t>(Localization::kIndeterminate);
  std::size_t best_count = 0;
  for (Localization loc : {Localization::kInternal, Localization::kExternal,
                           Localization::kMixed}) {
    const std::size_t c = counts[static_cast<std::size_t>(loc)];
    if (c > best_count) {
      best = static_cast<std::size_t>(loc);
      best_count = c;
    }
  }
  out.localization = static_cast<Localization>(best);
  return out;
}

std::string EncodeSummary(const RunSummary& s) {
  Json j;
  j["detector"] = s.detector;
  j["events_read"] = s.events_read;
  j["invalid_events"] = s.invalid_events;
  j["settled_payments"] = s.settled_payments;
  j["late_payments"] = s.late_payments;
  Json notices = Json::object();
  for (const auto& [k, n] : s.notices) notices[k] = n;
  j["notices"] = notices;
  j["bins"] = s.bins;
  j["anomalous_bins"] = s.anomalous_bins;
  Json hist = Json::object();
  for (const auto& [k, n] : s.verdict_histogram) hist[k] = n;
  j["verdicts"] = hist;

  Json episodes = Json::array();
  for (const auto& e : s.episodes) {
    Json je;
    je["start_tau_ms"] = e.start_tau;
    je["end_tau_ms"] = e.end_tau;
    je["bins"] = e.bins;
    je["verdict"] = EncodeEpisodeVerdict(e.verdict);
    episodes.push_back(je);
  }
  j["episodes"] = episodes;

  Json windows = Json::array();
  for (const auto& w : s.windows) {
    Json jw;
    jw["label"] = w.window.label;
    jw["start_ms"] = w.window.start_ms;
    jw["end_ms"] = w.window.end_ms;
    jw["bins"] = w.bins;
    Json detected = Json::object();
    Json raw = Json::object();
    for (Feature f : kAllFeatures) {
      const std::string key(ToString(f));
      const auto d = w.detected_max(f);
      detected[key] = d ? Json(*d) : Json(nullptr);
      raw[key] = w.max_score[f] ? Json(*w.max_score[f]) : Json(nullptr);
    }
    jw["max_scores"] = detected;
    jw["max_raw_scores"] = raw;
    jw["verdict"] = w.verdict ? EncodeEpisodeVerdict(*w.verdict) : Json(nullptr);
    windows.push_back(jw);
  }
  j["windows"] = windows;

  Json latency;
  latency["max_ms"] = s.latency.max_ms;
  latency["mean_ms"] = s.latency.mean_ms;
  latency["budget_ms"] = s.latency.budget_ms;
  latency["within_budget"] = s.latency.within_budget;
  j["latency"] = latency;
  return j.dump(2);
}

RunSummary RunPipeline(EventSource& source, const PipelineConfig& cfg,
                       RecordSink& sink, RunOptions options) {
  cfg.Validate();
  std::unique_ptr<AnomalyDetector> detector = std::move(options.detector);
  if (!detector) {
    detector = std::make_unique<ReferenceDetector>(cfg.detector,
                                                   cfg.aggregation.eta);
  }

  RunSummary summary;
  summary.detector = std::string(detector->name());
  FeatureStage features(cfg, summary);
  SummaryBuilder builder(summary, cfg, options.windows);
  ScoringStage scoring(*detector, sink, builder);

  if (options.threaded) {
    RunThreaded(source, features, scoring, options.channel_capacity);
  } else {
    RunSequential(source, features, scoring);
  }
  builder.Finish();
  return summary;
}

void CorrelateStream(std::istream& trace, std::ostream& payments,
                     const PipelineConfig& cfg) {
  cfg.Validate();
  Correlator correlator(cfg.correlator);
  JsonlEventSource source(trace);
  while (auto e = source.Next()) {
    if (!ValidateEvent(*e).ok) continue;
    correlator.AdvanceClock(e->timestamp);
    IngestResult r = correlator.Ingest(*e);
    if (r.payment) payments << EncodePayment(*r.payment) << '\n';
  }
}

void AggregateStream(std::istream& payments, std::ostream& observations,
                     const PipelineConfig& cfg) {
  cfg.Validate();
  BinningStage binning(cfg);
  std::optional<Millis> clock;
  std::vector<AggregatedObservation> closed;
  ForEachLine(payments, [&](std::string_view line, std::size_t number) {
    SettledPayment p;
    try {
      p = DecodePayment(line);
    } catch (const ParseError& e) {
      throw LineError(number, e.what());
    }
    clock = std::max(clock.value_or(p.settled_at), p.settled_at);
    binning.Add(p);
    binning.Close(*clock, closed);
  });
  binning.Finish(closed);
  for (const auto& o : closed) observations << EncodeObservation(o) << '\n';
}

void ScoreStream(std::istream& observations, std::ostream& scores,
                 const PipelineConfig& cfg) {
  cfg.Validate();
  ReferenceDetector detector(cfg.detector, cfg.aggregation.eta);
  ForEachLine(observations, [&](std::string_view line, std::size_t number) {
    AggregatedObservation o;
    try {
      o = DecodeObservation(line);
    } catch (const ParseError& e) {
      throw LineError(number, e.what());
    }
    const ScoreRecord record{o.tau,
                             detector.Observe(FeatureVector::FromObservation(o))};
    scores << EncodeScore(record) << '\n';
  });
}

void ExplainStream(std::istream& scores, std::ostream& verdicts) {
  ForEachLine(scores, [&](std::string_view line, std::size_t number) {
    ScoreRecord s;
    try {
      s = DecodeScore(line);
    } catch (const ParseError& e) {
      throw LineError(number, e.what());
    }
    if (!s.detection.labels.any()) return;
    verdicts << EncodeVerdict(
                    Explain(s.detection.scores, s.detection.labels, s.tau))
             << '\n';
  });
}

}  // namespace ipmon
