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

#include <gtest/gtest.h>

#include <sstream>

namespace ipmon {
namespace {

struct Fused {
  std::string payments, observations, scores, verdicts;
  RunSummary summary;
};

Fused RunFused(const std::vector<TraceEvent>& events, const PipelineConfig& cfg,
               RunOptions opts = {}) {
  std::ostringstream p, o, s, v;
  JsonlSink sink({&p, &o, &s, &v});
  VectorEventSource src(events);
  Fused f;
  f.summary = RunPipeline(src, cfg, sink, std::move(opts));
  f.payments = p.str();
  f.observations = o.str();
  f.scores = s.str();
  f.verdicts = v.str();
  return f;
}

std::string Trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (const auto& e : events) out += EncodeEvent(e) + "\n";
  return out;
}

SimulationOutput Sim(const std::string& name, std::uint64_t seed = 1) {
  Scenario scenario_def = *FindBuiltinScenario(name);
  scenario_def.profile.seed = seed;
  return Generate(scenario_def);
}

RunOptions WithTruth(const SimulationOutput& sim) {
  RunOptions o;
  o.windows = sim.truth.windows;
  return o;
}

TEST(PipelineTest, EmptyInputProducesNothing) {
  CollectingSink sink;
  VectorEventSource src({});
  const RunSummary s = RunPipeline(src, PipelineConfig{}, sink);
  EXPECT_EQ(s.bins, 0u);
  EXPECT_EQ(s.events_read, 0u);
  EXPECT_TRUE(sink.verdicts.empty());
  EXPECT_TRUE(s.episodes.empty());
}

TEST(PipelineTest, OneScorePerBinAndOneVerdictPerAnomalousBin) {
  const auto sim = Sim("s1-mild-internal");
  CollectingSink sink;
  VectorEventSource src(sim.events);
  const RunSummary s = RunPipeline(src, PipelineConfig{}, sink);
  EXPECT_EQ(sink.scores.size(), s.bins);
  EXPECT_EQ(sink.observations.size(), s.bins);
  EXPECT_EQ(sink.verdicts.size(), s.anomalous_bins);
  for (std::size_t k = 1; k < sink.observations.size(); ++k) {
    ASSERT_EQ(sink.observations[k].tau - sink.observations[k - 1].tau, 1000);
    ASSERT_EQ(sink.scores[k].tau, sink.observations[k].tau);
  }
  for (const auto& v : sink.verdicts) ASSERT_TRUE(v.labels.any());
  EXPECT_EQ(s.events_read, sim.events.size());
  EXPECT_EQ(s.invalid_events, 0u);
}

TEST(PipelineTest, MildInternalStressDetectsOnlyInternalPhases) {
  const auto sim = Sim("s1-mild-internal");
  const Fused f = RunFused(sim.events, PipelineConfig{}, WithTruth(sim));
  ASSERT_EQ(f.summary.windows.size(), 1u);
  const WindowReport& w = f.summary.windows.front();
  EXPECT_TRUE(w.labeled[Feature::kD1]);
  EXPECT_TRUE(w.labeled[Feature::kD3]);
  EXPECT_FALSE(w.labeled[Feature::kD2]);
  EXPECT_FALSE(w.labeled[Feature::kV]);
  ASSERT_TRUE(w.verdict);
  EXPECT_EQ(w.verdict->localization, Localization::kInternal);
  EXPECT_EQ(w.verdict->severity, Severity::kPerformanceDegradation);
}

TEST(PipelineTest, IncidentIsOneExternalCriticalEpisode) {
  const auto sim = Sim("nsp-incident");
  const Fused f = RunFused(sim.events, PipelineConfig{}, WithTruth(sim));
  ASSERT_EQ(f.summary.episodes.size(), 1u);
  const Episode& e = f.summary.episodes.front();
  EXPECT_EQ(e.verdict.localization, Localization::kExternal);
  EXPECT_EQ(e.verdict.severity, Severity::kCritical);
  EXPECT_TRUE(e.verdict.business_impact);
  const auto& w = sim.truth.windows.front();
  EXPECT_GE(e.start_tau, w.start_ms - 1000);
  EXPECT_LT(e.start_tau, w.start_ms + 60'000);
}

TEST(PipelineTest, StagedRunMatchesFusedRunByteForByte) {
  const auto sim = Sim("s2-multi-internal");
  const PipelineConfig cfg;
  const Fused f = RunFused(sim.events, cfg);

  std::istringstream trace(Trace(sim.events));
  std::ostringstream payments;
  CorrelateStream(trace, payments, cfg);
  EXPECT_EQ(payments.str(), f.payments);

  std::istringstream pin(payments.str());
  std::ostringstream observations;
  AggregateStream(pin, observations, cfg);
  EXPECT_EQ(observations.str(), f.observations);

  std::istringstream oin(observations.str());
  std::ostringstream scores;
  ScoreStream(oin, scores, cfg);
  EXPECT_EQ(scores.str(), f.scores);

  std::istringstream sin(scores.str());
  std::ostringstream verdicts;
  ExplainStream(sin, verdicts);
  EXPECT_EQ(verdicts.str(), f.verdicts);
  EXPECT_FALSE(f.verdicts.empty());
}

TEST(PipelineTest, ThreadedRunMatchesSequentialRun) {
  const auto sim = Sim("s3-external", 3);
  const Fused seq = RunFused(sim.events, PipelineConfig{}, WithTruth(sim));
  RunOptions opts = WithTruth(sim);
  opts.threaded = true;
  opts.channel_capacity = 7;
  const Fused thr = RunFused(sim.events, PipelineConfig{}, std::move(opts));
  EXPECT_EQ(thr.payments, seq.payments);
  EXPECT_EQ(thr.observations, seq.observations);
  EXPECT_EQ(thr.scores, seq.scores);
  EXPECT_EQ(thr.verdicts, seq.verdicts);
  EXPECT_EQ(thr.summary.episodes.size(), seq.summary.episodes.size());
  EXPECT_EQ(thr.summary.bins, seq.summary.bins);
}

TEST(PipelineTest, ExplicitAlphaOverridesAuto) {
  const auto sim = Sim("s1-mild-internal");
  PipelineConfig cfg;
  cfg.auto_alpha = false;
  cfg.aggregation.alpha = 500;
  CollectingSink sink;
  VectorEventSource src(sim.events);
  RunPipeline(src, cfg, sink);
  ASSERT_FALSE(sink.observations.empty());
  EXPECT_EQ(sink.observations.front().tau, 500);
}

TEST(PipelineTest, InvalidEventsAreCountedAndSkipped) {
  std::vector<TraceEvent> events = {
      MakeEvent("A", Leg::kInbound008, 0), MakeEvent("A", Leg::kOutbound008, 40),
      MakeEvent("A", Leg::kInbound002, 600), MakeEvent("A", Leg::kOutbound002, 650)};
  TraceEvent bad = events[0];
  bad.counterparty = Counterparty::kBoth;
  events.insert(events.begin() + 1, bad);
  CollectingSink sink;
  VectorEventSource src(events);
  const RunSummary s = RunPipeline(src, PipelineConfig{}, sink);
  EXPECT_EQ(s.invalid_events, 1u);
  EXPECT_EQ(s.settled_payments, 1u);
  ASSERT_EQ(sink.payments.size(), 1u);
}

TEST(JsonlEventSourceTest, ReportsTheFailingLine) {
  std::istringstream in(EncodeEvent(MakeEvent("A", Leg::kInbound008, 0)) +
                        "\n\nnot json\n");
  JsonlEventSource src(in);
  EXPECT_TRUE(src.Next());
  try {
    src.Next();
    FAIL() << "expected LineError";
  } catch (const LineError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(SummarizeTest, MaxSeverityModeLocalizationAndFlags) {
  ScoreVector a;
  a.a = {0.9, 0.1, 0.1, 0.6};
  std::vector<Verdict> vs = {
      Explain(a, LabelVector{{true, false, false, false}}, 0),
      Explain(a, LabelVector{{true, false, false, false}}, 1000),
      Explain(a, LabelVector{{false, true, false, true}}, 2000),
  };
  const auto s = Summarize(vs);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->localization, Localization::kInternal);
  EXPECT_EQ(s->severity, Severity::kMajor);
  EXPECT_TRUE(s->business_impact);
  EXPECT_TRUE(s->timeout_risk);
  EXPECT_FALSE(Summarize(std::vector<Verdict>{}));
  EXPECT_FALSE(Summarize(std::vector<Verdict>{Explain(a, LabelVector{}, 0)}));
}

TEST(SummarizeTest, IndeterminateOnlyWhenNothingElse) {
  ScoreVector a;
  a.a = {0.1, 0.1, 0.1, 0.6};
  std::vector<Verdict> vs(3, Explain(a, LabelVector{{false, false, false, true}}, 0));
  EXPECT_EQ(Summarize(vs)->localization, Localization::kIndeterminate);
  vs.push_back(Explain(a, LabelVector{{false, true, false, true}}, 0));
  EXPECT_EQ(Summarize(vs)->localization, Localization::kExternal);
}

TEST(PipelineConfigTest, ParseEncodeRoundTrip) {
  PipelineConfig cfg;
  cfg.aggregation.eta = 2000;
  cfg.aggregation.agg_fn = AggregationFn::kMean;
  cfg.detector.theta[Feature::kV] = 0.3;
  cfg.detector.latency_budget = 500;
  cfg.auto_alpha = false;
  cfg.aggregation.alpha = 42;
  cfg.emit.scores = true;
  const PipelineConfig back = ParsePipelineConfig(EncodePipelineConfig(cfg));
  EXPECT_EQ(EncodePipelineConfig(back), EncodePipelineConfig(cfg));
  EXPECT_EQ(back.aggregation.eta, 2000);
  EXPECT_EQ(back.detector.theta[Feature::kV], 0.3);
  EXPECT_FALSE(back.auto_alpha);
}

TEST(PipelineConfigTest, PartialFileKeepsBaseValues) {
  const PipelineConfig cfg = ParsePipelineConfig("{}");
  EXPECT_EQ(EncodePipelineConfig(cfg), EncodePipelineConfig(PipelineConfig{}));
}

TEST(PipelineConfigTest, Errors) {
  EXPECT_THROW(ParsePipelineConfig(R"({"bogus": 1})"), ParseError);
  EXPECT_THROW(ParsePipelineConfig("{"), ParseError);
  PipelineConfig cfg;
  cfg.detector.latency_budget = cfg.aggregation.eta;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
}

TEST(SummaryTest, EncodesAsJson) {
  const auto sim = Sim("s1-mild-internal");
  const Fused f = RunFused(sim.events, PipelineConfig{}, WithTruth(sim));
  const std::string js = EncodeSummary(f.summary);
  EXPECT_NE(js.find("\"episodes\""), std::string::npos);
  EXPECT_NE(js.find("\"windows\""), std::string::npos);
  EXPECT_TRUE(f.summary.latency.within_budget);
}

}  // namespace
}  // namespace ipmon
