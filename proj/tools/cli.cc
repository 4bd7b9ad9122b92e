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

#include "cli.h"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "ipmon/records.h"
#include "ipmon/simulator.h"
#include "json.hpp"

namespace ipmon::cli {
namespace {

using Json = nlohmann::ordered_json;

// Bad input data or unusable files: exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments detected after parsing: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ReadFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Input or output that may be a standard stream ("-").
class Input {
 public:
  Input(const std::string& path, std::istream& stdin_stream) {
    if (path == "-") {
      stream_ = &stdin_stream;
      return;
    }
    file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file_) throw DataError("cannot open '" + path + "'");
    stream_ = file_.get();
  }
  std::istream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::istream* stream_ = nullptr;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& stdout_stream) {
    if (path.empty() || path == "-") {
      stream_ = &stdout_stream;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw DataError("cannot write '" + path + "'");
    stream_ = file_.get();
  }
  std::ostream& get() { return *stream_; }
  bool is_stdout() const { return file_ == nullptr; }
  void Close() {
    stream_->flush();
    if (file_) {
      file_->close();
      if (file_->fail()) throw DataError("write failure");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

std::string Fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string JoinRules(const std::vector<std::string>& rules, char sep) {
  std::string s;
  for (const auto& r : rules) {
    if (!s.empty()) s += sep;
    s += r;
  }
  return s;
}

std::string ScenarioNameList() {
  std::string s;
  for (const auto& n : BuiltinScenarioNames()) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

std::uint64_t DeriveSeed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// Flags shared by the commands that run the pipeline.
struct PipelineFlags {
  std::string config_path;
  std::optional<Millis> eta;
  std::optional<double> theta_v;
  std::optional<double> theta_delta;
  std::optional<std::string> agg;
  bool show_config = false;
  bool threaded = false;

  void Register(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "Pipeline configuration file (JSON)");
    cmd->add_option("--eta-ms", eta, "Bin width in milliseconds");
    cmd->add_option("--theta-v", theta_v, "Volume threshold in (0, 1)");
    cmd->add_option("--theta-delta", theta_delta,
                    "Threshold shared by d1, d2 and d3, in (0, 1)");
    cmd->add_option("--agg", agg, "Per-bin aggregation of the deltas")
        ->check(CLI::IsMember({"mean", "median"}));
    cmd->add_flag("--show-config", show_config,
                  "Print the effective configuration and exit");
    cmd->add_flag("--threaded", threaded,
                  "Run feature extraction and scoring on separate threads");
  }

  // Defaults, then the config file, then flags.
  PipelineConfig Build() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = ParsePipelineConfig(ReadFile(config_path));
    if (eta) cfg.aggregation.eta = *eta;
    if (agg) cfg.aggregation.agg_fn = ParseAggregationFn(*agg);
    if (theta_v) cfg.detector.theta[Feature::kV] = *theta_v;
    if (theta_delta) {
      for (Feature f : kDeltaFeatures) cfg.detector.theta[f] = *theta_delta;
    }
    try {
      cfg.Validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("invalid configuration: ") + e.what());
    }
    return cfg;
  }
};

// Optional JSONL side outputs of a pipeline run.
struct StreamFlags {
  std::string payments;
  std::string observations;
  std::string scores;
  std::string summary;

  void Register(CLI::App* cmd) {
    cmd->add_option("--payments", payments, "Write settled payments (JSONL)");
    cmd->add_option("--observations", observations,
                    "Write the resampled series (JSONL)");
    cmd->add_option("--scores", scores, "Write per-bin scores (JSONL)");
    cmd->add_option("--summary", summary, "Write the run summary (JSON)");
  }
};

std::unique_ptr<std::ofstream> OpenSide(const std::string& path) {
  if (path.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*f) throw DataError("cannot write '" + path + "'");
  return f;
}

// Runs the pipeline over `source`, writing verdicts to `verdicts_path` and
// the requested side streams. The text summary goes to `out` unless the
// verdicts already occupy it.
int RunAndReport(EventSource& source, const PipelineConfig& cfg,
                 const StreamFlags& streams, const std::string& verdicts_path,
                 RunOptions options, std::ostream& out, std::ostream& err) {
  Output verdicts(verdicts_path, out);
  auto payments = OpenSide(streams.payments);
  auto observations = OpenSide(streams.observations);
  auto scores = OpenSide(streams.scores);
  JsonlSink sink({payments.get(), observations.get(), scores.get(),
                  &verdicts.get()});
  const RunSummary summary = RunPipeline(source, cfg, sink, std::move(options));
  verdicts.Close();
  for (auto* f : {payments.get(), observations.get(), scores.get()}) {
    if (f && (f->flush(), f->fail())) throw DataError("write failure");
  }
  if (!streams.summary.empty()) {
    Output s(streams.summary, out);
    s.get() << EncodeSummary(summary) << '\n';
    s.Close();
  }
  RenderSummary(summary, verdicts.is_stdout() ? err : out);
  return kExitOk;
}

std::optional<Scenario> LoadScenario(const std::string& name_or_path) {
  if (auto s = FindBuiltinScenario(name_or_path)) return s;
  if (name_or_path.size() > 5 &&
      name_or_path.compare(name_or_path.size() - 5, 5, ".json") == 0) {
    return ParseScenarioConfig(ReadFile(name_or_path));
  }
  std::ifstream probe(name_or_path);
  if (probe) return ParseScenarioConfig(ReadFile(name_or_path));
  return std::nullopt;
}

int CmdScenarios(const std::string& format, std::ostream& out) {
  if (format == "json") {
    Json arr = Json::array();
    for (const auto& s : BuiltinScenarios()) {
      arr.push_back(Json::parse(EncodeScenarioConfig(s)));
    }
    out << arr.dump(2) << '\n';
    return kExitOk;
  }
  for (const auto& s : BuiltinScenarios()) {
    const InjectionWindow& w = s.windows.front();
    std::string targets;
    for (Feature f : w.targets) {
      if (!targets.empty()) targets += ",";
      targets += ToString(f);
    }
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-18s %2lld min  targets %-6s x%-5s drop %-7s %s\n",
                  s.name.c_str(),
                  static_cast<long long>((w.end_ms - w.start_ms) / 60000),
                  targets.c_str(), Fixed(w.delay_multiplier, 1).c_str(),
                  Fixed(w.drop_fraction, 4).c_str(), s.provenance.c_str());
    out << line;
  }
  return kExitOk;
}

int CmdSimulate(const std::string& scenario, std::optional<std::uint64_t> seed,
                const std::string& out_path, std::string truth_path,
                std::ostream& out, std::ostream& err) {
  std::optional<Scenario> scenario_def;
  bool from_file = false;
  if (!(scenario_def = FindBuiltinScenario(scenario))) {
    scenario_def = LoadScenario(scenario);
    from_file = scenario_def.has_value();
  }
  if (!scenario_def) {
    err << "unknown scenario '" << scenario << "'; valid names: "
        << ScenarioNameList() << '\n';
    return kExitUsage;
  }
  if (seed) {
    scenario_def->profile.seed = *seed;
  } else if (!from_file || !Json::parse(ReadFile(scenario))
                                .value("profile", Json::object())
                                .contains("seed")) {
    scenario_def->profile.seed = DeriveSeed();
    err << "seed: " << scenario_def->profile.seed << '\n';
  }

  const SimulationOutput sim = Generate(*scenario_def);
  Output trace(out_path, out);
  for (const auto& e : sim.events) trace.get() << EncodeEvent(e) << '\n';
  trace.Close();

  if (truth_path.empty() && !trace.is_stdout()) {
    truth_path = out_path + ".truth.json";
  }
  if (!truth_path.empty()) {
    Output truth(truth_path, out);
    truth.get() << EncodeGroundTruth(sim.truth) << '\n';
    truth.Close();
  }
  err << "simulated " << sim.transactions.size() << " transactions, "
      << sim.events.size() << " events (" << scenario_def->name << ", seed "
      << scenario_def->profile.seed << ")\n";
  return kExitOk;
}

int CmdDetect(const std::string& trace_path, const PipelineFlags& flags,
              const StreamFlags& streams, const std::string& out_path,
              const std::string& truth_path, std::istream& in,
              std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = flags.Build();
  if (flags.show_config) {
    out << EncodePipelineConfig(cfg) << '\n';
    return kExitOk;
  }
  if (trace_path.empty()) throw UsageError("detect: a trace file is required");
  RunOptions options;
  options.threaded = flags.threaded;
  if (!truth_path.empty()) {
    options.windows = DecodeGroundTruth(ReadFile(truth_path)).windows;
  }
  Input trace(trace_path, in);
  JsonlEventSource source(trace.get());
  return RunAndReport(source, cfg, streams, out_path, std::move(options), out,
                      err);
}

int CmdReplay(const std::string& fixture, std::optional<std::uint64_t> seed,
              const PipelineFlags& flags, const StreamFlags& streams,
              const std::string& out_path, std::ostream& out,
              std::ostream& err) {
  const PipelineConfig cfg = flags.Build();
  if (flags.show_config) {
    out << EncodePipelineConfig(cfg) << '\n';
    return kExitOk;
  }
  std::optional<Scenario> scenario_def = FindBuiltinScenario(fixture);
  if (!scenario_def) {
    err << "unknown fixture '" << fixture << "'; valid names: "
        << ScenarioNameList() << '\n';
    return kExitUsage;
  }
  // Fixtures are pinned to the seed of their definition.
  if (seed) scenario_def->profile.seed = *seed;
  const SimulationOutput sim = Generate(*scenario_def);
  RunOptions options;
  options.threaded = flags.threaded;
  options.windows = sim.truth.windows;
  VectorEventSource source(sim.events);
  std::ostream& log = out_path.empty() || out_path == "-" ? err : out;
  log << "replay " << scenario_def->name << " (seed " << scenario_def->profile.seed << ", "
      << sim.events.size() << " events)\n";
  return RunAndReport(source, cfg, streams, out_path, std::move(options), out,
                      err);
}

int CmdReport(const std::string& path, const std::string& format,
              const std::string& out_path, std::istream& in,
              std::ostream& out) {
  Input input(path, in);
  std::vector<Verdict> verdicts;
  ForEachLine(input.get(), [&](std::string_view line, std::size_t number) {
    try {
      verdicts.push_back(DecodeVerdict(line));
    } catch (const ParseError& e) {
      throw LineError(number, e.what());
    }
  });
  const ReportFormat f = format == "csv"    ? ReportFormat::kCsv
                         : format == "json" ? ReportFormat::kJson
                                            : ReportFormat::kText;
  Output o(out_path, out);
  RenderReport(verdicts, f, o.get());
  o.Close();
  return kExitOk;
}

}  // namespace

void RenderReport(std::span<const Verdict> verdicts, ReportFormat format,
                  std::ostream& out) {
  auto loc = [](const Verdict& v) {
    return std::string(v.localization ? ToString(*v.localization) : "none");
  };
  if (format == ReportFormat::kJson) {
    Json arr = Json::array();
    for (const Verdict& v : verdicts) {
      Json j = Json::parse(EncodeVerdict(v));
      j["pattern"] = PatternCode(v);
      arr.push_back(j);
    }
    out << arr.dump(2) << '\n';
    return;
  }
  if (format == ReportFormat::kCsv) {
    out << "tau_ms,pattern,a_d1,a_d2,a_d3,a_v,y_d1,y_d2,y_d3,y_v,"
           "localization,incident,business_impact,timeout_risk,rules\n";
    for (const Verdict& v : verdicts) {
      out << v.tau << ',' << PatternCode(v);
      for (Feature f : kAllFeatures) {
        out << ',';
        if (v.scores.a[f]) out << Fixed(*v.scores.a[f], 4);
      }
      for (Feature f : kAllFeatures) out << ',' << (v.labels.y[f] ? 1 : 0);
      out << ',' << loc(v) << ',' << ToString(v.severity) << ','
          << (v.business_impact ? "yes" : "no") << ','
          << (v.timeout_risk ? "yes" : "no") << ','
          << JoinRules(v.triggering_rules, ';') << '\n';
    }
    return;
  }
  char line[256];
  std::snprintf(line, sizeof(line),
                "%-10s %-7s %-6s %-6s %-6s %-6s %-13s %-23s %-6s %-7s %s\n",
                "tau_ms", "pattern", "a(d1)", "a(d2)", "a(d3)", "a(v)",
                "localization", "incident", "impact", "timeout", "rules");
  out << line;
  for (const Verdict& v : verdicts) {
    std::string cells[4];
    for (Feature f : kAllFeatures) {
      std::string& c = cells[static_cast<std::size_t>(f)];
      c = v.scores.a[f] ? Fixed(*v.scores.a[f]) : "---";
      if (v.labels.y[f]) c += "*";
    }
    const std::string pattern = PatternCode(v);
    std::snprintf(line, sizeof(line),
                  "%-10lld %-7s %-6s %-6s %-6s %-6s %-13s %-23s %-6s %-7s %s\n",
                  static_cast<long long>(v.tau),
                  pattern.empty() ? "-" : pattern.c_str(), cells[0].c_str(),
                  cells[1].c_str(), cells[2].c_str(), cells[3].c_str(),
                  loc(v).c_str(), std::string(ToString(v.severity)).c_str(),
                  v.business_impact ? "yes" : "no",
                  v.timeout_risk ? "yes" : "no",
                  JoinRules(v.triggering_rules, ',').c_str());
    out << line;
  }
  out << verdicts.size() << " verdicts (* = labeled anomalous)\n";
}

void RenderSummary(const RunSummary& s, std::ostream& out) {
  out << "events " << s.events_read << ", invalid " << s.invalid_events
      << ", settled " << s.settled_payments << ", late " << s.late_payments
      << ", bins " << s.bins << ", anomalous bins " << s.anomalous_bins
      << '\n';
  if (!s.notices.empty()) {
    out << "notices:";
    for (const auto& [k, n] : s.notices) out << ' ' << k << '=' << n;
    out << '\n';
  }
  auto verdict_text = [](const EpisodeVerdict& v) {
    return std::string(ToString(v.localization)) + " / " +
           std::string(ToString(v.severity)) +
           ", impact " + (v.business_impact ? "yes" : "no") +
           ", timeout risk " + (v.timeout_risk ? "yes" : "no");
  };
  for (const auto& w : s.windows) {
    out << "window " << w.window.label << " [" << w.window.start_ms << ", "
        << w.window.end_ms << ") " << w.bins << " bins, max scores:";
    for (Feature f : kAllFeatures) {
      const auto m = w.detected_max(f);
      out << " a(" << ToString(f) << ")=" << (m ? Fixed(*m) : "---");
    }
    out << "\n  verdict: "
        << (w.verdict ? verdict_text(*w.verdict) : std::string("none"))
        << '\n';
  }
  out << "episodes: " << s.episodes.size() << '\n';
  for (const auto& e : s.episodes) {
    out << "  [" << e.start_tau << ", " << e.end_tau << "] " << e.bins
        << " bins, " << verdict_text(e.verdict) << '\n';
  }
  out << "latency per bin: max " << Fixed(s.latency.max_ms, 3) << " ms, mean "
      << Fixed(s.latency.mean_ms, 3) << " ms, budget " << s.latency.budget_ms
      << " ms (" << (s.latency.within_budget ? "ok" : "exceeded") << ")\n";
}

int Run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err) {
  CLI::App app{"Instant-payment monitoring: simulate, detect, explain"};
  app.name("ipmon");
  app.require_subcommand(1);

  std::string format = "text";
  std::string out_path;
  std::optional<std::uint64_t> seed;

  auto* scenarios = app.add_subcommand("scenarios", "List built-in scenarios");
  scenarios->add_option("--format", format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  std::string scenario;
  std::string truth_out;
  auto* simulate =
      app.add_subcommand("simulate", "Generate a trace with ground truth");
  simulate
      ->add_option("scenario", scenario,
                   "Built-in scenario name or scenario file (JSON)")
      ->required();
  simulate->add_option("--seed", seed, "Random seed (derived when absent)");
  simulate->add_option("-o,--out", out_path, "Trace output (JSONL, - = stdout)");
  simulate->add_option("--truth", truth_out,
                       "Ground truth output (default: <out>.truth.json)");

  std::string trace_in;
  std::string truth_in;
  PipelineFlags detect_flags;
  StreamFlags detect_streams;
  auto* detect = app.add_subcommand("detect", "Run the pipeline on a trace");
  detect->add_option("trace", trace_in, "Trace input (JSONL, - = stdin)");
  detect->add_option("-o,--out", out_path,
                     "Verdict output (JSONL, - = stdout)");
  detect->add_option("--truth", truth_in,
                     "Ground truth file: report scores per window");
  detect_flags.Register(detect);
  detect_streams.Register(detect);

  std::string fixture;
  PipelineFlags replay_flags;
  StreamFlags replay_streams;
  auto* replay =
      app.add_subcommand("replay", "Run a built-in fixture end to end");
  replay->add_option("fixture", fixture, "Built-in scenario name")->required();
  replay->add_option("--seed", seed, "Override the fixture seed");
  replay->add_option("-o,--out", out_path,
                     "Verdict output (JSONL, - = stdout)");
  replay_flags.Register(replay);
  replay_streams.Register(replay);

  std::string verdicts_in;
  auto* report = app.add_subcommand("report", "Render verdicts as a table");
  report->add_option("verdicts", verdicts_in, "Verdict input (JSONL, - = stdin)")
      ->required();
  report->add_option("--format", format, "text, csv or json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  report->add_option("-o,--out", out_path, "Output (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "run 'ipmon --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (scenarios->parsed()) return CmdScenarios(format, out);
    if (simulate->parsed()) {
      return CmdSimulate(scenario, seed, out_path, truth_out, out, err);
    }
    if (detect->parsed()) {
      return CmdDetect(trace_in, detect_flags, detect_streams, out_path,
                       truth_in, in, out, err);
    }
    if (replay->parsed()) {
      return CmdReplay(fixture, seed, replay_flags, replay_streams, out_path,
                       out, err);
    }
    if (report->parsed()) {
      return CmdReport(verdicts_in, format, out_path, in, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const InconsistentLabelsError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ipmon::cli
