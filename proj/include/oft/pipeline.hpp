#pragma once

// Offline monitor over recorded streams, and the end-to-end validation run
// (simulate, monitor, correlate with the scripted ground truth).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"
#include "oft/fusion.hpp"
#include "oft/io.hpp"
#include "oft/microworld.hpp"
#include "oft/monitor.hpp"
#include "oft/physio.hpp"
#include "oft/regulation.hpp"
#include "oft/stats.hpp"
#include "oft/taskload.hpp"

namespace oft::pipeline {

struct MonitorInputs {
  std::vector<regulation::TaskTick> ticks;
  std::vector<taskload::ConstraintFrame> constraints;
  physio::RRSeries beats;
  physio::PupilSeries pupil;
};

struct MonitorResult {
  std::vector<fusion::MwlState> states;
  std::vector<regulation::RegulationEvent> events;
  std::vector<regulation::ActivitySnapshot> trace;
  physio::FeatureMetadata physio;
  nlohmann::json report;
};

inline std::vector<regulation::TaskTick> parse_ticks(const std::string& text) {
  std::vector<regulation::TaskTick> out;
  for (const auto& j : io::parse_jsonl(text, "ticks")) {
    try {
      regulation::TaskTick t;
      t.t = j.at("t").get<int>();
      t.perf = j.at("perf").get<double>();
      for (const auto& s : j.at("tasks")) {
        regulation::TaskState st;
        st.active = s.at("active").get<bool>();
        if (s.contains("achieved") && !s.at("achieved").is_null()) st.achieved = s.at("achieved").get<bool>();
        t.tasks.push_back(st);
      }
      t.validate();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(std::string("ticks stream: ") + e.what());
    } catch (const IngestionError&) {
      throw;
    } catch (const DataError& e) {
      throw IngestionError(std::string("ticks stream: ") + e.what());
    }
  }
  return out;
}

inline std::vector<taskload::ConstraintFrame> parse_constraints(const std::string& text) {
  std::vector<taskload::ConstraintFrame> out;
  for (const auto& j : io::parse_jsonl(text, "constraints")) {
    try {
      out.push_back({j.at("t").get<int>(), j.at("n1").get<int>(), j.at("n2").get<int>(), j.at("entropy").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(std::string("constraints stream: ") + e.what());
    }
  }
  return out;
}

inline void check_alignment(const MonitorInputs& in) {
  for (std::size_t i = 0; i < in.ticks.size(); ++i) {
    if (in.ticks[i].t != static_cast<int>(i)) throw IngestionError("ticks stream: seconds must run 0, 1, 2, ... without gaps");
  }
  if (in.constraints.size() != in.ticks.size()) throw IngestionError("constraints stream: length differs from the ticks stream");
  for (std::size_t i = 0; i < in.constraints.size(); ++i) {
    if (in.constraints[i].t != static_cast<int>(i)) throw IngestionError("constraints stream: misaligned with the ticks stream");
  }
  const double end = static_cast<double>(in.ticks.size()) + 1.0;
  if (!in.beats.timestamps_s.empty() && (in.beats.timestamps_s.front() < 0.0 || in.beats.timestamps_s.back() > end + 2.0)) {
    throw IngestionError("beats stream: timestamps fall outside the activity time range");
  }
  if (!in.pupil.empty() && (in.pupil.front().t_s < 0.0 || in.pupil.back().t_s > end)) {
    throw IngestionError("pupil stream: timestamps fall outside the activity time range");
  }
}

inline nlohmann::json level_histogram(const std::vector<fusion::MwlState>& states) {
  std::array<int, 5> n{};
  for (const auto& s : states) ++n[static_cast<std::size_t>(s.level - 1)];
  nlohmann::json j;
  for (int k = 0; k < 5; ++k) j[std::to_string(k + 1)] = n[static_cast<std::size_t>(k)];
  return j;
}

// Whole-run monitor: pupil z uses the configured baseline window (default
// the whole session), other evidence is fed second by second.
inline MonitorResult run_monitor(const MonitorInputs& in, const monitor::EngineConfig& cfg = {}) {
  check_alignment(in);
  MonitorResult r;
  const int duration = static_cast<int>(in.ticks.size());
  const auto features = physio::extract_features(in.beats, in.pupil, duration, cfg.physio);
  r.physio = features.metadata;
  monitor::MwlMonitor mon(cfg);
  for (int t = 0; t < duration; ++t) {
    const auto& f = features.frames[static_cast<std::size_t>(t)];
    std::optional<double> z;
    if (!std::isnan(f.pupil_z)) z = f.pupil_z;
    r.states.push_back(mon.step(in.ticks[static_cast<std::size_t>(t)], in.constraints[static_cast<std::size_t>(t)], z));
  }
  r.events = mon.tracker().events();
  r.trace = mon.tracker().trace();
  std::map<std::string, int> kinds;
  for (auto k : {regulation::RegulationKind::kPBR, regulation::RegulationKind::kCBR, regulation::RegulationKind::kCOBR,
                 regulation::RegulationKind::kPRBR, regulation::RegulationKind::kPerformanceOrientedOther}) {
    kinds[regulation::to_string(k)] = 0;
  }
  for (const auto& e : r.events) ++kinds[regulation::to_string(e.kind)];
  r.report = {{"duration_s", duration},
              {"time_at_level", level_histogram(r.states)},
              {"regulation_events", kinds},
              {"compliance_rate", regulation::compliance_rate(r.trace)},
              {"physio", io::to_json(r.physio)}};
  return r;
}

inline MonitorInputs inputs_from_log(const microworld::RunLog& log) {
  MonitorInputs in;
  for (const auto& t : log.ticks) {
    in.ticks.push_back(t.tick);
    in.constraints.push_back(t.constraints);
  }
  in.beats = log.beats;
  in.pupil = log.pupil;
  return in;
}

inline std::string mwl_jsonl(const std::vector<fusion::MwlState>& states) {
  std::string s;
  for (const auto& st : states) s += fusion::to_json(st).dump() + "\n";
  return s;
}

inline std::string events_jsonl(const std::vector<regulation::RegulationEvent>& events) {
  std::string s;
  for (const auto& e : events) s += nlohmann::json{{"t", e.t}, {"kind", regulation::to_string(e.kind)}}.dump() + "\n";
  return s;
}

inline constexpr double kLatentThreshold = 0.5;
inline constexpr double kIsaThreshold = 0.4;

struct EndToEndResult {
  microworld::RunLog log;
  MonitorResult monitor;
  double rho_latent = 0.0;
  double rho_isa = 0.0;
  nlohmann::json report;
};

// Throws UndefinedCorrelationError when the latent load (or the ISA series)
// has no variance, e.g. under a flat-load script.
inline EndToEndResult endtoend(const microworld::ScenarioConfig& scenario, const microworld::OperatorScript& op, bool dfa,
                               const monitor::EngineConfig& cfg = {}) {
  EndToEndResult r;
  r.log = microworld::run_scenario(scenario, op, dfa, cfg);
  r.monitor = run_monitor(inputs_from_log(r.log), cfg);
  std::vector<double> level, latent;
  for (std::size_t i = 0; i < r.monitor.states.size(); ++i) {
    level.push_back(r.monitor.states[i].level);
    latent.push_back(r.log.ticks[i].latent);
  }
  r.rho_latent = stats::spearman(level, latent);
  std::vector<double> at_isa, isa;
  for (const auto& s : r.log.isa) {
    at_isa.push_back(r.monitor.states[static_cast<std::size_t>(s.t)].level);
    isa.push_back(s.value);
  }
  r.rho_isa = stats::spearman(at_isa, isa);
  r.report = {{"scenario", {{"seed", scenario.seed}, {"operator", op.name}, {"dfa", dfa}, {"duration_s", scenario.duration_s}}},
              {"n_ticks", level.size()},
              {"n_isa", isa.size()},
              {"spearman_level_latent", r.rho_latent},
              {"spearman_level_isa", r.rho_isa},
              {"thresholds", {{"level_latent", kLatentThreshold}, {"level_isa", kIsaThreshold}}},
              {"pass", {{"level_latent", r.rho_latent >= kLatentThreshold}, {"level_isa", r.rho_isa >= kIsaThreshold}}},
              {"time_at_level", r.monitor.report.at("time_at_level")},
              {"compliance_rate", r.log.summary.compliance_rate}};
  return r;
}

}  // namespace oft::pipeline
