#pragma once

// Per-second MWL monitor: turns task ticks, constraint frames and pupil
// z-scores into evidence for the fusion network. Also hosts the engine
// configuration that bundles every tunable section.

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/adapt.hpp"
#include "oft/error.hpp"
#include "oft/fusion.hpp"
#include "oft/io.hpp"
#include "oft/physio.hpp"
#include "oft/regulation.hpp"
#include "oft/taskload.hpp"

namespace oft::monitor {

struct EngineConfig {
  double perf_threshold = regulation::kDefaultPerfThreshold;
  taskload::RuleTable rules = taskload::RuleTable::defaults();
  fusion::FusionConfig fusion = fusion::default_fusion_config();
  std::vector<adapt::AssistanceRule> adapt_rules = adapt::default_rules();
  double hold_s = 5.0;
  physio::FeatureOptions physio;
  double online_baseline_s = 120.0;
};

inline nlohmann::json to_json(const EngineConfig& c) {
  nlohmann::json physio{{"sdnn_span", c.physio.sdnn_span},
                        {"baseline_begin_s", c.physio.baseline_begin_s},
                        {"baseline_end_s", std::isinf(c.physio.baseline_end_s) ? nlohmann::json(nullptr)
                                                                               : nlohmann::json(c.physio.baseline_end_s)},
                        {"online_baseline_s", c.online_baseline_s}};
  return {{"regulation", {{"perf_threshold", c.perf_threshold}}},
          {"taskload", taskload::to_json(c.rules)},
          {"fusion", fusion::to_json(c.fusion)},
          {"adapt", adapt::to_json(c.adapt_rules, c.hold_s)},
          {"physio", physio}};
}

// Missing sections keep their defaults.
inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  try {
    if (j.contains("regulation")) c.perf_threshold = j.at("regulation").value("perf_threshold", c.perf_threshold);
    if (j.contains("taskload")) c.rules = taskload::rule_table_from_json(j.at("taskload"));
    if (j.contains("fusion")) c.fusion = fusion::fusion_config_from_json(j.at("fusion"));
    if (j.contains("adapt")) {
      const auto& ja = j.at("adapt");
      c.hold_s = ja.value("hold_s", c.hold_s);
      if (ja.contains("rules")) c.adapt_rules = adapt::rules_from_json(ja);
    }
    if (j.contains("physio")) {
      const auto& jp = j.at("physio");
      c.physio.sdnn_span = jp.value("sdnn_span", c.physio.sdnn_span);
      c.physio.baseline_begin_s = jp.value("baseline_begin_s", c.physio.baseline_begin_s);
      if (jp.contains("baseline_end_s") && !jp.at("baseline_end_s").is_null()) {
        c.physio.baseline_end_s = jp.at("baseline_end_s").get<double>();
      }
      c.online_baseline_s = jp.value("online_baseline_s", c.online_baseline_s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("engine config: ") + e.what());
  }
  if (!(c.perf_threshold >= 0.0 && c.perf_threshold <= 1.0)) throw ConfigError("perf_threshold must be in [0, 1]");
  if (c.physio.sdnn_span < 2) throw ConfigError("sdnn_span must be at least 2");
  if (c.hold_s < 0.0) throw ConfigError("hold_s must be non-negative");
  return c;
}

// Explicit path first, then $OFT_CONFIG, else built-in defaults.
inline EngineConfig load_engine_config(const std::string& path = "") {
  std::string p = path;
  if (p.empty()) {
    if (const char* env = std::getenv("OFT_CONFIG"); env && *env) p = env;
  }
  if (p.empty()) return {};
  if (!std::filesystem::exists(p)) throw ConfigError("config file not found: " + p);
  return engine_config_from_json(io::read_json_file(p));
}

// Likelihood over {none, performance-oriented, cost-oriented} from weighted
// regulation events in the trailing window.
inline fusion::SoftEvidence behaviour_evidence(const std::deque<regulation::RegulationEvent>& recent,
                                               const fusion::BehaviourEncoding& enc) {
  double perf = 0.0, cost = 0.0;
  for (const auto& e : recent) {
    const auto it = enc.weights.find(regulation::to_string(e.kind));
    const double w = it == enc.weights.end() ? 0.0 : it->second;
    (regulation::is_cost_oriented(e.kind) ? cost : perf) += w;
  }
  return {"behaviour", {1.0, perf, cost}, false};
}

class MwlMonitor {
 public:
  explicit MwlMonitor(EngineConfig cfg = {}) : cfg_(std::move(cfg)), tracker_(cfg_.perf_threshold) {
    for (const char* name : {"constraint", "behaviour", "performance", "effort"}) {
      if (cfg_.fusion.network.find(name) < 0) throw ConfigError(std::string("fusion network lacks child ") + name);
    }
    cfg_.fusion.partition("performance");
    cfg_.fusion.partition("effort");
  }

  fusion::MwlState step(const regulation::TaskTick& tick, const taskload::ConstraintFrame& cf,
                        std::optional<double> pupil_z) {
    if (cf.t != tick.t) throw SequencingError("monitor: constraint frame and task tick are misaligned");
    last_event_ = tracker_.push(tick);
    if (last_event_) recent_.push_back(*last_event_);
    while (!recent_.empty() && tick.t - recent_.front().t >= cfg_.fusion.behaviour.window_s) recent_.pop_front();

    std::vector<fusion::SoftEvidence> ev;
    const auto td = taskload::task_difficulty(taskload::discretize(cf), cfg_.rules);
    ev.push_back(fusion::hard_evidence("constraint", static_cast<std::size_t>(td) - 1, 3));
    ev.push_back(behaviour_evidence(recent_, cfg_.fusion.behaviour));
    ev.push_back(fusion::fuzzify(1.0 - tick.perf, cfg_.fusion.partition("performance")));
    if (pupil_z && std::isfinite(*pupil_z)) {
      ev.push_back(fusion::fuzzify(*pupil_z, cfg_.fusion.partition("effort")));
    }

    fusion::MwlState s;
    s.t = tick.t;
    s.posterior = fusion::posterior(cfg_.fusion.network, ev);
    s.level = fusion::mwl_level(s.posterior);
    for (const auto& e : ev) {
      double z = 0.0;
      for (double v : e.likelihood) z += v;
      auto norm = e.likelihood;
      for (double& v : norm) v /= z;
      s.indicators[e.variable] = norm;
    }
    difficulty_ = td;
    return s;
  }

  const std::optional<regulation::RegulationEvent>& last_event() const { return last_event_; }
  const regulation::RegulationTracker& tracker() const { return tracker_; }
  taskload::Difficulty last_difficulty() const { return difficulty_; }
  const EngineConfig& config() const { return cfg_; }

 private:
  EngineConfig cfg_;
  regulation::RegulationTracker tracker_;
  std::deque<regulation::RegulationEvent> recent_;
  std::optional<regulation::RegulationEvent> last_event_;
  taskload::Difficulty difficulty_ = taskload::Difficulty::kTD1;
};

}  // namespace oft::monitor
