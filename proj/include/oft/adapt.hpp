#pragma once

// Level-triggered assistance: which aids are switched on for a given MWL
// level, and a small engine that turns a level stream into on/off commands.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"

namespace oft::adapt {

enum class Stage { kGathering, kAnalysis, kDecision, kAction };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::kGathering: return "gathering";
    case Stage::kAnalysis: return "analysis";
    case Stage::kDecision: return "decision";
    case Stage::kAction: return "action";
  }
  return "?";
}

inline Stage stage_from_string(const std::string& s) {
  for (auto x : {Stage::kGathering, Stage::kAnalysis, Stage::kDecision, Stage::kAction})
    if (s == to_string(x)) return x;
  throw ConfigError("unknown processing stage: " + s);
}

enum class Directive {
  kHighlightMessages,
  kHighlightEmptyZones,
  kAnnotateMessageCoords,
  kAutoJudgeZoneUseful,
  kAutoTransferDrones,
  kAutoInspect,
};

inline constexpr Directive kAllDirectives[] = {Directive::kHighlightMessages,   Directive::kHighlightEmptyZones,
                                               Directive::kAnnotateMessageCoords, Directive::kAutoJudgeZoneUseful,
                                               Directive::kAutoTransferDrones,  Directive::kAutoInspect};

inline const char* to_string(Directive d) {
  switch (d) {
    case Directive::kHighlightMessages: return "highlight_messages";
    case Directive::kHighlightEmptyZones: return "highlight_empty_zones";
    case Directive::kAnnotateMessageCoords: return "annotate_message_coords";
    case Directive::kAutoJudgeZoneUseful: return "auto_judge_zone_useful";
    case Directive::kAutoTransferDrones: return "auto_transfer_drones";
    case Directive::kAutoInspect: return "auto_inspect";
  }
  return "?";
}

inline Directive directive_from_string(const std::string& s) {
  for (auto d : kAllDirectives)
    if (s == to_string(d)) return d;
  throw ConfigError("unknown directive: " + s);
}

struct AssistanceRule {
  int trigger_level = 4;
  std::string task;
  Stage stage = Stage::kGathering;
  Directive directive = Directive::kHighlightMessages;
};

inline std::vector<AssistanceRule> default_rules() {
  return {
      {4, "ReadMessage", Stage::kGathering, Directive::kHighlightMessages},
      {4, "ManageEmptyZone", Stage::kGathering, Directive::kHighlightEmptyZones},
      {5, "DetectVehicle", Stage::kAnalysis, Directive::kAnnotateMessageCoords},
      {5, "ManageEmptyZone", Stage::kDecision, Directive::kAutoJudgeZoneUseful},
      {5, "ManageEmptyZone", Stage::kAction, Directive::kAutoTransferDrones},
      {5, "InspectLock", Stage::kAction, Directive::kAutoInspect},
  };
}

inline void validate_rules(const std::vector<AssistanceRule>& rules) {
  std::set<Directive> seen;
  for (const auto& r : rules) {
    if (r.trigger_level < 1 || r.trigger_level > 5) throw ConfigError("assistance rule trigger level must be in 1..5");
    if (r.task.empty()) throw ConfigError("assistance rule without task");
    if (!seen.insert(r.directive).second) throw ConfigError(std::string("duplicate rule for ") + to_string(r.directive));
  }
}

// Rules whose trigger is at or below `level`; aids of lower levels stay on.
inline std::vector<AssistanceRule> assistance_for_level(int level, const std::vector<AssistanceRule>& rules = default_rules()) {
  if (level < 1 || level > 5) throw ArgumentError("MWL level must be in 1..5, got " + std::to_string(level));
  std::vector<AssistanceRule> out;
  for (const auto& r : rules)
    if (r.trigger_level <= level) out.push_back(r);
  return out;
}

inline std::set<Directive> directives_for_level(int level, const std::vector<AssistanceRule>& rules = default_rules()) {
  std::set<Directive> out;
  for (const auto& r : assistance_for_level(level, rules)) out.insert(r.directive);
  return out;
}

struct AssistanceCommand {
  double t = 0.0;
  std::string task;
  Stage stage = Stage::kGathering;
  Directive directive = Directive::kHighlightMessages;
  bool active = false;
  int level = 0;  // MWL level that produced the command

  friend bool operator==(const AssistanceCommand&, const AssistanceCommand&) = default;
};

inline nlohmann::json to_json(const AssistanceCommand& c) {
  return {{"t", c.t}, {"directive", to_string(c.directive)}, {"task", c.task}, {"active", c.active}};
}

// Applies the rules to a level stream. A directive switches on as soon as the
// level reaches its trigger and off once the level has stayed below the
// trigger for `hold_s` seconds. Emits diffs only.
class AdaptEngine {
 public:
  explicit AdaptEngine(std::vector<AssistanceRule> rules = default_rules(), double hold_s = 5.0)
      : rules_(std::move(rules)), hold_s_(hold_s) {
    validate_rules(rules_);
    if (hold_s_ < 0.0) throw ConfigError("hold window must be non-negative");
  }

  std::vector<AssistanceCommand> step(double t, int level) {
    if (level < 1 || level > 5) throw ArgumentError("MWL level must be in 1..5, got " + std::to_string(level));
    if (last_t_ && t < *last_t_) throw SequencingError("assistance engine: timestamps must be monotone");
    last_t_ = t;
    std::vector<AssistanceCommand> out;
    for (const auto& r : rules_) {
      auto& st = state_[r.directive];
      if (level >= r.trigger_level) {
        st.last_at_or_above = t;
        if (!st.active) {
          st.active = true;
          out.push_back({t, r.task, r.stage, r.directive, true, level});
        }
      } else if (st.active && st.last_at_or_above && t - *st.last_at_or_above >= hold_s_) {
        st.active = false;
        out.push_back({t, r.task, r.stage, r.directive, false, level});
      }
    }
    return out;
  }

  bool active(Directive d) const {
    const auto it = state_.find(d);
    return it != state_.end() && it->second.active;
  }

  std::set<Directive> active_set() const {
    std::set<Directive> s;
    for (const auto& [d, st] : state_)
      if (st.active) s.insert(d);
    return s;
  }

  const std::vector<AssistanceRule>& rules() const { return rules_; }
  double hold_s() const { return hold_s_; }

 private:
  struct DirectiveState {
    bool active = false;
    std::optional<double> last_at_or_above;
  };

  std::vector<AssistanceRule> rules_;
  double hold_s_;
  std::optional<double> last_t_;
  std::map<Directive, DirectiveState> state_;
};

// Replays a command stream into the resulting active set.
inline std::set<Directive> replay(const std::vector<AssistanceCommand>& commands) {
  std::set<Directive> s;
  for (const auto& c : commands) {
    if (c.active) {
      s.insert(c.directive);
    } else {
      s.erase(c.directive);
    }
  }
  return s;
}

inline std::vector<AssistanceRule> rules_from_json(const nlohmann::json& j) {
  std::vector<AssistanceRule> rules;
  try {
    for (const auto& jr : j.at("rules")) {
      rules.push_back({jr.at("level").get<int>(), jr.at("task").get<std::string>(),
                       stage_from_string(jr.at("stage").get<std::string>()),
                       directive_from_string(jr.at("directive").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("assistance rules: ") + e.what());
  }
  validate_rules(rules);
  return rules;
}

inline nlohmann::json to_json(const std::vector<AssistanceRule>& rules, double hold_s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) {
    arr.push_back({{"level", r.trigger_level}, {"task", r.task}, {"stage", to_string(r.stage)}, {"directive", to_string(r.directive)}});
  }
  return {{"hold_s", hold_s}, {"rules", arr}};
}

}  // namespace oft::adapt
