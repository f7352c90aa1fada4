#pragma once

// Task-load features: discretized constraint variables, the three-level task
// difficulty indicator and the overall performance index.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"

namespace oft::taskload {

enum class Level { kLow = 0, kMedium = 1, kHigh = 2 };

inline const char* to_string(Level l) {
  switch (l) {
    case Level::kLow: return "low";
    case Level::kMedium: return "medium";
    case Level::kHigh: return "high";
  }
  return "?";
}

inline Level level_from_string(const std::string& s) {
  if (s == "low") return Level::kLow;
  if (s == "medium") return Level::kMedium;
  if (s == "high") return Level::kHigh;
  throw ConfigError("unknown level: " + s);
}

inline int rank(Level l) { return static_cast<int>(l); }

struct ConstraintFrame {
  int t = 0;
  int n1 = 0;            // targets pending
  int n2 = 0;            // messages pending
  double entropy = 0.0;  // spatial entropy of targets
};

// N2d only takes kLow or kHigh.
struct DiscretizedConstraints {
  Level n1 = Level::kLow;
  Level n2 = Level::kLow;
  Level entropy = Level::kLow;

  friend bool operator==(const DiscretizedConstraints&, const DiscretizedConstraints&) = default;
};

inline DiscretizedConstraints discretize(const ConstraintFrame& f) {
  DiscretizedConstraints d;
  d.n1 = f.n1 <= 5 ? Level::kLow : (f.n1 <= 11 ? Level::kMedium : Level::kHigh);
  d.n2 = f.n2 <= 2 ? Level::kLow : Level::kHigh;
  d.entropy = f.entropy <= 0.45 ? Level::kLow : (f.entropy <= 1.0 ? Level::kMedium : Level::kHigh);
  return d;
}

enum class Difficulty { kTD1 = 1, kTD2 = 2, kTD3 = 3 };

inline const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kTD1: return "low";
    case Difficulty::kTD2: return "medium";
    case Difficulty::kTD3: return "high";
  }
  return "?";
}

inline Difficulty difficulty_from_string(const std::string& s) {
  if (s == "low" || s == "TD1") return Difficulty::kTD1;
  if (s == "medium" || s == "TD2") return Difficulty::kTD2;
  if (s == "high" || s == "TD3") return Difficulty::kTD3;
  throw ConfigError("unknown task difficulty: " + s);
}

// Inclusive ordinal range; the default matches any level.
struct LevelRange {
  Level min = Level::kLow;
  Level max = Level::kHigh;

  bool contains(Level l) const { return rank(l) >= rank(min) && rank(l) <= rank(max); }
};

struct DifficultyRule {
  LevelRange n1, n2, entropy;
  Difficulty level = Difficulty::kTD2;

  bool matches(const DiscretizedConstraints& d) const {
    return n1.contains(d.n1) && n2.contains(d.n2) && entropy.contains(d.entropy);
  }
};

// Every reachable discretized combination: 3 x 2 x 3.
inline std::vector<DiscretizedConstraints> all_discretized() {
  std::vector<DiscretizedConstraints> out;
  for (auto a : {Level::kLow, Level::kMedium, Level::kHigh})
    for (auto b : {Level::kLow, Level::kHigh})
      for (auto c : {Level::kLow, Level::kMedium, Level::kHigh}) out.push_back({a, b, c});
  return out;
}

class RuleTable {
 public:
  // Throws ConfigError unless every combination matches some rule.
  explicit RuleTable(std::vector<DifficultyRule> rules) : rules_(std::move(rules)) {
    for (const auto& d : all_discretized()) {
      if (!first_match(d)) {
        throw ConfigError(std::string("task difficulty rule table is not total: no rule for (") +
                          to_string(d.n1) + ", " + to_string(d.n2) + ", " + to_string(d.entropy) + ")");
      }
    }
  }

  static RuleTable defaults() {
    DifficultyRule high;
    high.n1 = {Level::kHigh, Level::kHigh};
    high.n2 = {Level::kMedium, Level::kHigh};
    high.entropy = {Level::kMedium, Level::kHigh};
    high.level = Difficulty::kTD3;
    DifficultyRule low;
    low.n1 = low.n2 = low.entropy = {Level::kLow, Level::kLow};
    low.level = Difficulty::kTD1;
    DifficultyRule rest;
    rest.level = Difficulty::kTD2;
    return RuleTable({high, low, rest});
  }

  std::optional<Difficulty> first_match(const DiscretizedConstraints& d) const {
    for (const auto& r : rules_)
      if (r.matches(d)) return r.level;
    return std::nullopt;
  }

  const std::vector<DifficultyRule>& rules() const { return rules_; }

 private:
  std::vector<DifficultyRule> rules_;
};

inline Difficulty task_difficulty(const DiscretizedConstraints& d, const RuleTable& rules) {
  return *rules.first_match(d);
}

struct Area {
  double x_min = 0.0, x_max = 100.0;
  double y_min = 0.0, y_max = 100.0;
};

struct Grid {
  int rows = 8;
  int cols = 8;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct EntropyResult {
  double value = 0.0;
  std::size_t clamped = 0;  // positions outside the area, clamped into border cells
};

// Shannon entropy of cell occupancy proportions. `log_base` 0 selects the
// natural logarithm.
inline EntropyResult spatial_entropy(std::span<const Position> positions, const Area& area,
                                     const Grid& grid = {}, double log_base = 0.0) {
  if (grid.rows < 1 || grid.cols < 1) throw ArgumentError("spatial_entropy: grid needs at least one cell");
  EntropyResult r;
  if (positions.empty()) return r;
  std::vector<int> counts(static_cast<std::size_t>(grid.rows * grid.cols), 0);
  const double w = (area.x_max - area.x_min) / grid.cols;
  const double h = (area.y_max - area.y_min) / grid.rows;
  for (const auto& p : positions) {
    int c = static_cast<int>(std::floor((p.x - area.x_min) / w));
    int rr = static_cast<int>(std::floor((p.y - area.y_min) / h));
    const bool outside = p.x < area.x_min || p.x > area.x_max || p.y < area.y_min || p.y > area.y_max;
    if (outside) ++r.clamped;
    c = std::clamp(c, 0, grid.cols - 1);
    rr = std::clamp(rr, 0, grid.rows - 1);
    ++counts[static_cast<std::size_t>(rr * grid.cols + c)];
  }
  const double n = static_cast<double>(positions.size());
  double hsum = 0.0;
  for (int k : counts) {
    if (k == 0) continue;
    const double p = k / n;
    hsum -= p * std::log(p);
  }
  r.value = log_base > 0.0 ? hsum / std::log(log_base) : hsum;
  if (r.value < 0.0) r.value = 0.0;  // -0.0
  return r;
}

struct Neutralization {
  double detect_t = 0.0;
  double neutralize_t = 0.0;
};

struct MessageOutcome {
  double appear_t = 0.0;
  std::optional<double> zone_t;
};

struct PerformanceWeights {
  double w1 = 0.5;  // neutralization time
  double w2 = 0.5;  // message timeliness
  double t_ref_s = 180.0;
  double message_budget_s = 120.0;
};

struct PerformanceIndex {
  double p1 = 1.0;
  double p2 = 1.0;
  double overall = 1.0;
};

inline PerformanceIndex performance_index(std::span<const Neutralization> neutralizations,
                                          std::span<const MessageOutcome> messages,
                                          const PerformanceWeights& w = {}) {
  if (std::abs(w.w1 + w.w2 - 1.0) > 1e-9 || w.w1 < 0.0 || w.w2 < 0.0) {
    throw ArgumentError("performance_index: weights must be non-negative and sum to 1");
  }
  if (!(w.t_ref_s > 0.0)) throw ArgumentError("performance_index: t_ref must be positive");
  PerformanceIndex pi;
  if (!neutralizations.empty()) {
    double sum = 0.0;
    for (const auto& n : neutralizations) {
      if (n.neutralize_t < n.detect_t) throw ArgumentError("performance_index: neutralization precedes detection");
      sum += std::max(0.0, 1.0 - (n.neutralize_t - n.detect_t) / w.t_ref_s);
    }
    pi.p1 = sum / static_cast<double>(neutralizations.size());
  }
  if (!messages.empty()) {
    std::size_t ok = 0;
    for (const auto& m : messages)
      if (m.zone_t && *m.zone_t - m.appear_t <= w.message_budget_s) ++ok;
    pi.p2 = static_cast<double>(ok) / static_cast<double>(messages.size());
  }
  pi.overall = w.w1 * pi.p1 + w.w2 * pi.p2;
  return pi;
}

// ---- JSON ------------------------------------------------------------------

inline LevelRange level_range_from_json(const nlohmann::json& j) {
  LevelRange r;
  if (j.is_string()) {
    if (j.get<std::string>() == "any") return r;
    r.min = r.max = level_from_string(j.get<std::string>());
    return r;
  }
  if (j.contains("min")) r.min = level_from_string(j.at("min").get<std::string>());
  if (j.contains("max")) r.max = level_from_string(j.at("max").get<std::string>());
  if (rank(r.min) > rank(r.max)) throw ConfigError("level range with min above max");
  return r;
}

inline nlohmann::json to_json(const LevelRange& r) {
  return {{"min", to_string(r.min)}, {"max", to_string(r.max)}};
}

inline RuleTable rule_table_from_json(const nlohmann::json& j) {
  std::vector<DifficultyRule> rules;
  try {
    for (const auto& jr : j.at("rules")) {
      DifficultyRule r;
      if (jr.contains("n1")) r.n1 = level_range_from_json(jr.at("n1"));
      if (jr.contains("n2")) r.n2 = level_range_from_json(jr.at("n2"));
      if (jr.contains("entropy")) r.entropy = level_range_from_json(jr.at("entropy"));
      r.level = difficulty_from_string(jr.at("level").get<std::string>());
      rules.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task difficulty rules: ") + e.what());
  }
  return RuleTable(std::move(rules));
}

inline nlohmann::json to_json(const RuleTable& t) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : t.rules()) {
    rules.push_back({{"n1", to_json(r.n1)},
                     {"n2", to_json(r.n2)},
                     {"entropy", to_json(r.entropy)},
                     {"level", to_string(r.level)}});
  }
  return {{"rules", rules}};
}

}  // namespace oft::taskload
