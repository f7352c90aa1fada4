#pragma once

// Task activation / achievement bookkeeping and regulation-loop detection.
//
// NPS(t) counts active tasks; CPS(t) counts active tasks whose prescribed
// strategy is currently achieved. A non-zero dCPS marks a regulation, which
// is classified from the sign of dCPS, the performance threshold and the
// previous tick's deltas.

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oft/error.hpp"

namespace oft::regulation {

struct TaskSpec {
  std::string id;
  std::string strategy;
  double budget_s = 0.0;
};

inline void validate_tasks(std::span<const TaskSpec> tasks) {
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.id).second) throw ConfigError("duplicate task id: " + t.id);
    if (!(t.budget_s > 0.0)) throw ConfigError("task " + t.id + ": time budget must be positive");
  }
}

// Per-task state at one tick. `achieved` is present iff `active`.
struct TaskState {
  bool active = false;
  std::optional<bool> achieved;

  static TaskState idle() { return {}; }
  static TaskState on(bool ok) { return {true, ok}; }
};

struct TaskTick {
  int t = 0;
  std::vector<TaskState> tasks;
  double perf = 1.0;

  void validate() const {
    for (const auto& s : tasks) {
      if (s.active != s.achieved.has_value()) {
        throw DataError("tick " + std::to_string(t) + ": achievement status must be set iff the task is active");
      }
    }
  }
};

struct ActivitySnapshot {
  int t = 0;
  int nps = 0;
  int cps = 0;
  int d_cps = 0;
  int d_nps = 0;
  double perf = 1.0;

  friend bool operator==(const ActivitySnapshot&, const ActivitySnapshot&) = default;
};

enum class RegulationKind { kPBR, kCBR, kCOBR, kPRBR, kPerformanceOrientedOther };

inline const char* to_string(RegulationKind k) {
  switch (k) {
    case RegulationKind::kPBR: return "PBR";
    case RegulationKind::kCBR: return "CBR";
    case RegulationKind::kCOBR: return "COBR";
    case RegulationKind::kPRBR: return "PRBR";
    case RegulationKind::kPerformanceOrientedOther: return "PerformanceOrientedOther";
  }
  return "?";
}

inline RegulationKind regulation_kind_from_string(const std::string& s) {
  for (auto k : {RegulationKind::kPBR, RegulationKind::kCBR, RegulationKind::kCOBR,
                 RegulationKind::kPRBR, RegulationKind::kPerformanceOrientedOther}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown regulation kind: " + s);
}

inline bool is_cost_oriented(RegulationKind k) {
  return k == RegulationKind::kCOBR || k == RegulationKind::kPRBR;
}

struct RegulationEvent {
  int t = 0;
  RegulationKind kind = RegulationKind::kPBR;

  friend bool operator==(const RegulationEvent&, const RegulationEvent&) = default;
};

inline constexpr double kDefaultPerfThreshold = 0.5;

inline ActivitySnapshot snapshot(const TaskTick& tick, const std::optional<ActivitySnapshot>& prev,
                                 double perf) {
  tick.validate();
  if (prev && tick.t != prev->t + 1) {
    throw SequencingError("tick " + std::to_string(tick.t) + " does not follow tick " +
                          std::to_string(prev->t));
  }
  ActivitySnapshot s;
  s.t = tick.t;
  s.perf = perf;
  for (const auto& task : tick.tasks) {
    if (!task.active) continue;
    ++s.nps;
    if (*task.achieved) ++s.cps;
  }
  if (prev) {
    s.d_cps = s.cps - prev->cps;
    s.d_nps = s.nps - prev->nps;
  }
  return s;
}

inline std::optional<RegulationEvent> classify_regulation(const ActivitySnapshot& curr,
                                                          const std::optional<ActivitySnapshot>& prev,
                                                          double perf_threshold = kDefaultPerfThreshold) {
  if (!prev || curr.t != prev->t + 1) {
    throw SequencingError("classify_regulation: previous snapshot must be at t-1");
  }
  if (curr.d_cps == 0) return std::nullopt;
  RegulationKind kind;
  if (curr.d_cps > 0) {
    if (curr.perf < perf_threshold) {
      kind = RegulationKind::kPBR;
    } else if (prev->d_cps < 0) {
      kind = RegulationKind::kCBR;
    } else {
      kind = RegulationKind::kPerformanceOrientedOther;
    }
  } else {
    kind = prev->d_nps > 0 ? RegulationKind::kCOBR : RegulationKind::kPRBR;
  }
  return RegulationEvent{curr.t, kind};
}

// Sum(CPS) / Sum(NPS) over ticks with NPS > 0; 1.0 when no task was ever active.
inline double compliance_rate(std::span<const ActivitySnapshot> trace) {
  long nps = 0, cps = 0;
  for (const auto& s : trace) {
    if (s.nps <= 0) continue;
    nps += s.nps;
    cps += s.cps;
  }
  return nps == 0 ? 1.0 : static_cast<double>(cps) / static_cast<double>(nps);
}

// Achievement status of one task: drops to false when an object's time budget
// elapses unprocessed, returns to true when an object is processed in time.
class AchievementTracker {
 public:
  bool achieved() const { return achieved_; }
  void on_budget_expired() { achieved_ = false; }
  void on_processed(bool in_time) {
    if (in_time) achieved_ = true;
  }

 private:
  bool achieved_ = true;
};

// One tracker per operator stream: turns ticks into snapshots and events.
class RegulationTracker {
 public:
  explicit RegulationTracker(double perf_threshold = kDefaultPerfThreshold)
      : threshold_(perf_threshold) {}

  std::optional<RegulationEvent> push(const TaskTick& tick) {
    const auto s = snapshot(tick, prev_, tick.perf);
    std::optional<RegulationEvent> ev;
    if (prev_) ev = classify_regulation(s, prev_, threshold_);
    prev_ = s;
    trace_.push_back(s);
    if (ev) events_.push_back(*ev);
    return ev;
  }

  const std::vector<ActivitySnapshot>& trace() const { return trace_; }
  const std::vector<RegulationEvent>& events() const { return events_; }
  const std::optional<ActivitySnapshot>& last() const { return prev_; }

 private:
  double threshold_;
  std::optional<ActivitySnapshot> prev_;
  std::vector<ActivitySnapshot> trace_;
  std::vector<RegulationEvent> events_;
};

}  // namespace oft::regulation
