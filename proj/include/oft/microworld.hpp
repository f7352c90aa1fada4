#pragma once

// Seeded surveillance microworld used as the end-to-end harness: vehicles to
// find, inspect and neutralize, messages to read and turn into zones, zones
// whose drones get lost. A scripted operator with a latent load curve works
// through the pending objects; the latent load also drives synthetic RR and
// pupil streams and an ISA-like self report.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "oft/adapt.hpp"
#include "oft/error.hpp"
#include "oft/fusion.hpp"
#include "oft/monitor.hpp"
#include "oft/physio.hpp"
#include "oft/regulation.hpp"
#include "oft/taskload.hpp"

namespace oft::microworld {

enum class Task { kReadMessage, kDrawZone, kManageEmptyZone, kDetectVehicle, kInspectLock, kNeutralize };

inline constexpr int kTaskCount = 6;
inline constexpr std::array<Task, kTaskCount> kTasks = {Task::kReadMessage,   Task::kDrawZone,    Task::kManageEmptyZone,
                                                        Task::kDetectVehicle, Task::kInspectLock, Task::kNeutralize};

inline const char* to_string(Task t) {
  switch (t) {
    case Task::kReadMessage: return "ReadMessage";
    case Task::kDrawZone: return "DrawZone";
    case Task::kManageEmptyZone: return "ManageEmptyZone";
    case Task::kDetectVehicle: return "DetectVehicle";
    case Task::kInspectLock: return "InspectLock";
    case Task::kNeutralize: return "Neutralize";
  }
  return "?";
}

inline std::size_t idx(Task t) { return static_cast<std::size_t>(t); }

inline bool is_vehicle_task(Task t) {
  return t == Task::kDetectVehicle || t == Task::kInspectLock || t == Task::kNeutralize;
}

using TaskArray = std::array<double, kTaskCount>;

inline constexpr TaskArray kDefaultBudgets = {120.0, 60.0, 45.0, 90.0, 60.0, 60.0};

inline std::vector<regulation::TaskSpec> six_tasks(const TaskArray& budgets = kDefaultBudgets) {
  static const std::array<const char*, kTaskCount> strategies = {
      "read each message before its budget runs out",
      "draw a search zone for each read message",
      "keep drones in every zone",
      "detect vehicles once they surface",
      "inspect and lock detected vehicles",
      "neutralize locked vehicles",
  };
  std::vector<regulation::TaskSpec> out;
  for (auto t : kTasks) out.push_back({to_string(t), strategies[idx(t)], budgets[idx(t)]});
  regulation::validate_tasks(out);
  return out;
}

struct Phase {
  double start_s = 0.0;
  double end_s = 0.0;
  double vehicle_rate = 0.0;  // spawns per second
  double message_rate = 0.0;
};

struct PhysioModel {
  double rr_base_ms = 800.0;
  double rr_load_gain = 0.2;  // RR mean = base * (1 - gain * L)
  double rr_jitter_ms = 50.0;
  double rr_jitter_load_gain = 0.6;  // jitter sd = jitter * (1 - gain * L)
  double pupil_base_mm = 3.5;
  double pupil_load_gain_mm = 1.5;
  double pupil_drift_phi = 0.98;  // AR(1) per second
  double pupil_drift_sd = 0.02;
  double pupil_noise_sd = 0.2;
  double pupil_hz = 10.0;
  double blink_prob = 0.03;
  double artifact_prob = 0.005;
  double isa_noise_sd = 0.3;
};

struct ScenarioConfig {
  int duration_s = 1200;
  std::vector<Phase> phases{{0.0, 600.0, 1.0 / 60.0, 1.0 / 60.0}, {600.0, 1200.0, 1.0 / 20.0, 1.0 / 20.0}};
  taskload::Area area;
  std::uint64_t seed = 1;
  int target_neutralizations = 25;
  TaskArray budgets = kDefaultBudgets;
  double vehicle_speed = 0.3;
  double detectable_mean_s = 40.0;  // hidden vehicles surface on their own after this mean delay
  int zone_drones = 3;
  double drone_loss_rate = 1.0 / 120.0;  // per zone per second
  double zone_lifetime_s = 300.0;
  double machine_delay_s = 3.0;
  double perf_window_s = 120.0;
  double isa_period_s = 90.0;
  PhysioModel physio;

  void validate() const {
    if (duration_s < 1) throw ConfigError("scenario duration must be at least 1 s");
    for (const auto& p : phases) {
      if (!(p.end_s > p.start_s) || p.vehicle_rate < 0.0 || p.message_rate < 0.0) throw ConfigError("invalid scenario phase");
    }
    for (double b : budgets)
      if (!(b > 0.0)) throw ConfigError("task budgets must be positive");
    if (zone_drones < 1 || drone_loss_rate < 0.0 || drone_loss_rate > 1.0 || zone_lifetime_s <= 0.0) {
      throw ConfigError("invalid zone parameters");
    }
    if (perf_window_s <= 0.0 || isa_period_s <= 0.0 || physio.pupil_hz <= 0.0) throw ConfigError("invalid scenario timing");
  }

  const Phase* phase_at(double t) const {
    for (const auto& p : phases)
      if (t >= p.start_s && t < p.end_s) return &p;
    return nullptr;
  }
};

enum class Policy { kEdf, kPrioritizer, kDegrading };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::kEdf: return "edf";
    case Policy::kPrioritizer: return "prioritizer";
    case Policy::kDegrading: return "degrading";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  for (auto p : {Policy::kEdf, Policy::kPrioritizer, Policy::kDegrading})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown operator policy: " + s);
}

struct LoadKnot {
  double t = 0.0;
  double load = 0.0;
};

struct OperatorScript {
  std::string name;
  Policy policy = Policy::kEdf;
  std::vector<LoadKnot> latent;  // piecewise linear; a repeated t makes a step
  TaskArray service_s = {4.0, 8.0, 6.0, 6.0, 8.0, 5.0};
  double service_noise = 0.25;  // log-normal sigma
  double think_s = 1.0;
  double overload_threshold = 0.6;  // degrading policy narrows its attention above this load

  void validate() const {
    if (latent.empty()) throw ConfigError("operator script " + name + ": empty latent load curve");
    for (std::size_t i = 0; i < latent.size(); ++i) {
      if (latent[i].load < 0.0 || latent[i].load > 1.0) throw ConfigError("operator script " + name + ": latent load outside [0, 1]");
      if (i && latent[i].t < latent[i - 1].t) throw ConfigError("operator script " + name + ": knots must be time-ordered");
    }
    for (double s : service_s)
      if (!(s > 0.0)) throw ConfigError("operator script " + name + ": service times must be positive");
  }

  double latent_at(double t) const {
    if (t <= latent.front().t) return latent.front().load;
    for (std::size_t i = 0; i + 1 < latent.size(); ++i) {
      const auto& a = latent[i];
      const auto& b = latent[i + 1];
      if (t >= a.t && t < b.t) return a.load + (b.load - a.load) * (t - a.t) / (b.t - a.t);
    }
    return latent.back().load;
  }
};

inline OperatorScript builtin_script(const std::string& name) {
  OperatorScript s;
  s.name = name;
  if (name == "diligent") {
    s.policy = Policy::kEdf;
    s.latent = {{0.0, 0.2}, {1200.0, 0.2}};
  } else if (name == "prioritizer") {
    s.policy = Policy::kPrioritizer;
    s.latent = {{0.0, 0.3}, {1200.0, 0.3}};
  } else if (name == "degrading-overload") {
    s.policy = Policy::kDegrading;
    s.latent = {{0.0, 0.1}, {600.0, 0.35}, {600.0, 0.45}, {1200.0, 0.95}};
  } else {
    throw ConfigError("unknown operator script: " + name);
  }
  s.validate();
  return s;
}

inline const std::vector<std::string>& builtin_script_names() {
  static const std::vector<std::string> names{"diligent", "prioritizer", "degrading-overload"};
  return names;
}

enum class VehicleState { kHidden, kDetected, kInspected, kNeutralized };

inline const char* to_string(VehicleState s) {
  switch (s) {
    case VehicleState::kHidden: return "Hidden";
    case VehicleState::kDetected: return "Detected";
    case VehicleState::kInspected: return "Inspected";
    case VehicleState::kNeutralized: return "Neutralized";
  }
  return "?";
}

struct Vehicle {
  int id = 0;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  VehicleState state = VehicleState::kHidden;
  double spawn_t = 0.0;
  double detectable_t = 0.0;
  std::optional<double> detect_t, inspect_t, neutralize_t;
  bool claimed = false;
};

struct Message {
  int id = 0;
  double appear_t = 0.0;
  int vehicle_id = -1;
  double x = 0.0, y = 0.0;
  std::optional<double> read_t, zone_t;
  bool claimed = false;
};

struct Zone {
  int id = 0;
  int message_id = 0;
  double x = 0.0, y = 0.0;
  double created_t = 0.0;
  int drones = 0;
  std::optional<double> empty_since;
  bool claimed = false;
  bool removed = false;
};

struct IsaSample {
  int t = 0;
  int value = 1;
  double latent = 0.0;
};

struct TickRecord {
  regulation::TaskTick tick;
  regulation::ActivitySnapshot snapshot;
  taskload::ConstraintFrame constraints;
  double latent = 0.0;
  std::optional<regulation::RegulationEvent> event;
  std::optional<int> level;  // in-loop MWL level when the adaptive loop runs
};

struct Summary {
  double compliance_rate = 1.0;
  int vehicles_spawned = 0;
  int vehicles_detected = 0;
  int vehicles_neutralized = 0;
  int messages = 0;
  int messages_in_time = 0;
  int objective_neutralizations = 25;
  taskload::PerformanceIndex performance;
  std::array<int, 5> regulation_counts{};
  std::array<int, 5> time_at_level{};
};

struct RunLog {
  std::string operator_name;
  bool dfa = false;
  std::uint64_t seed = 0;
  int duration_s = 0;
  std::vector<TickRecord> ticks;
  physio::RRSeries beats;
  physio::PupilSeries pupil;
  std::vector<IsaSample> isa;
  std::vector<adapt::AssistanceCommand> commands;
  std::vector<fusion::MwlState> mwl;
  std::vector<nlohmann::json> events;  // typed records in generation order
  Summary summary;
};

namespace detail {

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct WorkItem {
  Task task = Task::kReadMessage;
  int id = 0;
  double since = 0.0;
  double deadline = 0.0;
};

struct Action {
  Task task = Task::kReadMessage;
  int id = 0;
  double start = 0.0;
  double end = 0.0;
  double deadline = 0.0;
  bool machine = false;
};

class World {
 public:
  World(const ScenarioConfig& cfg, const OperatorScript& op, bool dfa, const monitor::EngineConfig& engine)
      : cfg_(cfg),
        op_(op),
        dfa_(dfa),
        engine_cfg_(engine),
        spawn_rng_(stream_seed(cfg.seed, 0)),
        motion_rng_(stream_seed(cfg.seed, 1)),
        physio_rng_(stream_seed(cfg.seed, 2)),
        operator_rng_(stream_seed(cfg.seed, 3)),
        isa_rng_(stream_seed(cfg.seed, 4)),
        zone_rng_(stream_seed(cfg.seed, 5)),
        tracker_(engine.perf_threshold),
        pupil_norm_(engine.online_baseline_s) {
    cfg_.validate();
    op_.validate();
    if (dfa_) {
      monitor_.emplace(engine_cfg_);
      adapt_.emplace(engine_cfg_.adapt_rules, engine_cfg_.hold_s);
    }
    log_.operator_name = op_.name;
    log_.dfa = dfa_;
    log_.seed = cfg_.seed;
    log_.duration_s = cfg_.duration_s;
    log_.summary.objective_neutralizations = cfg_.target_neutralizations;
  }

  RunLog run() {
    for (int t = 0; t < cfg_.duration_s; ++t) step(t);
    finish();
    return std::move(log_);
  }

 private:
  double latent(double t) const { return std::clamp(op_.latent_at(t), 0.0, 1.0); }

  bool directive(adapt::Directive d) const { return active_.count(d) > 0; }

  void emit(nlohmann::json j) { log_.events.push_back(std::move(j)); }

  // ---- physio emulation ----
  std::optional<double> generate_physio(int t, double L) {
    const auto& pm = cfg_.physio;
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double rr_mean = pm.rr_base_ms * (1.0 - pm.rr_load_gain * L);
    const double rr_sd = pm.rr_jitter_ms * (1.0 - pm.rr_jitter_load_gain * L);
    while (next_beat_t_ < t + 1.0) {
      const double rr = std::max(300.0, rr_mean + rr_sd * n01(physio_rng_));
      next_beat_t_ += rr / 1000.0;
      log_.beats.intervals_ms.push_back(rr);
      log_.beats.timestamps_s.push_back(next_beat_t_);
    }
    drift_ = pm.pupil_drift_phi * drift_ + pm.pupil_drift_sd * n01(physio_rng_);
    const int n = static_cast<int>(std::lround(pm.pupil_hz));
    double sum = 0.0;
    int cnt = 0;
    for (int k = 0; k < n; ++k) {
      physio::PupilSample s;
      s.t_s = t + static_cast<double>(k) / pm.pupil_hz;
      s.diameter_mm = pm.pupil_base_mm + pm.pupil_load_gain_mm * L + drift_ + pm.pupil_noise_sd * n01(physio_rng_);
      s.valid = true;
      const double r = u01(physio_rng_);
      if (r < pm.blink_prob) {
        s.valid = false;
        s.diameter_mm = 0.0;
      } else if (r < pm.blink_prob + pm.artifact_prob) {
        s.diameter_mm = 1.0;  // tracker artifact, removed by cleansing
      }
      if (s.valid && s.diameter_mm >= physio::kPupilMinMm && s.diameter_mm <= physio::kPupilMaxMm) {
        sum += s.diameter_mm;
        ++cnt;
      }
      log_.pupil.push_back(s);
    }
    if (cnt == 0) return std::nullopt;
    return sum / cnt;
  }

  // ---- world dynamics ----
  void spawn(int t) {
    const Phase* ph = cfg_.phase_at(t);
    if (!ph) return;
    std::uniform_real_distribution<double> ux(cfg_.area.x_min, cfg_.area.x_max), uy(cfg_.area.y_min, cfg_.area.y_max);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::exponential_distribution<double> surf(1.0 / cfg_.detectable_mean_s);
    const int nv = std::poisson_distribution<int>(ph->vehicle_rate)(spawn_rng_);
    for (int i = 0; i < nv; ++i) {
      Vehicle v;
      v.id = static_cast<int>(vehicles_.size());
      v.x = ux(spawn_rng_);
      v.y = uy(spawn_rng_);
      const double a = angle(spawn_rng_);
      v.vx = cfg_.vehicle_speed * std::cos(a);
      v.vy = cfg_.vehicle_speed * std::sin(a);
      v.spawn_t = t;
      v.detectable_t = t + surf(spawn_rng_);
      vehicles_.push_back(v);
      ++log_.summary.vehicles_spawned;
      emit({{"type", "spawn"}, {"t", t}, {"kind", "vehicle"}, {"id", v.id}, {"x", v.x}, {"y", v.y}});
      emit({{"type", "vehicle_state"}, {"t", t}, {"id", v.id}, {"state", to_string(v.state)}});
    }
    const int nm = std::poisson_distribution<int>(ph->message_rate)(spawn_rng_);
    for (int i = 0; i < nm; ++i) {
      Message m;
      m.id = static_cast<int>(messages_.size());
      m.appear_t = t;
      std::vector<int> candidates;
      for (const auto& v : vehicles_)
        if (v.state == VehicleState::kHidden && !referenced_.count(v.id)) candidates.push_back(v.id);
      if (!candidates.empty()) {
        m.vehicle_id = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(spawn_rng_)];
        referenced_.insert(m.vehicle_id);
        m.x = vehicles_[static_cast<std::size_t>(m.vehicle_id)].x;
        m.y = vehicles_[static_cast<std::size_t>(m.vehicle_id)].y;
      } else {
        m.x = ux(spawn_rng_);
        m.y = uy(spawn_rng_);
      }
      messages_.push_back(m);
      ++log_.summary.messages;
      emit({{"type", "spawn"}, {"t", t}, {"kind", "message"}, {"id", m.id}, {"x", m.x}, {"y", m.y}, {"vehicle", m.vehicle_id}});
    }
  }

  void move_vehicles() {
    std::normal_distribution<double> turn(0.0, 0.2);
    for (auto& v : vehicles_) {
      if (v.state == VehicleState::kNeutralized) continue;
      const double a = std::atan2(v.vy, v.vx) + turn(motion_rng_);
      v.vx = cfg_.vehicle_speed * std::cos(a);
      v.vy = cfg_.vehicle_speed * std::sin(a);
      v.x += v.vx;
      v.y += v.vy;
      if (v.x < cfg_.area.x_min || v.x > cfg_.area.x_max) {
        v.vx = -v.vx;
        v.x = std::clamp(v.x, cfg_.area.x_min, cfg_.area.x_max);
      }
      if (v.y < cfg_.area.y_min || v.y > cfg_.area.y_max) {
        v.vy = -v.vy;
        v.y = std::clamp(v.y, cfg_.area.y_min, cfg_.area.y_max);
      }
    }
  }

  void update_zones(int t) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& z : zones_) {
      if (z.removed) continue;
      if (!z.claimed && t - z.created_t >= cfg_.zone_lifetime_s) {
        z.removed = true;
        continue;
      }
      if (z.drones > 0 && u01(zone_rng_) < cfg_.drone_loss_rate) {
        --z.drones;
        if (z.drones == 0) z.empty_since = t;
      }
    }
  }

  void set_state(Vehicle& v, VehicleState s, int t) {
    v.state = s;
    emit({{"type", "vehicle_state"}, {"t", t}, {"id", v.id}, {"state", to_string(s)}});
  }

  // ---- pending work ----
  std::vector<WorkItem> pending(int t) const {
    std::vector<WorkItem> out;
    const auto& b = cfg_.budgets;
    for (const auto& m : messages_) {
      if (!m.read_t) {
        out.push_back({Task::kReadMessage, m.id, m.appear_t, m.appear_t + b[idx(Task::kReadMessage)]});
      } else if (!m.zone_t) {
        out.push_back({Task::kDrawZone, m.id, *m.read_t, *m.read_t + b[idx(Task::kDrawZone)]});
      }
    }
    for (const auto& z : zones_) {
      if (!z.removed && z.empty_since) {
        out.push_back({Task::kManageEmptyZone, z.id, *z.empty_since, *z.empty_since + b[idx(Task::kManageEmptyZone)]});
      }
    }
    for (const auto& v : vehicles_) {
      switch (v.state) {
        case VehicleState::kHidden:
          if (v.detectable_t <= t) out.push_back({Task::kDetectVehicle, v.id, v.detectable_t, v.detectable_t + b[idx(Task::kDetectVehicle)]});
          break;
        case VehicleState::kDetected:
          out.push_back({Task::kInspectLock, v.id, *v.detect_t, *v.detect_t + b[idx(Task::kInspectLock)]});
          break;
        case VehicleState::kInspected:
          out.push_back({Task::kNeutralize, v.id, *v.inspect_t, *v.inspect_t + b[idx(Task::kNeutralize)]});
          break;
        case VehicleState::kNeutralized: break;
      }
    }
    return out;
  }

  bool& claimed(const WorkItem& w) {
    switch (w.task) {
      case Task::kReadMessage:
      case Task::kDrawZone: return messages_[static_cast<std::size_t>(w.id)].claimed;
      case Task::kManageEmptyZone: return zones_[static_cast<std::size_t>(w.id)].claimed;
      default: return vehicles_[static_cast<std::size_t>(w.id)].claimed;
    }
  }

  void complete(const Action& a, int t) {
    const bool in_time = a.end <= a.deadline + 1e-9;
    switch (a.task) {
      case Task::kReadMessage: {
        auto& m = messages_[static_cast<std::size_t>(a.id)];
        m.read_t = t;
        m.claimed = false;
        break;
      }
      case Task::kDrawZone: {
        auto& m = messages_[static_cast<std::size_t>(a.id)];
        m.zone_t = t;
        m.claimed = false;
        if (*m.zone_t - m.appear_t <= cfg_.budgets[idx(Task::kReadMessage)]) ++log_.summary.messages_in_time;
        Zone z;
        z.id = static_cast<int>(zones_.size());
        z.message_id = m.id;
        z.x = m.x;
        z.y = m.y;
        z.created_t = t;
        z.drones = cfg_.zone_drones;
        zones_.push_back(z);
        if (m.vehicle_id >= 0) {
          auto& v = vehicles_[static_cast<std::size_t>(m.vehicle_id)];
          if (v.state == VehicleState::kHidden && v.detectable_t > t) v.detectable_t = t;
        }
        break;
      }
      case Task::kManageEmptyZone: {
        auto& z = zones_[static_cast<std::size_t>(a.id)];
        z.drones = cfg_.zone_drones;
        z.empty_since.reset();
        z.claimed = false;
        break;
      }
      case Task::kDetectVehicle: {
        auto& v = vehicles_[static_cast<std::size_t>(a.id)];
        v.detect_t = t;
        v.claimed = false;
        ++log_.summary.vehicles_detected;
        set_state(v, VehicleState::kDetected, t);
        break;
      }
      case Task::kInspectLock: {
        auto& v = vehicles_[static_cast<std::size_t>(a.id)];
        v.inspect_t = t;
        v.claimed = false;
        set_state(v, VehicleState::kInspected, t);
        break;
      }
      case Task::kNeutralize: {
        auto& v = vehicles_[static_cast<std::size_t>(a.id)];
        v.neutralize_t = t;
        v.claimed = false;
        ++log_.summary.vehicles_neutralized;
        set_state(v, VehicleState::kNeutralized, t);
        break;
      }
    }
    achievement_[idx(a.task)].on_processed(in_time);
    emit({{"type", "action"},
          {"t_start", a.start},
          {"t_end", t},
          {"task", to_string(a.task)},
          {"object", a.id},
          {"by", a.machine ? "automation" : "operator"},
          {"in_time", in_time}});
  }

  void complete_due(int t) {
    if (op_action_ && op_action_->end <= t) {
      complete(*op_action_, t);
      op_action_.reset();
    }
    std::vector<Action> keep;
    for (const auto& a : machine_actions_) {
      if (a.end <= t) {
        complete(a, t);
      } else {
        keep.push_back(a);
      }
    }
    machine_actions_ = std::move(keep);
  }

  void check_expiry(int t) {
    for (const auto& w : pending(t)) {
      if (w.deadline < t && expired_.insert({idx(w.task), w.id, w.since}).second) achievement_[idx(w.task)].on_budget_expired();
    }
  }

  void automate(int t) {
    const bool inspect = directive(adapt::Directive::kAutoInspect);
    const bool zones = directive(adapt::Directive::kAutoTransferDrones) && directive(adapt::Directive::kAutoJudgeZoneUseful);
    if (!inspect && !zones) return;
    for (const auto& w : pending(t)) {
      const bool mine = (inspect && w.task == Task::kInspectLock) || (zones && w.task == Task::kManageEmptyZone);
      if (!mine || claimed(w)) continue;
      claimed(w) = true;
      machine_actions_.push_back({w.task, w.id, static_cast<double>(t), t + cfg_.machine_delay_s, w.deadline, true});
    }
  }

  bool attends(const WorkItem& w, int t, double L) const {
    if (op_.policy != Policy::kDegrading || L < op_.overload_threshold || is_vehicle_task(w.task)) return true;
    // Overloaded: messages and zones are dropped from attention unless highlighted.
    if (w.task == Task::kManageEmptyZone) return directive(adapt::Directive::kHighlightEmptyZones);
    const auto& m = messages_[static_cast<std::size_t>(w.id)];
    return directive(adapt::Directive::kHighlightMessages) && t - m.appear_t < cfg_.budgets[idx(Task::kReadMessage)];
  }

  int priority_group(const WorkItem& w, double L) const {
    const bool vehicle_first = op_.policy == Policy::kPrioritizer || (op_.policy == Policy::kDegrading && L >= op_.overload_threshold);
    if (!vehicle_first) return 0;
    return is_vehicle_task(w.task) ? 0 : 1;
  }

  double service_time(Task task, double L) {
    std::normal_distribution<double> n01(0.0, 1.0);
    double s = op_.service_s[idx(task)] * (1.0 + L) * std::exp(op_.service_noise * n01(operator_rng_));
    if ((task == Task::kDrawZone || task == Task::kDetectVehicle) && directive(adapt::Directive::kAnnotateMessageCoords)) s *= 0.5;
    if (task == Task::kManageEmptyZone && directive(adapt::Directive::kAutoJudgeZoneUseful)) s *= 0.5;
    return std::max(1.0, s);
  }

  void operate(int t, double L) {
    if (op_action_ || t < op_free_at_) return;
    std::vector<WorkItem> cand;
    for (const auto& w : pending(t)) {
      if (claimed(w) || !attends(w, t, L)) continue;
      cand.push_back(w);
    }
    if (cand.empty()) return;
    const auto best = *std::min_element(cand.begin(), cand.end(), [&](const WorkItem& a, const WorkItem& b) {
      const int ga = priority_group(a, L), gb = priority_group(b, L);
      if (ga != gb) return ga < gb;
      if (a.deadline != b.deadline) return a.deadline < b.deadline;
      if (a.task != b.task) return idx(a.task) < idx(b.task);
      return a.id < b.id;
    });
    claimed(best) = true;
    const double dur = service_time(best.task, L);
    op_action_ = Action{best.task, best.id, static_cast<double>(t), t + dur, best.deadline, false};
    op_free_at_ = t + dur + op_.think_s * (1.0 + L);
  }

  double window_perf(int t) const {
    const double lo = t - cfg_.perf_window_s;
    std::vector<taskload::Neutralization> neut;
    for (const auto& v : vehicles_)
      if (v.neutralize_t && *v.neutralize_t > lo && *v.neutralize_t <= t) neut.push_back({*v.detect_t, *v.neutralize_t});
    std::vector<taskload::MessageOutcome> msgs;
    const double budget = cfg_.budgets[idx(Task::kReadMessage)];
    for (const auto& m : messages_) {
      const double expiry = m.appear_t + budget;
      const bool ok = m.zone_t && *m.zone_t <= expiry;
      const double resolved = ok ? *m.zone_t : expiry;
      if (resolved > lo && resolved <= t) msgs.push_back({m.appear_t, ok ? m.zone_t : std::nullopt});
    }
    taskload::PerformanceWeights w;
    w.message_budget_s = budget;
    return taskload::performance_index(neut, msgs, w).overall;
  }

  taskload::ConstraintFrame constraints(int t) const {
    taskload::ConstraintFrame f;
    f.t = t;
    std::vector<taskload::Position> pos;
    for (const auto& v : vehicles_) {
      const bool known = v.state == VehicleState::kDetected || v.state == VehicleState::kInspected ||
                         (v.state == VehicleState::kHidden && v.detectable_t <= t);
      if (!known) continue;
      ++f.n1;
      pos.push_back({v.x, v.y});
    }
    for (const auto& m : messages_)
      if (!m.zone_t) ++f.n2;
    f.entropy = taskload::spatial_entropy(pos, cfg_.area).value;
    return f;
  }

  void step(int t) {
    const double L = latent(t);
    const auto pupil_mean = generate_physio(t, L);
    spawn(t);
    move_vehicles();
    update_zones(t);
    complete_due(t);
    check_expiry(t);
    automate(t);
    operate(t, L);

    const auto work = pending(t);
    TickRecord rec;
    rec.tick.t = t;
    rec.tick.tasks.assign(kTaskCount, regulation::TaskState::idle());
    for (const auto& w : work) rec.tick.tasks[idx(w.task)].active = true;
    for (std::size_t i = 0; i < kTaskCount; ++i) {
      if (rec.tick.tasks[i].active) rec.tick.tasks[i].achieved = achievement_[i].achieved();
    }
    rec.tick.perf = window_perf(t);
    rec.constraints = constraints(t);
    rec.latent = L;
    rec.event = tracker_.push(rec.tick);
    rec.snapshot = *tracker_.last();
    if (rec.event) ++log_.summary.regulation_counts[static_cast<std::size_t>(rec.event->kind)];

    if (dfa_) {
      const auto z = pupil_norm_.push(t, pupil_mean);
      auto state = monitor_->step(rec.tick, rec.constraints, z);
      rec.level = state.level;
      ++log_.summary.time_at_level[static_cast<std::size_t>(state.level - 1)];
      for (const auto& c : adapt_->step(t, state.level)) {
        log_.commands.push_back(c);
        auto j = adapt::to_json(c);
        j["type"] = "assist";
        j["level"] = c.level;
        emit(j);
      }
      active_ = adapt_->active_set();
      log_.mwl.push_back(std::move(state));
    }

    if (t > 0 && std::fmod(static_cast<double>(t), cfg_.isa_period_s) == 0.0) {
      std::normal_distribution<double> noise(0.0, cfg_.physio.isa_noise_sd);
      const int v = std::clamp(static_cast<int>(std::lround(1.0 + 4.0 * L + noise(isa_rng_))), 1, 5);
      log_.isa.push_back({t, v, L});
      emit({{"type", "isa"}, {"t", t}, {"value", v}, {"latent", L}});
    }

    nlohmann::json at = nlohmann::json::array(), ot = nlohmann::json::array();
    for (const auto& s : rec.tick.tasks) {
      at.push_back(s.active ? 1 : 0);
      ot.push_back(s.achieved ? nlohmann::json(*s.achieved ? 1 : 0) : nlohmann::json(nullptr));
    }
    emit({{"type", "tick"},
          {"t", t},
          {"at", at},
          {"ot", ot},
          {"nps", rec.snapshot.nps},
          {"cps", rec.snapshot.cps},
          {"perf", rec.tick.perf},
          {"latent", L},
          {"n1", rec.constraints.n1},
          {"n2", rec.constraints.n2},
          {"entropy", rec.constraints.entropy},
          {"event", rec.event ? nlohmann::json(regulation::to_string(rec.event->kind)) : nlohmann::json(nullptr)},
          {"level", rec.level ? nlohmann::json(*rec.level) : nlohmann::json(nullptr)}});
    log_.ticks.push_back(std::move(rec));
  }

  void finish() {
    std::vector<regulation::ActivitySnapshot> trace;
    for (const auto& r : log_.ticks) trace.push_back(r.snapshot);
    log_.summary.compliance_rate = regulation::compliance_rate(trace);
    std::vector<taskload::Neutralization> neut;
    for (const auto& v : vehicles_)
      if (v.neutralize_t) neut.push_back({*v.detect_t, *v.neutralize_t});
    std::vector<taskload::MessageOutcome> msgs;
    for (const auto& m : messages_) msgs.push_back({m.appear_t, m.zone_t});
    taskload::PerformanceWeights w;
    w.message_budget_s = cfg_.budgets[idx(Task::kReadMessage)];
    log_.summary.performance = taskload::performance_index(neut, msgs, w);
    const auto& s = log_.summary;
    nlohmann::json reg;
    for (int k = 0; k < 5; ++k) reg[regulation::to_string(static_cast<regulation::RegulationKind>(k))] = s.regulation_counts[static_cast<std::size_t>(k)];
    emit({{"type", "summary"},
          {"operator", log_.operator_name},
          {"dfa", log_.dfa},
          {"seed", log_.seed},
          {"duration_s", log_.duration_s},
          {"compliance_rate", s.compliance_rate},
          {"vehicles_spawned", s.vehicles_spawned},
          {"vehicles_detected", s.vehicles_detected},
          {"vehicles_neutralized", s.vehicles_neutralized},
          {"objective_neutralizations", s.objective_neutralizations},
          {"messages", s.messages},
          {"messages_in_time", s.messages_in_time},
          {"performance", {{"p1", s.performance.p1}, {"p2", s.performance.p2}, {"overall", s.performance.overall}}},
          {"regulations", reg},
          {"time_at_level", log_.dfa ? nlohmann::json(s.time_at_level) : nlohmann::json(nullptr)}});
  }

  ScenarioConfig cfg_;
  OperatorScript op_;
  bool dfa_;
  monitor::EngineConfig engine_cfg_;
  std::mt19937_64 spawn_rng_, motion_rng_, physio_rng_, operator_rng_, isa_rng_, zone_rng_;
  std::vector<Vehicle> vehicles_;
  std::vector<Message> messages_;
  std::vector<Zone> zones_;
  std::set<int> referenced_;
  std::set<std::tuple<std::size_t, int, double>> expired_;  // (task, object, episode start)
  std::array<regulation::AchievementTracker, kTaskCount> achievement_{};
  std::optional<Action> op_action_;
  std::vector<Action> machine_actions_;
  double op_free_at_ = 0.0;
  double next_beat_t_ = 0.0;
  double drift_ = 0.0;
  regulation::RegulationTracker tracker_;
  physio::OnlinePupilNormalizer pupil_norm_;
  std::optional<monitor::MwlMonitor> monitor_;
  std::optional<adapt::AdaptEngine> adapt_;
  std::set<adapt::Directive> active_;
  RunLog log_;
};

}  // namespace detail

inline RunLog run_scenario(const ScenarioConfig& cfg, const OperatorScript& op, bool dfa_enabled,
                           const monitor::EngineConfig& engine = {}) {
  return detail::World(cfg, op, dfa_enabled, engine).run();
}

// ---- serialization ------------------------------------------------------------

inline std::string runlog_jsonl(const RunLog& log) {
  std::string s;
  for (const auto& e : log.events) s += e.dump() + "\n";
  return s;
}

// Per-second task tick stream consumed by `monitor`.
inline std::string ticks_jsonl(const RunLog& log) {
  std::string s;
  for (const auto& r : log.ticks) {
    nlohmann::json tasks = nlohmann::json::array();
    for (std::size_t i = 0; i < r.tick.tasks.size(); ++i) {
      const auto& st = r.tick.tasks[i];
      tasks.push_back({{"task", to_string(kTasks[i])}, {"active", st.active},
                       {"achieved", st.achieved ? nlohmann::json(*st.achieved) : nlohmann::json(nullptr)}});
    }
    s += nlohmann::json{{"t", r.tick.t}, {"tasks", tasks}, {"perf", r.tick.perf}}.dump() + "\n";
  }
  return s;
}

inline std::string constraints_jsonl(const RunLog& log) {
  std::string s;
  for (const auto& r : log.ticks) {
    const auto& c = r.constraints;
    s += nlohmann::json{{"t", c.t}, {"n1", c.n1}, {"n2", c.n2}, {"entropy", c.entropy}}.dump() + "\n";
  }
  return s;
}

inline std::string isa_csv(const RunLog& log) {
  std::string s = "t_s,isa,latent\n";
  for (const auto& i : log.isa) s += std::to_string(i.t) + "," + std::to_string(i.value) + "," + nlohmann::json(i.latent).dump() + "\n";
  return s;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : c.phases) {
    phases.push_back({{"start_s", p.start_s}, {"end_s", p.end_s}, {"vehicle_rate", p.vehicle_rate}, {"message_rate", p.message_rate}});
  }
  const auto& pm = c.physio;
  return {{"duration_s", c.duration_s},
          {"phases", phases},
          {"area", {c.area.x_min, c.area.x_max, c.area.y_min, c.area.y_max}},
          {"seed", c.seed},
          {"target_neutralizations", c.target_neutralizations},
          {"budgets", c.budgets},
          {"vehicle_speed", c.vehicle_speed},
          {"detectable_mean_s", c.detectable_mean_s},
          {"zone_drones", c.zone_drones},
          {"drone_loss_rate", c.drone_loss_rate},
          {"zone_lifetime_s", c.zone_lifetime_s},
          {"machine_delay_s", c.machine_delay_s},
          {"perf_window_s", c.perf_window_s},
          {"isa_period_s", c.isa_period_s},
          {"physio",
           {{"rr_base_ms", pm.rr_base_ms},
            {"rr_load_gain", pm.rr_load_gain},
            {"rr_jitter_ms", pm.rr_jitter_ms},
            {"rr_jitter_load_gain", pm.rr_jitter_load_gain},
            {"pupil_base_mm", pm.pupil_base_mm},
            {"pupil_load_gain_mm", pm.pupil_load_gain_mm},
            {"pupil_drift_phi", pm.pupil_drift_phi},
            {"pupil_drift_sd", pm.pupil_drift_sd},
            {"pupil_noise_sd", pm.pupil_noise_sd},
            {"pupil_hz", pm.pupil_hz},
            {"blink_prob", pm.blink_prob},
            {"artifact_prob", pm.artifact_prob},
            {"isa_noise_sd", pm.isa_noise_sd}}}};
}

// Missing keys keep their defaults.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  try {
    c.duration_s = j.value("duration_s", c.duration_s);
    if (j.contains("phases")) {
      c.phases.clear();
      for (const auto& p : j.at("phases")) {
        c.phases.push_back({p.at("start_s").get<double>(), p.at("end_s").get<double>(), p.at("vehicle_rate").get<double>(),
                            p.at("message_rate").get<double>()});
      }
    }
    if (j.contains("area")) {
      const auto a = j.at("area").get<std::vector<double>>();
      if (a.size() != 4) throw ConfigError("area must be [x_min, x_max, y_min, y_max]");
      c.area = {a[0], a[1], a[2], a[3]};
    }
    c.seed = j.value("seed", c.seed);
    c.target_neutralizations = j.value("target_neutralizations", c.target_neutralizations);
    if (j.contains("budgets")) c.budgets = j.at("budgets").get<TaskArray>();
    c.vehicle_speed = j.value("vehicle_speed", c.vehicle_speed);
    c.detectable_mean_s = j.value("detectable_mean_s", c.detectable_mean_s);
    c.zone_drones = j.value("zone_drones", c.zone_drones);
    c.drone_loss_rate = j.value("drone_loss_rate", c.drone_loss_rate);
    c.zone_lifetime_s = j.value("zone_lifetime_s", c.zone_lifetime_s);
    c.machine_delay_s = j.value("machine_delay_s", c.machine_delay_s);
    c.perf_window_s = j.value("perf_window_s", c.perf_window_s);
    c.isa_period_s = j.value("isa_period_s", c.isa_period_s);
    if (j.contains("physio")) {
      const auto& jp = j.at("physio");
      auto& pm = c.physio;
      pm.rr_base_ms = jp.value("rr_base_ms", pm.rr_base_ms);
      pm.rr_load_gain = jp.value("rr_load_gain", pm.rr_load_gain);
      pm.rr_jitter_ms = jp.value("rr_jitter_ms", pm.rr_jitter_ms);
      pm.rr_jitter_load_gain = jp.value("rr_jitter_load_gain", pm.rr_jitter_load_gain);
      pm.pupil_base_mm = jp.value("pupil_base_mm", pm.pupil_base_mm);
      pm.pupil_load_gain_mm = jp.value("pupil_load_gain_mm", pm.pupil_load_gain_mm);
      pm.pupil_drift_phi = jp.value("pupil_drift_phi", pm.pupil_drift_phi);
      pm.pupil_drift_sd = jp.value("pupil_drift_sd", pm.pupil_drift_sd);
      pm.pupil_noise_sd = jp.value("pupil_noise_sd", pm.pupil_noise_sd);
      pm.pupil_hz = jp.value("pupil_hz", pm.pupil_hz);
      pm.blink_prob = jp.value("blink_prob", pm.blink_prob);
      pm.artifact_prob = jp.value("artifact_prob", pm.artifact_prob);
      pm.isa_noise_sd = jp.value("isa_noise_sd", pm.isa_noise_sd);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const OperatorScript& s) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& k : s.latent) knots.push_back({k.t, k.load});
  return {{"name", s.name},
          {"policy", to_string(s.policy)},
          {"latent", knots},
          {"service_s", s.service_s},
          {"service_noise", s.service_noise},
          {"think_s", s.think_s},
          {"overload_threshold", s.overload_threshold}};
}

inline OperatorScript operator_script_from_json(const nlohmann::json& j) {
  OperatorScript s;
  try {
    s.name = j.at("name").get<std::string>();
    s.policy = policy_from_string(j.at("policy").get<std::string>());
    for (const auto& k : j.at("latent")) s.latent.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
    if (j.contains("service_s")) s.service_s = j.at("service_s").get<TaskArray>();
    s.service_noise = j.value("service_noise", s.service_noise);
    s.think_s = j.value("think_s", s.think_s);
    s.overload_threshold = j.value("overload_threshold", s.overload_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("operator script: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace oft::microworld
