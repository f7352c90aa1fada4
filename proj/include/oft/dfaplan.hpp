#pragma once

// Dynamic function allocation over function-resource couples.
//
// A model declares couples, per-situation statuses (expected / optional /
// impossible), XOR groups and constraints. For a set of concurrent situations
// MinConf collects what has to be allocated, Pot what may be, and optimize()
// searches MinConf <= Sol <= Pot exhaustively for the cheapest admissible set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"

namespace oft::dfaplan {

enum class Status { kExpected, kOptional, kImpossible };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kExpected: return "expected";
    case Status::kOptional: return "optional";
    case Status::kImpossible: return "impossible";
  }
  return "?";
}

inline Status status_from_string(const std::string& s) {
  if (s == "expected") return Status::kExpected;
  if (s == "optional") return Status::kOptional;
  if (s == "impossible") return Status::kImpossible;
  throw ConfigError("unknown couple status: " + s);
}

struct Couple {
  std::string function;
  std::string resource;

  std::string id() const { return function + "-" + resource; }
};

struct Situation {
  std::string id;
  std::map<std::string, Status> statuses;  // couple id -> status; missing means impossible

  Status status(const std::string& couple) const {
    const auto it = statuses.find(couple);
    return it == statuses.end() ? Status::kImpossible : it->second;
  }
};

enum class ConstraintKind { kBinary, kDisjunctive, kExclusive, kCapacity, kConditional, kAntecedence };

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::kBinary: return "binary";
    case ConstraintKind::kDisjunctive: return "disjunctive";
    case ConstraintKind::kExclusive: return "exclusive";
    case ConstraintKind::kCapacity: return "capacity";
    case ConstraintKind::kConditional: return "conditional";
    case ConstraintKind::kAntecedence: return "antecedence";
  }
  return "?";
}

inline ConstraintKind constraint_kind_from_string(const std::string& s) {
  for (auto k : {ConstraintKind::kBinary, ConstraintKind::kDisjunctive, ConstraintKind::kExclusive,
                 ConstraintKind::kCapacity, ConstraintKind::kConditional, ConstraintKind::kAntecedence}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown constraint kind: " + s);
}

// binary: `couple` is forced in (allowed) or out (!allowed)
// disjunctive: at least one of `couples`
// exclusive: at most one of `couples`
// capacity: at most `bound` selected couples use one of `resources`
// conditional: `couple` only if `requires` is selected too
// antecedence: `couple` only if `requires` was selected at an earlier scenario step
struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::kBinary;
  std::string couple;
  std::string requires_couple;
  std::vector<std::string> couples;
  std::vector<std::string> resources;
  bool allowed = true;
  int bound = 0;

  std::string label() const {
    std::ostringstream os;
    os << to_string(kind) << '(';
    switch (kind) {
      case ConstraintKind::kBinary: os << couple << (allowed ? " on" : " off"); break;
      case ConstraintKind::kConditional:
      case ConstraintKind::kAntecedence: os << couple << " requires " << requires_couple; break;
      case ConstraintKind::kCapacity: {
        for (std::size_t i = 0; i < resources.size(); ++i) os << (i ? "," : "") << resources[i];
        os << " <= " << bound;
        break;
      }
      default:
        for (std::size_t i = 0; i < couples.size(); ++i) os << (i ? "," : "") << couples[i];
    }
    os << ')';
    return os.str();
  }
};

using CostModel = std::map<std::string, double>;  // couple id -> cost; missing couples cost 0

struct AllocationModel {
  std::vector<std::string> functions;
  std::vector<std::string> resources;
  std::vector<Couple> couples;
  std::vector<Situation> situations;
  std::vector<std::vector<std::string>> xor_groups;
  std::vector<ConstraintSpec> constraints;
  std::map<std::string, CostModel> cost_models;

  std::vector<std::string> couple_ids() const {
    std::vector<std::string> ids;
    for (const auto& c : couples) ids.push_back(c.id());
    return ids;
  }

  bool has_couple(const std::string& id) const {
    return std::any_of(couples.begin(), couples.end(), [&](const Couple& c) { return c.id() == id; });
  }

  const Couple& couple(const std::string& id) const {
    for (const auto& c : couples)
      if (c.id() == id) return c;
    throw ConfigError("unknown couple: " + id);
  }

  const Situation& situation(const std::string& id) const {
    for (const auto& s : situations)
      if (s.id == id) return s;
    throw ConfigError("unknown situation: " + id);
  }

  const CostModel& cost_model(const std::string& name) const {
    const auto it = cost_models.find(name);
    if (it == cost_models.end()) throw ConfigError("unknown cost criterion: " + name);
    return it->second;
  }

  // position in declaration order
  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < couples.size(); ++i)
      if (couples[i].id() == id) return i;
    throw ConfigError("unknown couple: " + id);
  }

  void validate() const {
    const std::set<std::string> fset(functions.begin(), functions.end());
    const std::set<std::string> rset(resources.begin(), resources.end());
    std::set<std::string> ids;
    for (const auto& c : couples) {
      if (!fset.count(c.function)) throw ConfigError("couple " + c.id() + ": undeclared function");
      if (!rset.count(c.resource)) throw ConfigError("couple " + c.id() + ": undeclared resource");
      if (!ids.insert(c.id()).second) throw ConfigError("duplicate couple: " + c.id());
    }
    auto need = [&](const std::string& id, const std::string& where) {
      if (!ids.count(id)) throw ConfigError(where + ": undeclared couple " + id);
    };
    std::set<std::string> sids;
    for (const auto& s : situations) {
      if (!sids.insert(s.id).second) throw ConfigError("duplicate situation: " + s.id);
      for (const auto& [c, st] : s.statuses) need(c, "situation " + s.id);
    }
    std::set<std::string> grouped;
    for (const auto& g : xor_groups) {
      if (g.size() < 2) throw ConfigError("XOR group needs at least two couples");
      for (const auto& c : g) {
        need(c, "XOR group");
        if (!grouped.insert(c).second) throw ConfigError("couple " + c + " appears in more than one XOR group");
      }
    }
    for (const auto& k : constraints) {
      const auto where = "constraint " + k.label();
      switch (k.kind) {
        case ConstraintKind::kBinary: need(k.couple, where); break;
        case ConstraintKind::kConditional:
        case ConstraintKind::kAntecedence:
          need(k.couple, where);
          need(k.requires_couple, where);
          break;
        case ConstraintKind::kDisjunctive:
        case ConstraintKind::kExclusive:
          if (k.couples.empty()) throw ConfigError(where + ": no operands");
          for (const auto& c : k.couples) need(c, where);
          break;
        case ConstraintKind::kCapacity:
          if (k.resources.empty()) throw ConfigError(where + ": no resources");
          if (k.bound < 0) throw ConfigError(where + ": negative bound");
          for (const auto& r : k.resources)
            if (!rset.count(r)) throw ConfigError(where + ": undeclared resource " + r);
          break;
      }
    }
    for (const auto& [name, cm] : cost_models) {
      for (const auto& [c, v] : cm) {
        need(c, "cost model " + name);
        if (!std::isfinite(v)) throw ConfigError("cost model " + name + ": non-finite cost for " + c);
      }
    }
  }

  const std::vector<std::string>* xor_group_of(const std::string& id) const {
    for (const auto& g : xor_groups)
      if (std::find(g.begin(), g.end(), id) != g.end()) return &g;
    return nullptr;
  }
};

// A single couple, or an exclusive choice among several.
struct Requirement {
  std::vector<std::string> couples;

  bool is_xor() const { return couples.size() > 1; }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < couples.size(); ++i) s += (i ? " XOR " : "") + couples[i];
    return s;
  }

  friend bool operator==(const Requirement&, const Requirement&) = default;
};

struct PotEntry {
  std::string couple;
  std::vector<std::string> conditions;  // "if" couples from conditional constraints

  std::string to_string() const {
    std::string s = couple;
    for (const auto& c : conditions) s += " if " + c;
    return s;
  }
};

struct AllocationSets {
  std::vector<std::string> situations;
  std::vector<Requirement> min_config;
  std::vector<PotEntry> pot;

  std::set<std::string> pot_ids() const {
    std::set<std::string> s;
    for (const auto& p : pot) s.insert(p.couple);
    return s;
  }
};

template <typename T, typename F>
std::string format_set(const std::vector<T>& items, F&& fmt) {
  std::string s = "{";
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "; " : "") + fmt(items[i]);
  return s + "}";
}

inline std::string format(const std::vector<Requirement>& r) {
  return format_set(r, [](const Requirement& x) { return x.to_string(); });
}

inline std::string format(const std::vector<PotEntry>& p) {
  return format_set(p, [](const PotEntry& x) { return x.to_string(); });
}

inline void require_situations(const std::vector<std::string>& ids) {
  if (ids.empty()) throw ArgumentError("at least one situation is required");
}

// Union of expected couples. A couple belonging to an XOR group contributes the
// whole group as one exclusive requirement. Ordered by first couple position.
inline std::vector<Requirement> min_config(const AllocationModel& m, const std::vector<std::string>& situation_ids) {
  require_situations(situation_ids);
  std::vector<Requirement> out;
  std::set<std::string> covered;
  for (const auto& c : m.couples) {
    const auto id = c.id();
    if (covered.count(id)) continue;
    const auto* group = m.xor_group_of(id);
    const std::vector<std::string> members = group ? *group : std::vector<std::string>{id};
    bool expected = false;
    for (const auto& sid : situation_ids)
      for (const auto& mem : members) expected = expected || m.situation(sid).status(mem) == Status::kExpected;
    if (!expected) continue;
    std::vector<std::string> ordered = members;
    std::sort(ordered.begin(), ordered.end(),
              [&](const std::string& a, const std::string& b) { return m.index_of(a) < m.index_of(b); });
    covered.insert(ordered.begin(), ordered.end());
    out.push_back({ordered});
  }
  std::sort(out.begin(), out.end(), [&](const Requirement& a, const Requirement& b) {
    return m.index_of(a.couples.front()) < m.index_of(b.couples.front());
  });
  return out;
}

// Intersection of non-impossible couples, in declaration order.
inline std::vector<PotEntry> pot(const AllocationModel& m, const std::vector<std::string>& situation_ids) {
  require_situations(situation_ids);
  std::vector<PotEntry> out;
  for (const auto& c : m.couples) {
    const auto id = c.id();
    const bool possible = std::all_of(situation_ids.begin(), situation_ids.end(), [&](const std::string& sid) {
      return m.situation(sid).status(id) != Status::kImpossible;
    });
    if (!possible) continue;
    PotEntry e{id, {}};
    for (const auto& k : m.constraints)
      if (k.kind == ConstraintKind::kConditional && k.couple == id) e.conditions.push_back(k.requires_couple);
    out.push_back(std::move(e));
  }
  return out;
}

inline AllocationSets allocation_sets(const AllocationModel& m, const std::vector<std::string>& situation_ids) {
  return {situation_ids, min_config(m, situation_ids), pot(m, situation_ids)};
}

struct Conflict {
  Requirement requirement;
  std::map<std::string, std::vector<std::string>> eliminated_by;  // couple -> situations marking it impossible
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Conflict> conflicts;

  std::string describe() const {
    if (feasible) return "feasible";
    std::string s = "infeasible:";
    for (const auto& c : conflicts) {
      s += " [" + c.requirement.to_string() + " not in Pot;";
      for (const auto& [couple, sits] : c.eliminated_by) {
        s += " " + couple + " impossible in";
        for (const auto& x : sits) s += " " + x;
        s += ";";
      }
      s.back() = ']';
    }
    return s;
  }
};

inline FeasibilityReport check_feasible(const AllocationModel& m, const AllocationSets& sets) {
  FeasibilityReport r;
  const auto p = sets.pot_ids();
  for (const auto& req : sets.min_config) {
    const bool ok = std::any_of(req.couples.begin(), req.couples.end(), [&](const std::string& c) { return p.count(c) > 0; });
    if (ok) continue;
    r.feasible = false;
    Conflict c{req, {}};
    for (const auto& couple : req.couples)
      for (const auto& sid : sets.situations)
        if (m.situation(sid).status(couple) == Status::kImpossible) c.eliminated_by[couple].push_back(sid);
    r.conflicts.push_back(std::move(c));
  }
  return r;
}

// ---- optimization -------------------------------------------------------------

struct Solution {
  std::vector<std::string> couples;  // declaration order
  double cost = 0.0;
  std::vector<std::string> warnings;
};

class UnsatisfiableError : public InfeasibleError {
 public:
  UnsatisfiableError(const std::string& what, std::vector<std::string> core)
      : InfeasibleError(what), core_(std::move(core)) {}
  const std::vector<std::string>& core() const { return core_; }

 private:
  std::vector<std::string> core_;
};

class ConflictError : public InfeasibleError {
 public:
  explicit ConflictError(FeasibilityReport report)
      : InfeasibleError("design conflict, MinConf is not included in Pot: " + report.describe()), report_(std::move(report)) {}
  const FeasibilityReport& report() const { return report_; }

 private:
  FeasibilityReport report_;
};

struct SolveOptions {
  // Couples selected at earlier scenario steps; nullopt means single-shot,
  // where antecedence constraints are ignored.
  std::optional<std::set<std::string>> history;
  std::size_t max_free_couples = 24;
};

// Independent post-hoc check of every requirement and constraint.
inline bool satisfies(const AllocationModel& m, const AllocationSets& sets, const std::vector<ConstraintSpec>& constraints,
                      const std::set<std::string>& sol, const std::optional<std::set<std::string>>& history = std::nullopt) {
  const auto p = sets.pot_ids();
  for (const auto& c : sol)
    if (!p.count(c)) return false;
  for (const auto& req : sets.min_config) {
    const auto n = std::count_if(req.couples.begin(), req.couples.end(), [&](const std::string& c) { return sol.count(c) > 0; });
    if (n != 1) return false;  // plain: present; XOR: exactly one
  }
  for (const auto& k : constraints) {
    switch (k.kind) {
      case ConstraintKind::kBinary:
        if ((sol.count(k.couple) > 0) != k.allowed) return false;
        break;
      case ConstraintKind::kDisjunctive:
        if (std::none_of(k.couples.begin(), k.couples.end(), [&](const std::string& c) { return sol.count(c) > 0; })) return false;
        break;
      case ConstraintKind::kExclusive:
        if (std::count_if(k.couples.begin(), k.couples.end(), [&](const std::string& c) { return sol.count(c) > 0; }) > 1) return false;
        break;
      case ConstraintKind::kCapacity: {
        int used = 0;
        for (const auto& c : sol) {
          const auto& r = m.couple(c).resource;
          if (std::find(k.resources.begin(), k.resources.end(), r) != k.resources.end()) ++used;
        }
        if (used > k.bound) return false;
        break;
      }
      case ConstraintKind::kConditional:
        if (sol.count(k.couple) && !sol.count(k.requires_couple)) return false;
        break;
      case ConstraintKind::kAntecedence:
        if (history && sol.count(k.couple) && !history->count(k.requires_couple)) return false;
        break;
    }
  }
  return true;
}

namespace detail {

inline double cost_of(const CostModel& cost, const std::vector<std::string>& ids) {
  double s = 0.0;
  for (const auto& c : ids) {
    const auto it = cost.find(c);
    if (it != cost.end()) s += it->second;
  }
  return s;
}

// Exhaustive search over subsets of Pot; returns the cheapest admissible set,
// ties broken by the lexicographically smallest sorted id list.
inline std::optional<std::pair<std::vector<std::string>, double>> search(const AllocationModel& m, const AllocationSets& sets,
                                                                         const std::vector<ConstraintSpec>& constraints,
                                                                         const CostModel& cost, const SolveOptions& opt) {
  std::vector<std::string> ids;
  for (const auto& p : sets.pot) ids.push_back(p.couple);
  std::sort(ids.begin(), ids.end());
  if (ids.size() > opt.max_free_couples) throw ArgumentError("optimize: Pot too large for exhaustive search");
  std::optional<std::pair<std::vector<std::string>, double>> best;
  const std::uint64_t n = std::uint64_t{1} << ids.size();
  for (std::uint64_t mask = 0; mask < n; ++mask) {
    std::set<std::string> sol;
    std::vector<std::string> sorted;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (mask & (std::uint64_t{1} << i)) {
        sol.insert(ids[i]);
        sorted.push_back(ids[i]);
      }
    }
    if (!satisfies(m, sets, constraints, sol, opt.history)) continue;
    const double c = cost_of(cost, sorted);
    if (!best || c < best->second - 1e-9 || (std::abs(c - best->second) <= 1e-9 && sorted < best->first)) {
      best = std::make_pair(sorted, c);
    }
  }
  return best;
}

}  // namespace detail

inline Solution optimize(const AllocationModel& m, const AllocationSets& sets, const std::vector<ConstraintSpec>& constraints,
                         const CostModel& cost, const SolveOptions& opt = {}) {
  const auto report = check_feasible(m, sets);
  if (!report.feasible) throw ConflictError(report);
  Solution sol;
  if (!opt.history && std::any_of(constraints.begin(), constraints.end(),
                                  [](const ConstraintSpec& k) { return k.kind == ConstraintKind::kAntecedence; })) {
    sol.warnings.push_back("antecedence constraints ignored outside scenario mode");
  }
  const auto best = detail::search(m, sets, constraints, cost, opt);
  if (!best) {
    // deletion-based minimal unsatisfiable core
    std::vector<ConstraintSpec> core = constraints;
    for (std::size_t i = 0; i < core.size();) {
      auto trial = core;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      if (!detail::search(m, sets, trial, cost, opt)) {
        core = std::move(trial);
      } else {
        ++i;
      }
    }
    std::vector<std::string> labels;
    std::string what = "no admissible allocation under the constraints; unsatisfiable core:";
    for (const auto& k : core) {
      labels.push_back(k.label());
      what += " " + k.label();
    }
    if (core.empty()) what += " (requirements alone)";
    throw UnsatisfiableError(what, labels);
  }
  sol.cost = best->second;
  sol.couples = best->first;
  std::sort(sol.couples.begin(), sol.couples.end(),
            [&](const std::string& a, const std::string& b) { return m.index_of(a) < m.index_of(b); });
  return sol;
}

inline Solution optimize(const AllocationModel& m, const std::vector<std::string>& situation_ids, const std::string& criterion,
                         const SolveOptions& opt = {}) {
  return optimize(m, allocation_sets(m, situation_ids), m.constraints, m.cost_model(criterion), opt);
}

struct ScenarioStep {
  std::vector<std::string> situations;
  AllocationSets sets;
  FeasibilityReport feasibility;
  std::optional<Solution> solution;
  std::string error;  // set when the step has no solution
};

// Solves each step in order; couples selected at a step become antecedents
// for every later step.
inline std::vector<ScenarioStep> solve_scenario(const AllocationModel& m, const std::vector<std::vector<std::string>>& steps,
                                                const std::string& criterion) {
  std::vector<ScenarioStep> out;
  SolveOptions opt;
  opt.history = std::set<std::string>{};
  for (const auto& sids : steps) {
    ScenarioStep step{sids, allocation_sets(m, sids), {}, std::nullopt, {}};
    step.feasibility = check_feasible(m, step.sets);
    if (step.feasibility.feasible) {
      try {
        step.solution = optimize(m, step.sets, m.constraints, m.cost_model(criterion), opt);
        opt.history->insert(step.solution->couples.begin(), step.solution->couples.end());
      } catch (const InfeasibleError& e) {
        step.error = e.what();
      }
    } else {
      step.error = step.feasibility.describe();
    }
    out.push_back(std::move(step));
  }
  return out;
}

// ---- JSON ---------------------------------------------------------------------

inline AllocationModel model_from_json(const nlohmann::json& j) {
  AllocationModel m;
  try {
    m.functions = j.at("functions").get<std::vector<std::string>>();
    m.resources = j.at("resources").get<std::vector<std::string>>();
    for (const auto& c : j.at("couples")) {
      if (c.is_string()) {
        const auto s = c.get<std::string>();
        const auto dash = s.rfind('-');
        if (dash == std::string::npos) throw ConfigError("couple id must be FUNCTION-RESOURCE: " + s);
        m.couples.push_back({s.substr(0, dash), s.substr(dash + 1)});
      } else {
        m.couples.push_back({c.at("function").get<std::string>(), c.at("resource").get<std::string>()});
      }
    }
    for (const auto& js : j.at("situations")) {
      Situation s;
      s.id = js.at("id").get<std::string>();
      for (const auto& [couple, st] : js.at("statuses").items()) s.statuses[couple] = status_from_string(st.get<std::string>());
      m.situations.push_back(std::move(s));
    }
    if (j.contains("xor_groups")) m.xor_groups = j.at("xor_groups").get<std::vector<std::vector<std::string>>>();
    if (j.contains("constraints")) {
      for (const auto& jc : j.at("constraints")) {
        ConstraintSpec k;
        k.kind = constraint_kind_from_string(jc.at("kind").get<std::string>());
        if (jc.contains("couple")) k.couple = jc.at("couple").get<std::string>();
        if (jc.contains("requires")) k.requires_couple = jc.at("requires").get<std::string>();
        if (jc.contains("couples")) k.couples = jc.at("couples").get<std::vector<std::string>>();
        if (jc.contains("resources")) k.resources = jc.at("resources").get<std::vector<std::string>>();
        if (jc.contains("allowed")) k.allowed = jc.at("allowed").get<bool>();
        if (jc.contains("bound")) k.bound = jc.at("bound").get<int>();
        m.constraints.push_back(std::move(k));
      }
    }
    if (j.contains("cost_models")) {
      for (const auto& [name, jm] : j.at("cost_models").items()) m.cost_models[name] = jm.get<CostModel>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("allocation model: ") + e.what());
  }
  m.validate();
  return m;
}

inline nlohmann::json to_json(const FeasibilityReport& r) {
  nlohmann::json conflicts = nlohmann::json::array();
  for (const auto& c : r.conflicts) conflicts.push_back({{"requirement", c.requirement.to_string()}, {"eliminated_by", c.eliminated_by}});
  return {{"feasible", r.feasible}, {"conflicts", conflicts}};
}

inline nlohmann::json to_json(const AllocationSets& s) {
  nlohmann::json mc = nlohmann::json::array(), p = nlohmann::json::array();
  for (const auto& r : s.min_config) mc.push_back(r.couples);
  for (const auto& e : s.pot) p.push_back({{"couple", e.couple}, {"if", e.conditions}});
  return {{"situations", s.situations},
          {"min_config", mc},
          {"pot", p},
          {"min_config_text", format(s.min_config)},
          {"pot_text", format(s.pot)}};
}

inline nlohmann::json to_json(const Solution& s) {
  return {{"couples", s.couples}, {"cost", s.cost}, {"warnings", s.warnings}};
}

}  // namespace oft::dfaplan
