#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oft/dfaplan.hpp"
#include "oft/io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace oft;
using namespace oft::dfaplan;

namespace {

const AllocationModel& bike() {
  static const AllocationModel m = model_from_json(io::read_json_file(oft_test::source_dir() / "data/bike.json"));
  return m;
}

const std::vector<std::string> kNominal{"S1", "S4", "S6"};
const std::vector<std::string> kDegraded{"S2", "S7", "S8"};

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::set<std::string> requirement_couples(const std::vector<Requirement>& r) {
  std::set<std::string> s;
  for (const auto& x : r) s.insert(x.couples.begin(), x.couples.end());
  return s;
}

}  // namespace

TEST(Bike, NominalSets) {
  const auto s = allocation_sets(bike(), kNominal);
  EXPECT_EQ(format(s.min_config), "{F1-H; F4-H}");
  EXPECT_EQ(format(s.pot), "{F1-H; F1-M if F1-H; F3-M; F4-H}");
  EXPECT_TRUE(check_feasible(bike(), s).feasible);
}

TEST(Bike, NominalSolutions) {
  const auto cyclist = optimize(bike(), kNominal, "cyclist_workload");
  EXPECT_EQ(cyclist.couples, (std::vector<std::string>{"F1-H", "F1-M", "F4-H"}));
  EXPECT_DOUBLE_EQ(cyclist.cost, 2.0);
  const auto energy = optimize(bike(), kNominal, "energy_consumption");
  EXPECT_EQ(energy.couples, (std::vector<std::string>{"F1-H", "F4-H"}));
  EXPECT_DOUBLE_EQ(energy.cost, 0.0);
}

TEST(Bike, DegradedConflictOnRouting) {
  const auto s = allocation_sets(bike(), kDegraded);
  EXPECT_EQ(format(s.min_config), "{F1-H; F1-M; F2-H XOR F2-M; F3-H XOR F3-M; F4-H}");
  EXPECT_EQ(format(s.pot), "{F1-H; F1-M if F1-H; F3-H; F4-H}");
  const auto r = check_feasible(bike(), s);
  EXPECT_FALSE(r.feasible);
  ASSERT_EQ(r.conflicts.size(), 1u);
  EXPECT_EQ(r.conflicts[0].requirement.to_string(), "F2-H XOR F2-M");
  EXPECT_EQ(r.conflicts[0].eliminated_by.at("F2-H"), std::vector<std::string>{"S7"});
  EXPECT_EQ(r.conflicts[0].eliminated_by.at("F2-M"), std::vector<std::string>{"S8"});
  try {
    optimize(bike(), kDegraded, "cyclist_workload");
    FAIL() << "conflict not reported";
  } catch (const ConflictError& e) {
    EXPECT_FALSE(e.report().feasible);
    EXPECT_EQ(e.code(), ExitCode::kInfeasible);
  }
}

TEST(Bike, SingleSituationPotIsItsPossibleCouples) {
  for (const auto& sit : bike().situations) {
    std::vector<std::string> expect;
    for (const auto& id : bike().couple_ids())
      if (sit.status(id) != Status::kImpossible) expect.push_back(id);
    std::vector<std::string> got;
    for (const auto& p : pot(bike(), {sit.id})) got.push_back(p.couple);
    EXPECT_EQ(got, expect) << sit.id;
  }
}

TEST(Feasibility, EmptyMinConfigIsFeasible) {
  AllocationModel m;
  m.functions = {"F1"};
  m.resources = {"H"};
  m.couples = {{"F1", "H"}};
  m.situations = {{"S1", {{"F1-H", Status::kOptional}}}};
  const auto s = allocation_sets(m, {"S1"});
  EXPECT_TRUE(s.min_config.empty());
  EXPECT_TRUE(check_feasible(m, s).feasible);
  EXPECT_EQ(format(s.min_config), "{}");
  EXPECT_THROW(allocation_sets(m, {}), ArgumentError);
  EXPECT_THROW(allocation_sets(m, {"S9"}), ConfigError);
}

TEST(Optimize, MatchesBruteForceOnRandomModels) {
  std::mt19937_64 rng(20240611);
  int solved = 0, conflicts = 0, unsat = 0;
  for (int rep = 0; rep < 600; ++rep) {
    const auto m = oft_test::random_allocation_model(rng);
    const auto sids = oft_test::random_situations(m, rng);
    const auto want = oft_test::brute_force_allocation(m, sids, "c");
    try {
      const auto got = optimize(m, sids, "c");
      ASSERT_EQ(want.outcome, oft_test::OracleOutcome::kSolved) << "rep " << rep;
      auto sorted = got.couples;
      std::sort(sorted.begin(), sorted.end());
      EXPECT_EQ(sorted, want.couples) << "rep " << rep;
      EXPECT_NEAR(got.cost, want.cost, 1e-9);
      EXPECT_TRUE(satisfies(m, allocation_sets(m, sids), m.constraints, as_set(got.couples)));
      ++solved;
    } catch (const ConflictError&) {
      EXPECT_EQ(want.outcome, oft_test::OracleOutcome::kConflict) << "rep " << rep;
      ++conflicts;
    } catch (const UnsatisfiableError&) {
      EXPECT_EQ(want.outcome, oft_test::OracleOutcome::kUnsatisfiable) << "rep " << rep;
      ++unsat;
    }
  }
  // every outcome class is exercised
  EXPECT_GT(solved, 100);
  EXPECT_GT(conflicts, 0);
  EXPECT_GT(unsat, 0);
}

TEST(Optimize, SolutionBetweenMinConfigAndPot) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = oft_test::random_allocation_model(rng);
    const auto sids = oft_test::random_situations(m, rng);
    const auto sets = allocation_sets(m, sids);
    if (!check_feasible(m, sets).feasible) continue;
    try {
      const auto sol = as_set(optimize(m, sids, "c").couples);
      const auto p = sets.pot_ids();
      for (const auto& c : sol) EXPECT_TRUE(p.count(c));
      for (const auto& r : sets.min_config) {
        const auto n = std::count_if(r.couples.begin(), r.couples.end(), [&](const auto& c) { return sol.count(c); });
        EXPECT_EQ(n, 1);
      }
    } catch (const UnsatisfiableError&) {
    }
  }
}

TEST(Sets, MonotoneUnderAddedSituations) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = oft_test::random_allocation_model(rng);
    auto sids = oft_test::random_situations(m, rng);
    const auto before = allocation_sets(m, sids);
    std::vector<std::string> extra;
    for (const auto& s : m.situations)
      if (std::find(sids.begin(), sids.end(), s.id) == sids.end()) extra.push_back(s.id);
    if (extra.empty()) continue;
    sids.push_back(extra[rep % extra.size()]);
    const auto after = allocation_sets(m, sids);
    const auto p0 = before.pot_ids(), p1 = after.pot_ids();
    EXPECT_TRUE(std::includes(p0.begin(), p0.end(), p1.begin(), p1.end()));
    const auto r0 = requirement_couples(before.min_config), r1 = requirement_couples(after.min_config);
    EXPECT_TRUE(std::includes(r1.begin(), r1.end(), r0.begin(), r0.end()));
  }
}

TEST(Optimize, FeasibleWithZeroCostsAndNoConstraintsAlwaysSolves) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 300; ++rep) {
    auto m = oft_test::random_allocation_model(rng);
    m.constraints.clear();
    m.cost_models["zero"] = {};
    const auto sids = oft_test::random_situations(m, rng);
    const auto sets = allocation_sets(m, sids);
    if (!check_feasible(m, sets).feasible) continue;
    const auto sol = optimize(m, sids, "zero");
    EXPECT_DOUBLE_EQ(sol.cost, 0.0);
    EXPECT_TRUE(satisfies(m, sets, m.constraints, as_set(sol.couples)));
  }
}

TEST(Optimize, UnsatisfiableCoreIsMinimal) {
  auto m = bike();
  ConstraintSpec off;
  off.kind = ConstraintKind::kBinary;
  off.couple = "F1-H";
  off.allowed = false;
  ConstraintSpec harmless;
  harmless.kind = ConstraintKind::kCapacity;
  harmless.resources = {"M"};
  harmless.bound = 5;
  m.constraints.push_back(harmless);
  m.constraints.push_back(off);
  try {
    optimize(m, kNominal, "cyclist_workload");
    FAIL() << "expected unsatisfiable";
  } catch (const UnsatisfiableError& e) {
    EXPECT_EQ(e.core(), std::vector<std::string>{off.label()});
  }
}

TEST(Optimize, CapacityLimitsResourceUse) {
  auto m = bike();
  ConstraintSpec cap;
  cap.kind = ConstraintKind::kCapacity;
  cap.resources = {"M"};
  cap.bound = 0;
  m.constraints.push_back(cap);
  EXPECT_EQ(optimize(m, kNominal, "cyclist_workload").couples, (std::vector<std::string>{"F1-H", "F4-H"}));
}

TEST(Scenario, AntecedenceNeedsAnEarlierSelection) {
  auto m = bike();
  ConstraintSpec ante;
  ante.kind = ConstraintKind::kAntecedence;
  ante.couple = "F1-M";
  ante.requires_couple = "F3-M";
  m.constraints.push_back(ante);
  // make F3-M attractive so it gets selected when possible
  m.cost_models["cyclist_workload"]["F3-M"] = -1;

  const auto single = optimize(m, kNominal, "cyclist_workload");
  ASSERT_EQ(single.warnings.size(), 1u);

  // without a prior F3-M, step one cannot take F1-M; step two can
  const auto steps = solve_scenario(m, {kNominal, kNominal}, "cyclist_workload");
  ASSERT_EQ(steps.size(), 2u);
  ASSERT_TRUE(steps[0].solution && steps[1].solution);
  const auto a = as_set(steps[0].solution->couples), b = as_set(steps[1].solution->couples);
  EXPECT_FALSE(a.count("F1-M"));
  EXPECT_TRUE(a.count("F3-M"));
  EXPECT_TRUE(b.count("F1-M"));

  // a conflicting step records an error and leaves the history untouched
  const auto with_gap = solve_scenario(m, {kDegraded, kNominal}, "cyclist_workload");
  EXPECT_FALSE(with_gap[0].solution.has_value());
  EXPECT_FALSE(with_gap[0].error.empty());
  ASSERT_TRUE(with_gap[1].solution);
  EXPECT_FALSE(as_set(with_gap[1].solution->couples).count("F1-M"));
}

TEST(Scenario, AdmissibleIffAntecedentSeenBefore) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    auto m = oft_test::random_allocation_model(rng);
    const auto ids = m.couple_ids();
    if (ids.size() < 2) continue;
    ConstraintSpec ante;
    ante.kind = ConstraintKind::kAntecedence;
    ante.couple = ids[0];
    ante.requires_couple = ids[1];
    m.constraints.push_back(ante);
    std::vector<std::vector<std::string>> seq;
    for (int i = 0; i < 3; ++i) seq.push_back(oft_test::random_situations(m, rng));
    std::set<std::string> history;
    for (const auto& step : solve_scenario(m, seq, "c")) {
      if (step.solution) {
        const auto sol = as_set(step.solution->couples);
        if (sol.count(ids[0])) {
          EXPECT_TRUE(history.count(ids[1]));
        }
        EXPECT_TRUE(satisfies(m, step.sets, m.constraints, sol, history));
        history.insert(sol.begin(), sol.end());
      }
    }
  }
}

TEST(Json, Errors) {
  auto j = io::read_json_file(oft_test::source_dir() / "data/bike.json");
  auto bad = j;
  bad["couples"].push_back("F9-H");
  EXPECT_THROW(model_from_json(bad), ConfigError);
  bad = j;
  bad["situations"][0]["statuses"]["F1-H"] = "sometimes";
  EXPECT_THROW(model_from_json(bad), ConfigError);
  bad = j;
  bad["xor_groups"].push_back({"F1-H", "F2-H"});
  EXPECT_THROW(model_from_json(bad), ConfigError);
  bad = j;
  bad["cost_models"]["x"] = {{"F7-M", 1}};
  EXPECT_THROW(model_from_json(bad), ConfigError);
  bad = j;
  bad.erase("functions");
  EXPECT_THROW(model_from_json(bad), ConfigError);
  EXPECT_THROW(bike().cost_model("speed"), ConfigError);
}

TEST(Json, Reports) {
  const auto s = allocation_sets(bike(), kNominal);
  const auto js = to_json(s);
  EXPECT_EQ(js["min_config_text"], "{F1-H; F4-H}");
  EXPECT_EQ(js["pot"][1]["if"], nlohmann::json::array({"F1-H"}));
  const auto r = to_json(check_feasible(bike(), allocation_sets(bike(), kDegraded)));
  EXPECT_FALSE(r["feasible"].get<bool>());
  EXPECT_EQ(r["conflicts"][0]["requirement"], "F2-H XOR F2-M");
}
