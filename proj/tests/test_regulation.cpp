#include <gtest/gtest.h>

#include <optional>
#include <vector>

#include "oft/regulation.hpp"
#include "oracles.hpp"

using namespace oft;
using namespace oft::regulation;
using oft_test::RefTick;
using oft_test::reference_events;

namespace {

TaskTick tick(int t, std::vector<TaskState> tasks, double perf = 1.0) { return {t, std::move(tasks), perf}; }

}  // namespace

TEST(Snapshot, Examples) {
  const auto idle = snapshot(tick(0, {TaskState::idle(), TaskState::idle()}), std::nullopt, 1.0);
  EXPECT_EQ(idle.nps, 0);
  EXPECT_EQ(idle.cps, 0);
  EXPECT_EQ(idle.d_cps, 0);

  const auto s = snapshot(tick(0, {TaskState::on(true), TaskState::on(false), TaskState::idle()}), std::nullopt, 1.0);
  EXPECT_EQ(s.nps, 2);
  EXPECT_EQ(s.cps, 1);

  const auto again = snapshot(tick(1, {TaskState::on(true), TaskState::on(false), TaskState::idle()}), s, 1.0);
  EXPECT_EQ(again.d_cps, 0);
  EXPECT_EQ(again.d_nps, 0);
}

TEST(Snapshot, SequencingAndValidation) {
  const auto s0 = snapshot(tick(0, {TaskState::idle()}), std::nullopt, 1.0);
  EXPECT_THROW(snapshot(tick(0, {TaskState::idle()}), s0, 1.0), SequencingError);
  EXPECT_THROW(snapshot(tick(3, {TaskState::idle()}), s0, 1.0), SequencingError);
  TaskState bad{false, true};
  EXPECT_THROW(snapshot(tick(1, {bad}), s0, 1.0), DataError);
}

TEST(Classify, Examples) {
  ActivitySnapshot prev{0, 1, 0, 0, 0, 0.3};
  ActivitySnapshot curr{1, 1, 1, 1, 0, 0.3};
  EXPECT_EQ(classify_regulation(curr, prev, 0.5)->kind, RegulationKind::kPBR);

  prev = {0, 3, 2, 0, 2, 1.0};
  curr = {1, 3, 1, -1, 0, 1.0};
  EXPECT_EQ(classify_regulation(curr, prev)->kind, RegulationKind::kCOBR);

  prev.d_nps = 0;
  EXPECT_EQ(classify_regulation(curr, prev)->kind, RegulationKind::kPRBR);

  curr.d_cps = 0;
  EXPECT_FALSE(classify_regulation(curr, prev).has_value());

  prev = {0, 2, 1, -1, 0, 1.0};
  curr = {1, 2, 2, 1, 0, 0.9};
  EXPECT_EQ(classify_regulation(curr, prev)->kind, RegulationKind::kCBR);
  prev.d_cps = 0;
  EXPECT_EQ(classify_regulation(curr, prev)->kind, RegulationKind::kPerformanceOrientedOther);

  EXPECT_THROW(classify_regulation(curr, std::nullopt), SequencingError);
}

TEST(Classify, ExhaustiveAgreementWithLiteralRules) {
  // per task: idle, active not achieved, active achieved; perf in {0.2, 0.8}
  const TaskState states[3] = {TaskState::idle(), TaskState::on(false), TaskState::on(true)};
  constexpr int kPerTick = 3 * 3 * 2;
  constexpr int kLen = 4;
  int total = 1;
  for (int i = 0; i < kLen; ++i) total *= kPerTick;
  int mismatches = 0;
  for (int code = 0; code < total; ++code) {
    int c = code;
    RegulationTracker tracker(0.5);
    std::vector<RefTick> ref;
    for (int t = 0; t < kLen; ++t) {
      const int v = c % kPerTick;
      c /= kPerTick;
      const int a = v % 3, b = (v / 3) % 3;
      const double perf = v / 9 ? 0.8 : 0.2;
      tracker.push(tick(t, {states[a], states[b]}, perf));
      ref.push_back({{a > 0, b > 0}, {a == 2, b == 2}, perf});
    }
    const auto expect = reference_events(ref, 0.5);
    const auto& got = tracker.events();
    bool same = expect.size() == got.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].t == expect[i].first && to_string(got[i].kind) == expect[i].second;
    mismatches += same ? 0 : 1;
  }
  EXPECT_EQ(total, 104976);
  EXPECT_EQ(mismatches, 0);
}

TEST(Classify, TotalOverNonZeroDelta) {
  for (int dcps : {-2, -1, 1, 2})
    for (int pd : {-1, 0, 1})
      for (double perf : {0.0, 0.49, 0.5, 1.0}) {
        ActivitySnapshot prev{0, 2, 1, pd, pd, perf};
        ActivitySnapshot curr{1, 2, 1 + dcps, dcps, 0, perf};
        EXPECT_TRUE(classify_regulation(curr, prev).has_value());
      }
}

TEST(ComplianceRate, Cases) {
  std::vector<ActivitySnapshot> perfect{{0, 2, 2, 0, 0, 1}, {1, 1, 1, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(compliance_rate(perfect), 1.0);
  std::vector<ActivitySnapshot> never{{0, 2, 0, 0, 0, 1}, {1, 1, 0, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(compliance_rate(never), 0.0);
  std::vector<ActivitySnapshot> idle{{0, 0, 0, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(compliance_rate(idle), 1.0);
  std::vector<ActivitySnapshot> mixed{{0, 3, 2, 0, 0, 1}, {1, 0, 0, 0, 0, 1}, {2, 2, 1, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(compliance_rate(mixed), 3.0 / 5.0);
}

TEST(Tracker, Deterministic) {
  auto run = [] {
    RegulationTracker tr;
    const TaskState s[3] = {TaskState::idle(), TaskState::on(false), TaskState::on(true)};
    for (int t = 0; t < 50; ++t) tr.push(tick(t, {s[t % 3], s[(t * 7) % 3], s[(t / 2) % 3]}, (t % 5) / 4.0));
    return tr.events();
  };
  EXPECT_EQ(run(), run());
}

TEST(Tracker, PrioritizerPatternYieldsPrbrNotCobr) {
  // Two tasks stay active; compliance is dropped on one then the other, NPS never rises.
  RegulationTracker tr;
  tr.push(tick(0, {TaskState::on(true), TaskState::on(true)}));
  tr.push(tick(1, {TaskState::on(true), TaskState::on(false)}));
  tr.push(tick(2, {TaskState::on(true), TaskState::on(false)}));
  tr.push(tick(3, {TaskState::on(false), TaskState::on(false)}));
  int prbr = 0, cobr = 0;
  for (const auto& e : tr.events()) {
    prbr += e.kind == RegulationKind::kPRBR;
    cobr += e.kind == RegulationKind::kCOBR;
  }
  EXPECT_GE(prbr, 1);
  EXPECT_EQ(cobr, 0);
}

TEST(Achievement, FlipsOnExpiryAndRecovers) {
  AchievementTracker a;
  EXPECT_TRUE(a.achieved());
  a.on_budget_expired();
  EXPECT_FALSE(a.achieved());
  a.on_processed(false);
  EXPECT_FALSE(a.achieved());
  a.on_processed(true);
  EXPECT_TRUE(a.achieved());
}

TEST(TaskSpecs, Validation) {
  std::vector<TaskSpec> ok{{"A", "s", 10}, {"B", "s", 5}};
  EXPECT_NO_THROW(validate_tasks(ok));
  std::vector<TaskSpec> dup{{"A", "s", 10}, {"A", "s", 5}};
  EXPECT_THROW(validate_tasks(dup), ConfigError);
  std::vector<TaskSpec> zero{{"A", "s", 0}};
  EXPECT_THROW(validate_tasks(zero), ConfigError);
}
