#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oft/effortclass.hpp"
#include "oft/io.hpp"
#include "oracles.hpp"

using namespace oft;
using namespace oft::effortclass;

namespace {

std::vector<Features> probes() {
  std::vector<Features> p;
  for (int i = -2; i <= 8; ++i)
    for (int j = -2; j <= 8; ++j) p.push_back({i * 0.1, j * 0.1});
  return p;
}

}  // namespace

TEST(Metric, Examples) {
  EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}, Metric::kChebyshev), 4.0);
  EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}, Metric::kEuclidean), 5.0);
  EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}, Metric::kSquaredEuclidean), 25.0);
  EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}, Metric::kManhattan), 7.0);
  EXPECT_EQ(metric_from_string("chebyshev"), Metric::kChebyshev);
  EXPECT_THROW(metric_from_string("cosine"), ConfigError);
}

TEST(Metric, Properties) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 2);
  for (int rep = 0; rep < 500; ++rep) {
    const Features a{n(rng), n(rng)}, b{n(rng), n(rng)}, c{n(rng), n(rng)};
    for (auto m : {Metric::kEuclidean, Metric::kSquaredEuclidean, Metric::kManhattan, Metric::kChebyshev}) {
      EXPECT_DOUBLE_EQ(distance(a, a, m), 0.0);
      EXPECT_GE(distance(a, b, m), 0.0);
      EXPECT_DOUBLE_EQ(distance(a, b, m), distance(b, a, m));
      if (m != Metric::kSquaredEuclidean) {
        EXPECT_LE(distance(a, c, m), distance(a, b, m) + distance(b, c, m) + 1e-12);
      }
    }
  }
}

TEST(Metric, SquaredEuclideanRanksLikeEuclidean) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const Features q{n(rng), n(rng)};
    std::vector<Features> pts(30);
    for (auto& p : pts) p = {n(rng), n(rng)};
    std::vector<std::size_t> a(pts.size()), b(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) a[i] = b[i] = i;
    std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) {
      return distance(pts[x], q, Metric::kEuclidean) < distance(pts[y], q, Metric::kEuclidean);
    });
    std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) {
      return distance(pts[x], q, Metric::kSquaredEuclidean) < distance(pts[y], q, Metric::kSquaredEuclidean);
    });
    EXPECT_EQ(a, b);
  }
}

TEST(Knn, ExactMatchAndTrainingAccuracy) {
  const auto data = oft_test::blobs(5);
  for (auto m : {Metric::kEuclidean, Metric::kSquaredEuclidean, Metric::kManhattan, Metric::kChebyshev}) {
    const Model model = knn_train(data, 1, m);
    EXPECT_DOUBLE_EQ(accuracy(model, data), 1.0);
  }
  const auto model = knn_train(data, 1, Metric::kChebyshev);
  EXPECT_EQ(knn_predict(model, data[7].x), data[7].label);
}

TEST(Knn, TieBreaking) {
  // nearest is class 2; classes 0 and 1 tie with two votes each among k = 5
  std::vector<LabelledFrame> d{{"s", 0, {0.0, 0}, 2}, {"s", 1, {1.0, 0}, 0}, {"s", 2, {-1.0, 0}, 1},
                               {"s", 3, {2.0, 0}, 0}, {"s", 4, {-2.0, 0}, 1}, {"s", 5, {9.0, 0}, 2}};
  EXPECT_EQ(knn_predict(knn_train(d, 5, Metric::kEuclidean), {0.1, 0}), 0);
  // k = 2: one vote each, the nearest neighbour's class wins
  EXPECT_EQ(knn_predict(knn_train(d, 2, Metric::kEuclidean), {-0.2, 0}), 2);
  EXPECT_EQ(knn_predict(knn_train(d, 2, Metric::kEuclidean), {-0.8, 0}), 1);
}

TEST(Knn, BadK) {
  const auto data = oft_test::blobs(1, 1, 2);
  EXPECT_THROW(knn_train(data, 0, Metric::kEuclidean), ArgumentError);
  EXPECT_THROW(knn_train(data, 7, Metric::kEuclidean), ArgumentError);
}

TEST(Knn, BlobsHeldOut) {
  const auto data = oft_test::blobs(2024);
  ModelSpec spec;
  spec.k = 5;
  spec.metric = Metric::kEuclidean;
  const auto r = cross_validate(data, PerSubjectHoldout{0.75, 3}, spec);
  EXPECT_GE(r.global_accuracy, 0.90);
  spec.k = 1;
  spec.metric = Metric::kChebyshev;
  const auto r1 = cross_validate(data, PerSubjectHoldout{0.75, 3}, spec);
  EXPECT_GE(r1.global_accuracy, 0.90);
  EXPECT_LE(r1.global_accuracy, 1.0);
}

TEST(Forest, ThresholdDataFitsExactly) {
  std::vector<LabelledFrame> d;
  // class decided by the first feature alone, the second is constant
  for (int i = 0; i < 40; ++i) d.push_back({"s", double(i), {i < 17 ? i * 0.05 : 3.0 + i * 0.05, 1.0}, i < 17 ? 0 : 1});
  const Model m = rf_train(d, 15, 4);
  EXPECT_DOUBLE_EQ(accuracy(m, d), 1.0);
}

TEST(Forest, SingleClassRejected) {
  std::vector<LabelledFrame> d{{"s", 0, {0, 0}, 1}, {"s", 1, {1, 1}, 1}};
  EXPECT_THROW(rf_train(d, 5, 1), DataError);
}

TEST(Forest, DeterministicPerSeed) {
  const auto data = oft_test::blobs(9);
  const auto a = rf_train(data, 23, 77), b = rf_train(data, 23, 77), c = rf_train(data, 23, 78);
  EXPECT_EQ(to_json(Model(a)), to_json(Model(b)));
  EXPECT_NE(to_json(Model(a)), to_json(Model(c)));
  for (const auto& p : probes()) EXPECT_EQ(rf_predict(a, p), rf_predict(b, p));
}

TEST(Forest, TreeOrderDoesNotMatter) {
  const auto data = oft_test::blobs(10);
  auto f = rf_train(data, 23, 5);
  auto g = f;
  std::mt19937_64 rng(1);
  std::shuffle(g.trees.begin(), g.trees.end(), rng);
  for (const auto& p : probes()) EXPECT_EQ(rf_predict(f, p), rf_predict(g, p));
}

TEST(Forest, BlobsHeldOut) {
  const auto data = oft_test::blobs(2024);
  ModelSpec spec;
  spec.kind = ModelKind::kForest;
  spec.trees = 23;
  spec.seed = 11;
  const auto r = cross_validate(data, PerSubjectHoldout{0.75, 3}, spec);
  EXPECT_GE(r.global_accuracy, 0.85);
  const auto again = cross_validate(data, PerSubjectHoldout{0.75, 3}, spec);
  EXPECT_EQ(to_json(r), to_json(again));
}

TEST(CrossValidate, MajorityOnBalancedSet) {
  std::vector<LabelledFrame> d;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 10; ++i) d.push_back({"P" + std::to_string(s), double(i), {double(i), 0}, i % 2});
  ModelSpec spec;
  spec.kind = ModelKind::kMajority;
  const auto r = cross_validate(d, LeaveSubjectsOut{{"P3"}, 0.25}, spec);
  EXPECT_DOUBLE_EQ(r.global_accuracy, 0.5);
  ASSERT_EQ(r.per_class_accuracy.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.per_class_accuracy[0], 1.0);
  EXPECT_DOUBLE_EQ(*r.per_class_accuracy[1], 0.0);
}

TEST(CrossValidate, PerfectClassifier) {
  std::vector<LabelledFrame> d;
  for (int s = 0; s < 5; ++s)
    for (int i = 0; i < 12; ++i) d.push_back({"P" + std::to_string(s), double(i), {10.0 * (i % 3), 0}, i % 3});
  ModelSpec spec;
  const auto r = cross_validate(d, LeaveSubjectsOut{}, spec);
  EXPECT_DOUBLE_EQ(r.global_accuracy, 1.0);
  for (const auto& c : r.per_class_accuracy) EXPECT_DOUBLE_EQ(*c, 1.0);
  for (const auto& s : r.per_subject) EXPECT_DOUBLE_EQ(s.accuracy, 1.0);
  const auto p = cross_validate(d, PerSubjectHoldout{}, spec);
  EXPECT_DOUBLE_EQ(p.global_accuracy, 1.0);
}

TEST(CrossValidate, DefaultLeaveOutShare) {
  std::vector<LabelledFrame> d;
  for (int s = 0; s < 17; ++s)
    for (int i = 0; i < 4; ++i) d.push_back({"P" + std::to_string(10 + s), double(i), {double(i % 2), 0}, i % 2});
  const auto r = cross_validate(d, LeaveSubjectsOut{}, ModelSpec{});
  EXPECT_EQ(r.per_subject.size(), 4u);
  EXPECT_EQ(r.train_size, 13u * 4u);
}

TEST(CrossValidate, EmptyFolds) {
  std::vector<LabelledFrame> d{{"A", 0, {0, 0}, 0}, {"A", 1, {1, 1}, 1}, {"B", 0, {0, 0}, 0}};
  EXPECT_THROW(cross_validate(d, PerSubjectHoldout{0.75, 1}, ModelSpec{}), SplitError);
  EXPECT_THROW(cross_validate(d, LeaveSubjectsOut{{"A", "B"}, 0.0}, ModelSpec{}), SplitError);
  EXPECT_THROW(cross_validate({}, PerSubjectHoldout{}, ModelSpec{}), SplitError);
}

TEST(Binarize, Grouping) {
  EXPECT_EQ(binarize(0), 0);
  EXPECT_EQ(binarize(1), 1);
  EXPECT_EQ(binarize(2), 1);
  const auto b = binarize(oft_test::blobs(1, 1, 3));
  for (const auto& f : b) EXPECT_LE(f.label, 1);
}

TEST(Persistence, RoundTripPreservesPredictions) {
  const auto data = oft_test::blobs(3);
  for (ModelKind kind : {ModelKind::kKnn, ModelKind::kForest, ModelKind::kMajority}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.trees = 9;
    const auto m = train(spec, data);
    const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
    for (const auto& p : probes()) EXPECT_EQ(predict(m, p), predict(back, p));
  }
  EXPECT_THROW(model_from_json(nlohmann::json{{"type", "svm"}}), ConfigError);
}

TEST(Dataset, ParsesLabelSpellings) {
  const auto d = io::parse_dataset("subject,t_s,hrv,pupil_z,td\nA,0,40,0.1,1\nA,1,41,0.2,TD2\nB,0,39,-1,high\n");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].label, 0);
  EXPECT_EQ(d[1].label, 1);
  EXPECT_EQ(d[2].label, 2);
  EXPECT_THROW(io::parse_dataset("subject,t_s,hrv,pupil_z,td\nA,0,40,0.1,7\n"), IngestionError);
}
