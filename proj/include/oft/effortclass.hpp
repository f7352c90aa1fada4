#pragma once

// Supervised classification of mental effort from per-second (SDNN, pupil-z)
// features: k-nearest neighbours, a Gini random forest, and hold-out
// cross-validation schemes (per-subject split, leave-subjects-out).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"

namespace oft::effortclass {

inline constexpr std::size_t kFeatures = 2;  // (hrv_sdnn, pupil_z)
using Features = std::array<double, kFeatures>;

struct LabelledFrame {
  std::string subject;
  double t_s = 0.0;
  Features x{};
  int label = 0;  // 0-based class index
};

// TD1 -> low (0); TD2 and TD3 -> high (1).
inline int binarize(int td_class) { return td_class == 0 ? 0 : 1; }

inline std::vector<LabelledFrame> binarize(std::vector<LabelledFrame> frames) {
  for (auto& f : frames) f.label = binarize(f.label);
  return frames;
}

enum class Metric { kEuclidean, kSquaredEuclidean, kManhattan, kChebyshev };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::kEuclidean: return "euclidean";
    case Metric::kSquaredEuclidean: return "squared-euclidean";
    case Metric::kManhattan: return "manhattan";
    case Metric::kChebyshev: return "chebyshev";
  }
  return "?";
}

inline Metric metric_from_string(const std::string& s) {
  for (auto m : {Metric::kEuclidean, Metric::kSquaredEuclidean, Metric::kManhattan, Metric::kChebyshev})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown distance metric: " + s);
}

inline double distance(const Features& a, const Features& b, Metric m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kFeatures; ++i) {
    const double d = std::abs(a[i] - b[i]);
    switch (m) {
      case Metric::kEuclidean:
      case Metric::kSquaredEuclidean: acc += d * d; break;
      case Metric::kManhattan: acc += d; break;
      case Metric::kChebyshev: acc = std::max(acc, d); break;
    }
  }
  return m == Metric::kEuclidean ? std::sqrt(acc) : acc;
}

inline int count_classes(std::span<const LabelledFrame> data) {
  int n = 0;
  for (const auto& f : data) n = std::max(n, f.label + 1);
  return n;
}

// Most frequent label; ties resolve to the lowest label.
inline int majority_label(std::span<const int> counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

struct KnnModel {
  std::vector<LabelledFrame> frames;
  int k = 1;
  Metric metric = Metric::kEuclidean;
};

inline KnnModel knn_train(std::vector<LabelledFrame> frames, int k, Metric metric) {
  if (frames.empty()) throw DataError("knn: empty training set");
  if (k < 1 || static_cast<std::size_t>(k) > frames.size()) {
    throw ArgumentError("knn: k must be in [1, training size]");
  }
  return {std::move(frames), k, metric};
}

// Majority among the k nearest (distance, then training order). Tied classes
// resolve to the class of the single nearest neighbour when it is among them,
// otherwise to the lowest label.
inline int knn_predict(const KnnModel& model, const Features& x) {
  if (model.frames.empty()) throw DataError("knn: empty model");
  std::vector<std::pair<double, std::size_t>> d(model.frames.size());
  for (std::size_t i = 0; i < model.frames.size(); ++i) d[i] = {distance(model.frames[i].x, x, model.metric), i};
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.k), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<int> counts(static_cast<std::size_t>(count_classes(model.frames)), 0);
  for (std::size_t i = 0; i < k; ++i) ++counts[static_cast<std::size_t>(model.frames[d[i].second].label)];
  const int top = *std::max_element(counts.begin(), counts.end());
  const int nearest = model.frames[d[0].second].label;
  if (counts[static_cast<std::size_t>(nearest)] == top) return nearest;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == top) return static_cast<int>(c);
  return nearest;
}

// ---- random forest ----------------------------------------------------------

struct TreeParams {
  int max_depth = 0;  // 0: unlimited
  int min_leaf = 1;
  int max_features = 0;  // 0: floor(sqrt(d)), at least 1
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(const Features& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::uint64_t seed = 0;
  TreeParams params;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double gini(std::span<const int> counts, int total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    s += p * p;
  }
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const LabelledFrame> data, int n_classes, const TreeParams& params, std::mt19937_64& rng)
      : data_(data), n_classes_(n_classes), params_(params), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> sample) {
    DecisionTree tree;
    grow(tree, std::move(sample), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  std::vector<int> counts_of(std::span<const std::size_t> idx) const {
    std::vector<int> c(static_cast<std::size_t>(n_classes_), 0);
    for (auto i : idx) ++c[static_cast<std::size_t>(data_[i].label)];
    return c;
  }

  void best_split_on(int f, std::vector<std::size_t>& idx, Split& best) const {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double va = data_[a].x[static_cast<std::size_t>(f)], vb = data_[b].x[static_cast<std::size_t>(f)];
      return va < vb || (va == vb && a < b);
    });
    const int n = static_cast<int>(idx.size());
    std::vector<int> left(static_cast<std::size_t>(n_classes_), 0);
    std::vector<int> right = counts_of(idx);
    for (int i = 0; i + 1 < n; ++i) {
      const auto lab = static_cast<std::size_t>(data_[idx[static_cast<std::size_t>(i)]].label);
      ++left[lab];
      --right[lab];
      const double v = data_[idx[static_cast<std::size_t>(i)]].x[static_cast<std::size_t>(f)];
      const double vn = data_[idx[static_cast<std::size_t>(i) + 1]].x[static_cast<std::size_t>(f)];
      if (v == vn) continue;
      const int nl = i + 1, nr = n - nl;
      if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
      const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
      if (imp < best.impurity) best = {f, v + (vn - v) / 2.0, imp};
    }
  }

  int grow(DecisionTree& tree, std::vector<std::size_t> idx, int depth) {
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    const auto counts = counts_of(idx);
    tree.nodes[static_cast<std::size_t>(node)].label = majority_label(counts);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    const bool depth_cap = params_.max_depth > 0 && depth >= params_.max_depth;
    if (pure || depth_cap || static_cast<int>(idx.size()) < 2 * params_.min_leaf) return node;

    std::array<int, kFeatures> order{};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    const int mtry = params_.max_features > 0
                         ? std::min<int>(params_.max_features, kFeatures)
                         : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(kFeatures)))));
    Split best;
    for (int i = 0; i < static_cast<int>(kFeatures); ++i) {
      if (i >= mtry && best.feature >= 0) break;  // widen the search only when no valid split was found
      best_split_on(order[static_cast<std::size_t>(i)], idx, best);
    }
    if (best.feature < 0) return node;

    std::vector<std::size_t> l, r;
    for (auto i : idx) (data_[i].x[static_cast<std::size_t>(best.feature)] <= best.threshold ? l : r).push_back(i);
    tree.nodes[static_cast<std::size_t>(node)].feature = best.feature;
    tree.nodes[static_cast<std::size_t>(node)].threshold = best.threshold;
    const int li = grow(tree, std::move(l), depth + 1);
    tree.nodes[static_cast<std::size_t>(node)].left = li;
    const int ri = grow(tree, std::move(r), depth + 1);
    tree.nodes[static_cast<std::size_t>(node)].right = ri;
    return node;
  }

  std::span<const LabelledFrame> data_;
  int n_classes_;
  TreeParams params_;
  std::mt19937_64& rng_;
};

}  // namespace detail

// Each tree is grown on its own bootstrap sample with randomness derived from
// (seed, tree index) only, so the result is independent of build order.
inline ForestModel rf_train(std::span<const LabelledFrame> data, int trees, std::uint64_t seed,
                            const TreeParams& params = {}) {
  if (trees < 1) throw ArgumentError("rf_train: tree count must be at least 1");
  if (params.min_leaf < 1) throw ArgumentError("rf_train: min_leaf must be at least 1");
  std::set<int> labels;
  for (const auto& f : data) labels.insert(f.label);
  if (labels.size() < 2) throw DataError("rf_train: degenerate data, at least 2 classes are required");

  ForestModel model;
  model.n_classes = count_classes(data);
  model.seed = seed;
  model.params = params;
  model.trees.reserve(static_cast<std::size_t>(trees));
  for (int t = 0; t < trees; ++t) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(t))));
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::vector<std::size_t> sample(data.size());
    for (auto& s : sample) s = pick(rng);
    detail::TreeBuilder builder(data, model.n_classes, params, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

inline int rf_predict(const ForestModel& model, const Features& x) {
  std::vector<int> votes(static_cast<std::size_t>(model.n_classes), 0);
  for (const auto& t : model.trees) ++votes[static_cast<std::size_t>(t.predict(x))];
  return majority_label(votes);
}

// ---- model specs and cross-validation ---------------------------------------

enum class ModelKind { kKnn, kForest, kMajority };

struct ModelSpec {
  ModelKind kind = ModelKind::kKnn;
  int k = 1;
  Metric metric = Metric::kChebyshev;
  int trees = 68;
  std::uint64_t seed = 1;
  TreeParams tree;
};

struct MajorityModel {
  int label = 0;
};

using Model = std::variant<KnnModel, ForestModel, MajorityModel>;

inline Model train(const ModelSpec& spec, std::span<const LabelledFrame> data) {
  switch (spec.kind) {
    case ModelKind::kKnn:
      return knn_train(std::vector<LabelledFrame>(data.begin(), data.end()), spec.k, spec.metric);
    case ModelKind::kForest: return rf_train(data, spec.trees, spec.seed, spec.tree);
    case ModelKind::kMajority: {
      if (data.empty()) throw DataError("majority: empty training set");
      std::vector<int> counts(static_cast<std::size_t>(count_classes(data)), 0);
      for (const auto& f : data) ++counts[static_cast<std::size_t>(f.label)];
      return MajorityModel{majority_label(counts)};
    }
  }
  throw ArgumentError("unknown model kind");
}

inline int predict(const Model& model, const Features& x) {
  struct Visitor {
    const Features& x;
    int operator()(const KnnModel& m) const { return knn_predict(m, x); }
    int operator()(const ForestModel& m) const { return rf_predict(m, x); }
    int operator()(const MajorityModel& m) const { return m.label; }
  };
  return std::visit(Visitor{x}, model);
}

inline double accuracy(const Model& model, std::span<const LabelledFrame> data) {
  if (data.empty()) throw SplitError("accuracy: empty evaluation set");
  std::size_t ok = 0;
  for (const auto& f : data) ok += predict(model, f.x) == f.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

struct PerSubjectHoldout {
  double train_fraction = 0.75;
  std::uint64_t seed = 1;
};

struct LeaveSubjectsOut {
  std::vector<std::string> test_subjects;  // empty: last ceil(fraction * S) subjects in sorted order
  double test_fraction = 4.0 / 17.0;
};

using CvScheme = std::variant<PerSubjectHoldout, LeaveSubjectsOut>;

struct SubjectAccuracy {
  std::string subject;
  double accuracy = 0.0;
  std::size_t test_size = 0;
};

struct CvReport {
  double global_accuracy = 0.0;
  std::vector<std::optional<double>> per_class_accuracy;  // empty when a class is absent from the test set
  std::vector<SubjectAccuracy> per_subject;
  std::string split;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

namespace detail {

struct Tally {
  std::vector<int> hit, total;

  void add(int truth, int predicted) {
    const auto need = static_cast<std::size_t>(std::max(truth, predicted) + 1);
    if (hit.size() < need) {
      hit.resize(need, 0);
      total.resize(need, 0);
    }
    ++total[static_cast<std::size_t>(truth)];
    if (truth == predicted) ++hit[static_cast<std::size_t>(truth)];
  }

  void fill(CvReport& r, int n_classes) const {
    int h = 0, t = 0;
    r.per_class_accuracy.assign(static_cast<std::size_t>(n_classes), std::nullopt);
    for (std::size_t c = 0; c < total.size(); ++c) {
      h += hit[c];
      t += total[c];
      if (total[c] > 0 && c < r.per_class_accuracy.size()) r.per_class_accuracy[c] = static_cast<double>(hit[c]) / total[c];
    }
    r.global_accuracy = t ? static_cast<double>(h) / t : 0.0;
    r.test_size = static_cast<std::size_t>(t);
  }
};

}  // namespace detail

inline CvReport cross_validate(std::span<const LabelledFrame> data, const CvScheme& scheme, const ModelSpec& spec) {
  if (data.empty()) throw SplitError("cross_validate: empty dataset");
  const int n_classes = count_classes(data);
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < data.size(); ++i) by_subject[data[i].subject].push_back(i);

  CvReport report;
  detail::Tally tally;
  auto gather = [&](std::span<const std::size_t> idx) {
    std::vector<LabelledFrame> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(data[i]);
    return out;
  };

  if (const auto* ps = std::get_if<PerSubjectHoldout>(&scheme)) {
    if (!(ps->train_fraction > 0.0 && ps->train_fraction < 1.0)) {
      throw ArgumentError("cross_validate: train fraction must be in (0, 1)");
    }
    report.split = "per-subject " + std::to_string(static_cast<int>(std::lround(ps->train_fraction * 100))) + "/" +
                   std::to_string(static_cast<int>(std::lround((1.0 - ps->train_fraction) * 100)));
    std::uint64_t subject_index = 0;
    for (const auto& [subject, idx0] : by_subject) {
      auto idx = idx0;
      std::mt19937_64 rng(detail::splitmix64(ps->seed + subject_index++));
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto n_train = static_cast<std::size_t>(std::floor(ps->train_fraction * static_cast<double>(idx.size())));
      if (n_train == 0 || n_train == idx.size()) throw SplitError("cross_validate: empty fold for subject " + subject);
      const auto train_set = gather(std::span(idx).first(n_train));
      const auto test_set = gather(std::span(idx).subspan(n_train));
      const auto model = train(spec, train_set);
      std::size_t ok = 0;
      for (const auto& f : test_set) {
        const int p = predict(model, f.x);
        tally.add(f.label, p);
        ok += p == f.label ? 1 : 0;
      }
      report.per_subject.push_back({subject, static_cast<double>(ok) / static_cast<double>(test_set.size()), test_set.size()});
      report.train_size += train_set.size();
    }
  } else {
    const auto& lso = std::get<LeaveSubjectsOut>(scheme);
    std::set<std::string> test;
    if (!lso.test_subjects.empty()) {
      test.insert(lso.test_subjects.begin(), lso.test_subjects.end());
    } else {
      const auto n = static_cast<std::size_t>(std::ceil(lso.test_fraction * static_cast<double>(by_subject.size()) - 1e-9));
      auto it = by_subject.rbegin();
      for (std::size_t i = 0; i < n && it != by_subject.rend(); ++i, ++it) test.insert(it->first);
    }
    std::vector<std::size_t> tr, te;
    for (const auto& [subject, idx] : by_subject) (test.count(subject) ? te : tr).insert((test.count(subject) ? te : tr).end(), idx.begin(), idx.end());
    if (tr.empty() || te.empty()) throw SplitError("cross_validate: leave-subjects-out produced an empty fold");
    report.split = "leave-subjects-out (" + std::to_string(by_subject.size() - test.size()) + " train / " +
                   std::to_string(test.size()) + " test subjects)";
    const auto train_set = gather(tr);
    const auto model = train(spec, train_set);
    report.train_size = train_set.size();
    std::map<std::string, std::pair<std::size_t, std::size_t>> subj;
    for (auto i : te) {
      const int p = predict(model, data[i].x);
      tally.add(data[i].label, p);
      auto& s = subj[data[i].subject];
      s.first += p == data[i].label ? 1 : 0;
      ++s.second;
    }
    for (const auto& [name, s] : subj) {
      report.per_subject.push_back({name, static_cast<double>(s.first) / static_cast<double>(s.second), s.second});
    }
  }
  tally.fill(report, n_classes);
  return report;
}

// ---- persistence ------------------------------------------------------------

inline nlohmann::json to_json(const Model& model) {
  nlohmann::json j;
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    j["type"] = "knn";
    j["k"] = knn->k;
    j["metric"] = to_string(knn->metric);
    j["frames"] = nlohmann::json::array();
    for (const auto& f : knn->frames) j["frames"].push_back({{"subject", f.subject}, {"t_s", f.t_s}, {"x", f.x}, {"label", f.label}});
  } else if (const auto* rf = std::get_if<ForestModel>(&model)) {
    j["type"] = "rf";
    j["n_classes"] = rf->n_classes;
    j["seed"] = rf->seed;
    j["params"] = {{"max_depth", rf->params.max_depth}, {"min_leaf", rf->params.min_leaf}, {"max_features", rf->params.max_features}};
    j["trees"] = nlohmann::json::array();
    for (const auto& t : rf->trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
      j["trees"].push_back(nodes);
    }
  } else {
    j["type"] = "majority";
    j["label"] = std::get<MajorityModel>(model).label;
  }
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "knn") {
      KnnModel m;
      m.k = j.at("k").get<int>();
      m.metric = metric_from_string(j.at("metric").get<std::string>());
      for (const auto& jf : j.at("frames")) {
        m.frames.push_back({jf.at("subject").get<std::string>(), jf.at("t_s").get<double>(), jf.at("x").get<Features>(),
                            jf.at("label").get<int>()});
      }
      return knn_train(std::move(m.frames), m.k, m.metric);
    }
    if (type == "rf") {
      ForestModel m;
      m.n_classes = j.at("n_classes").get<int>();
      m.seed = j.at("seed").get<std::uint64_t>();
      const auto& p = j.at("params");
      m.params = {p.at("max_depth").get<int>(), p.at("min_leaf").get<int>(), p.at("max_features").get<int>()};
      for (const auto& jt : j.at("trees")) {
        DecisionTree t;
        for (const auto& jn : jt) {
          t.nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(), jn.at(3).get<int>(), jn.at(4).get<int>()});
        }
        const auto n = static_cast<int>(t.nodes.size());
        for (const auto& node : t.nodes) {
          if (node.feature >= static_cast<int>(kFeatures) || (node.feature >= 0 && (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n))) {
            throw ConfigError("forest model: malformed tree");
          }
        }
        if (t.nodes.empty()) throw ConfigError("forest model: empty tree");
        m.trees.push_back(std::move(t));
      }
      if (m.trees.empty()) throw ConfigError("forest model: no trees");
      return m;
    }
    if (type == "majority") return MajorityModel{j.at("label").get<int>()};
    throw ConfigError("unknown model type: " + type);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

inline nlohmann::json to_json(const CvReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& a : r.per_class_accuracy) per_class.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : r.per_subject) subjects.push_back({{"subject", s.subject}, {"accuracy", s.accuracy}, {"test_size", s.test_size}});
  return {{"global_accuracy", r.global_accuracy},
          {"per_class_accuracy", per_class},
          {"per_subject", subjects},
          {"split", r.split},
          {"train_size", r.train_size},
          {"test_size", r.test_size}};
}

}  // namespace oft::effortclass
