#pragma once

// Fuzzy discretization of continuous indicators and exact inference in a
// naive-fusion Bayesian network: a 5-level MWL root with one conditional
// table per child indicator. Fuzzy memberships enter as virtual evidence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/error.hpp"

namespace oft::fusion {

inline constexpr int kLevels = 5;
using Distribution = std::array<double, kLevels>;

struct SoftEvidence {
  std::string variable;
  std::vector<double> likelihood;
  bool clamped = false;  // input fell outside the partition's domain
};

// Trapezoidal partition of unity over one continuous variable. With L labels
// the 2(L-1) breakpoints b0 <= b1 <= ... delimit the ramps: label i is fully
// on over [b(2i-1), b(2i)] and ramps linearly to its neighbours in between.
class FuzzyPartition {
 public:
  FuzzyPartition(std::string variable, std::vector<std::string> labels, std::vector<double> breakpoints,
                 double domain_min, double domain_max)
      : variable_(std::move(variable)),
        labels_(std::move(labels)),
        breaks_(std::move(breakpoints)),
        lo_(domain_min),
        hi_(domain_max) {
    if (labels_.size() < 2) throw ConfigError("fuzzy partition " + variable_ + ": needs at least 2 labels");
    if (breaks_.size() != 2 * (labels_.size() - 1)) {
      throw ConfigError("fuzzy partition " + variable_ + ": expected 2(L-1) breakpoints");
    }
    for (std::size_t i = 1; i < breaks_.size(); ++i) {
      if (breaks_[i] < breaks_[i - 1]) throw ConfigError("fuzzy partition " + variable_ + ": breakpoints not monotone");
    }
    for (std::size_t i = 0; i + 1 < breaks_.size(); i += 2) {
      if (!(breaks_[i] < breaks_[i + 1])) {
        throw ConfigError("fuzzy partition " + variable_ + ": empty ramp between breakpoints");
      }
    }
    if (!(lo_ <= breaks_.front() && breaks_.back() <= hi_)) {
      throw ConfigError("fuzzy partition " + variable_ + ": breakpoints outside the domain");
    }
  }

  const std::string& variable() const { return variable_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  double domain_min() const { return lo_; }
  double domain_max() const { return hi_; }

  std::vector<double> memberships(double x) const {
    x = std::clamp(x, lo_, hi_);
    std::vector<double> mu(labels_.size(), 0.0);
    for (std::size_t r = 0; r + 1 < labels_.size(); ++r) {
      const double a = breaks_[2 * r];
      const double b = breaks_[2 * r + 1];
      if (x <= a) {
        mu[r] = 1.0;
        return mu;
      }
      if (x < b) {
        const double up = (x - a) / (b - a);
        mu[r + 1] = up;
        mu[r] = 1.0 - up;
        return mu;
      }
    }
    mu.back() = 1.0;
    return mu;
  }

 private:
  std::string variable_;
  std::vector<std::string> labels_;
  std::vector<double> breaks_;
  double lo_, hi_;
};

inline SoftEvidence fuzzify(double x, const FuzzyPartition& p) {
  SoftEvidence e{p.variable(), p.memberships(x), x < p.domain_min() || x > p.domain_max()};
  return e;
}

inline SoftEvidence hard_evidence(const std::string& variable, std::size_t label, std::size_t n_labels) {
  SoftEvidence e{variable, std::vector<double>(n_labels, 0.0), false};
  e.likelihood.at(label) = 1.0;
  return e;
}

struct ChildVariable {
  std::string name;
  std::vector<std::string> labels;
  std::array<std::vector<double>, kLevels> cpt;  // cpt[k][label] = P(label | MWL = k+1)
};

struct MwlNetwork {
  Distribution prior{0.2, 0.2, 0.2, 0.2, 0.2};
  std::vector<ChildVariable> children;

  void validate() const {
    double s = 0.0;
    for (double p : prior) {
      if (p < 0.0) throw ConfigError("MWL prior has a negative entry");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("MWL prior does not sum to 1");
    for (const auto& c : children) {
      for (int k = 0; k < kLevels; ++k) {
        const auto& row = c.cpt[static_cast<std::size_t>(k)];
        if (row.size() != c.labels.size()) throw ConfigError("CPT row size mismatch for " + c.name);
        double rs = 0.0;
        for (double p : row) {
          if (p < 0.0) throw ConfigError("negative CPT entry for " + c.name);
          rs += p;
        }
        if (std::abs(rs - 1.0) > 1e-9) {
          throw ConfigError("CPT row " + std::to_string(k + 1) + " of " + c.name + " does not sum to 1");
        }
      }
    }
  }

  std::ptrdiff_t find(const std::string& name) const {
    for (std::size_t i = 0; i < children.size(); ++i)
      if (children[i].name == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
};

// P(MWL = k | e) proportional to prior(k) * prod_c sum_l lik_c(l) P(l | k).
// Evidence is applied in network declaration order, so the result does not
// depend on the order of `evidence`.
inline Distribution posterior(const MwlNetwork& net, std::span<const SoftEvidence> evidence) {
  std::vector<const SoftEvidence*> by_child(net.children.size(), nullptr);
  for (const auto& e : evidence) {
    const auto idx = net.find(e.variable);
    if (idx < 0) throw ArgumentError("evidence on unknown variable: " + e.variable);
    auto& slot = by_child[static_cast<std::size_t>(idx)];
    if (slot) throw ArgumentError("more than one evidence for variable: " + e.variable);
    const auto& child = net.children[static_cast<std::size_t>(idx)];
    if (e.likelihood.size() != child.labels.size()) {
      throw ArgumentError("evidence for " + e.variable + " has the wrong number of labels");
    }
    bool any = false;
    for (double l : e.likelihood) {
      if (l < 0.0 || !std::isfinite(l)) throw ArgumentError("evidence for " + e.variable + " has an invalid entry");
      any = any || l > 0.0;
    }
    if (!any) throw ArgumentError("evidence for " + e.variable + " is all zero");
    slot = &e;
  }

  Distribution post = net.prior;
  for (std::size_t c = 0; c < net.children.size(); ++c) {
    if (!by_child[c]) continue;
    const auto& lik = by_child[c]->likelihood;
    const auto& child = net.children[c];
    for (int k = 0; k < kLevels; ++k) {
      double m = 0.0;
      const auto& row = child.cpt[static_cast<std::size_t>(k)];
      for (std::size_t l = 0; l < lik.size(); ++l) m += lik[l] * row[l];
      post[static_cast<std::size_t>(k)] *= m;
    }
  }
  double z = 0.0;
  for (double p : post) z += p;
  if (!(z > 0.0)) throw InconsistentEvidenceError("evidence has zero joint probability under the network");
  for (double& p : post) p /= z;
  return post;
}

inline constexpr double kTieTolerance = 1e-12;

// Argmax in 1..5; ties resolve to the higher level.
inline int mwl_level(const Distribution& post) {
  int best = 0;
  for (int k = 1; k < kLevels; ++k) {
    if (post[static_cast<std::size_t>(k)] >= post[static_cast<std::size_t>(best)] - kTieTolerance) best = k;
  }
  return best + 1;
}

struct MwlState {
  int t = 0;
  Distribution posterior{};
  int level = 1;
  std::map<std::string, std::vector<double>> indicators;  // normalized evidence per child
};

// ---- defaults and JSON -----------------------------------------------------

struct BehaviourEncoding {
  int window_s = 30;
  // Weight of each regulation kind when turning recent events into evidence
  // over {none, performance-oriented, cost-oriented}.
  std::map<std::string, double> weights{
      {"PBR", 1.0}, {"CBR", 1.0}, {"PerformanceOrientedOther", 1.0}, {"PRBR", 1.0}, {"COBR", 0.0}};
};

struct FusionConfig {
  MwlNetwork network;
  std::vector<FuzzyPartition> partitions;
  BehaviourEncoding behaviour;

  const FuzzyPartition& partition(const std::string& variable) const {
    for (const auto& p : partitions)
      if (p.variable() == variable) return p;
    throw ConfigError("no fuzzy partition for variable " + variable);
  }
};

inline std::array<std::vector<double>, kLevels> ordinal_cpt_strong() {
  return {{{0.80, 0.15, 0.05}, {0.60, 0.30, 0.10}, {0.25, 0.50, 0.25}, {0.10, 0.30, 0.60}, {0.05, 0.15, 0.80}}};
}

inline std::array<std::vector<double>, kLevels> ordinal_cpt_weak() {
  return {{{0.70, 0.20, 0.10}, {0.55, 0.30, 0.15}, {0.35, 0.40, 0.25}, {0.20, 0.40, 0.40}, {0.10, 0.35, 0.55}}};
}

inline FusionConfig default_fusion_config() {
  FusionConfig cfg;
  cfg.network.children = {
      {"constraint", {"low", "medium", "high"}, ordinal_cpt_strong()},
      {"behaviour", {"none", "performance-oriented", "cost-oriented"}, ordinal_cpt_weak()},
      {"performance", {"good", "medium", "poor"}, ordinal_cpt_strong()},
      {"effort", {"low", "medium", "high"}, ordinal_cpt_strong()},
  };
  cfg.partitions = {
      FuzzyPartition("performance", {"good", "medium", "poor"}, {0.15, 0.30, 0.45, 0.60}, 0.0, 1.0),
      FuzzyPartition("effort", {"low", "medium", "high"}, {-0.5, 0.25, 0.75, 1.5}, -10.0, 10.0),
  };
  cfg.network.validate();
  return cfg;
}

inline nlohmann::json to_json(const FusionConfig& cfg) {
  nlohmann::json j;
  j["prior"] = cfg.network.prior;
  j["children"] = nlohmann::json::array();
  for (const auto& c : cfg.network.children) {
    j["children"].push_back({{"name", c.name}, {"labels", c.labels}, {"cpt", c.cpt}});
  }
  j["partitions"] = nlohmann::json::array();
  for (const auto& p : cfg.partitions) {
    j["partitions"].push_back({{"variable", p.variable()},
                               {"labels", p.labels()},
                               {"breakpoints", p.breakpoints()},
                               {"domain", {p.domain_min(), p.domain_max()}}});
  }
  j["behaviour"] = {{"window_s", cfg.behaviour.window_s}, {"weights", cfg.behaviour.weights}};
  return j;
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j) {
  FusionConfig cfg;
  try {
    const auto prior = j.at("prior").get<std::vector<double>>();
    if (prior.size() != kLevels) throw ConfigError("MWL prior must have 5 entries");
    std::copy(prior.begin(), prior.end(), cfg.network.prior.begin());
    for (const auto& jc : j.at("children")) {
      ChildVariable c;
      c.name = jc.at("name").get<std::string>();
      c.labels = jc.at("labels").get<std::vector<std::string>>();
      const auto rows = jc.at("cpt").get<std::vector<std::vector<double>>>();
      if (rows.size() != kLevels) throw ConfigError("CPT of " + c.name + " must have 5 rows");
      std::copy(rows.begin(), rows.end(), c.cpt.begin());
      cfg.network.children.push_back(std::move(c));
    }
    for (const auto& jp : j.at("partitions")) {
      const auto dom = jp.at("domain").get<std::vector<double>>();
      if (dom.size() != 2) throw ConfigError("partition domain must be [min, max]");
      cfg.partitions.emplace_back(jp.at("variable").get<std::string>(),
                                  jp.at("labels").get<std::vector<std::string>>(),
                                  jp.at("breakpoints").get<std::vector<double>>(), dom[0], dom[1]);
    }
    if (j.contains("behaviour")) {
      const auto& jb = j.at("behaviour");
      cfg.behaviour.window_s = jb.value("window_s", cfg.behaviour.window_s);
      if (jb.contains("weights")) cfg.behaviour.weights = jb.at("weights").get<std::map<std::string, double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fusion config: ") + e.what());
  }
  cfg.network.validate();
  if (cfg.behaviour.window_s < 1) throw ConfigError("behaviour window must be at least 1 s");
  return cfg;
}

inline nlohmann::json to_json(const MwlState& s) {
  return {{"t", s.t}, {"level", s.level}, {"posterior", s.posterior}, {"indicators", s.indicators}};
}

}  // namespace oft::fusion
