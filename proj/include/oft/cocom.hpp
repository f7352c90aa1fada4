#pragma once

// Control-mode coding from dual-tank process traces, plus transition
// matrices between a low- and a high-complexity period.

#include <algorithm>
#include <array>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "oft/error.hpp"

namespace oft::cocom {

// Ordinal order, least to most controlled.
enum class ControlMode { kScrambled = 0, kOpportunistic = 1, kTactical = 2, kStrategic = 3 };

inline constexpr std::array<ControlMode, 4> kModes = {ControlMode::kScrambled, ControlMode::kOpportunistic,
                                                      ControlMode::kTactical, ControlMode::kStrategic};

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::kScrambled: return "Scrambled";
    case ControlMode::kOpportunistic: return "Opportunistic";
    case ControlMode::kTactical: return "Tactical";
    case ControlMode::kStrategic: return "Strategic";
  }
  return "?";
}

inline ControlMode mode_from_string(const std::string& s) {
  for (auto m : kModes)
    if (s == to_string(m)) return m;
  throw DataError("unknown control mode: " + s);
}

struct Bands {
  double compliant_lo = 2000.0;
  double compliant_hi = 3000.0;
  double scrambled_lo = 1950.0;  // min below this is Scrambled
  double scrambled_hi = 3050.0;  // max above this is Scrambled
  double anticipation_lo = 2750.0;  // a max in [2750, 3000] marks Strategic
};

struct TankSample {
  double t_s = 0.0;
  double tank_a = 0.0;
  double tank_b = 0.0;
};

struct TankTrace {
  std::string period;
  std::vector<TankSample> samples;

  void validate() const {
    for (const auto& s : samples) {
      if (s.tank_a < 0.0 || s.tank_b < 0.0) throw DataError("tank levels must be non-negative");
    }
  }
};

struct TankExtent {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double v) {
    min = std::min(min, v);
    max = std::max(max, v);
  }
};

// Predicates in priority order: Scrambled, Opportunistic, Strategic, Tactical.
// The upper error band (3000, 3050] is treated like the lower one.
inline ControlMode code_mode(const TankTrace& trace, const Bands& b = {}) {
  if (trace.samples.empty()) throw DataError("code_mode: empty trace");
  trace.validate();
  std::array<TankExtent, 2> ext;
  for (const auto& s : trace.samples) {
    ext[0].add(s.tank_a);
    ext[1].add(s.tank_b);
  }
  for (const auto& e : ext)
    if (e.min < b.scrambled_lo || e.max > b.scrambled_hi) return ControlMode::kScrambled;
  for (const auto& e : ext)
    if (e.min < b.compliant_lo || e.max > b.compliant_hi) return ControlMode::kOpportunistic;
  for (const auto& e : ext)
    if (e.max >= b.anticipation_lo) return ControlMode::kStrategic;
  return ControlMode::kTactical;
}

struct CodedParticipant {
  std::string participant;
  ControlMode low = ControlMode::kTactical;
  ControlMode high = ControlMode::kTactical;
};

struct TransitionMatrix {
  // counts[from][to], from = low-complexity mode, to = high-complexity mode
  std::array<std::array<int, 4>, 4> counts{};
  double adjacency_fraction = 1.0;  // over mode changes only; 1.0 when nobody changed

  std::array<int, 4> row_sums() const {
    std::array<int, 4> r{};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) r[i] += counts[i][j];
    return r;
  }

  std::array<int, 4> col_sums() const {
    std::array<int, 4> c{};
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) c[j] += counts[i][j];
    return c;
  }
};

inline TransitionMatrix transitions(const std::vector<CodedParticipant>& coded) {
  TransitionMatrix m;
  int changes = 0, adjacent = 0;
  for (const auto& p : coded) {
    const auto i = static_cast<int>(p.low), j = static_cast<int>(p.high);
    ++m.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (i != j) {
      ++changes;
      if (std::abs(i - j) == 1) ++adjacent;
    }
  }
  if (changes > 0) m.adjacency_fraction = static_cast<double>(adjacent) / changes;
  return m;
}

// ---- CSV ----------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

inline double to_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

// Reads `t_s,tank_a,tank_b,period`; one trace per period, in order of appearance.
inline std::vector<TankTrace> read_traces(std::istream& in) {
  std::vector<TankTrace> traces;
  std::map<std::string, std::size_t> index;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (n == 1 && !cells.empty() && cells[0] == "t_s") continue;
    if (cells.size() != 4) throw DataError("trace line " + std::to_string(n) + ": expected 4 columns");
    auto [it, fresh] = index.emplace(cells[3], traces.size());
    if (fresh) traces.push_back({cells[3], {}});
    traces[it->second].samples.push_back(
        {detail::to_double(cells[0], n), detail::to_double(cells[1], n), detail::to_double(cells[2], n)});
  }
  for (const auto& t : traces) t.validate();
  return traces;
}

// Reads `participant,mode_low,mode_high`.
inline std::vector<CodedParticipant> read_roster(std::istream& in) {
  std::vector<CodedParticipant> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (n == 1 && !cells.empty() && cells[0] == "participant") continue;
    if (cells.size() != 3) throw DataError("roster line " + std::to_string(n) + ": expected 3 columns");
    out.push_back({cells[0], mode_from_string(cells[1]), mode_from_string(cells[2])});
  }
  return out;
}

inline void write_coded(std::ostream& out, const std::vector<std::pair<std::string, ControlMode>>& coded) {
  out << "period,mode\n";
  for (const auto& [period, mode] : coded) out << period << ',' << to_string(mode) << '\n';
}

}  // namespace oft::cocom
