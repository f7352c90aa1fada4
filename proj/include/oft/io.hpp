#pragma once

// Stream plumbing shared by the tools: CSV / JSON-lines readers and
// writers, the run manifest, and a stable config hash.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oft/effortclass.hpp"
#include "oft/error.hpp"
#include "oft/physio.hpp"

namespace oft::io {

inline constexpr const char* kVersion = "0.1.0";

inline std::string read_text(const std::filesystem::path& p, const std::string& stream = "") {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    const auto what = (stream.empty() ? std::string("file") : stream + " stream") + " not found: " + p.string();
    throw IngestionError(what);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

inline std::vector<nlohmann::json> parse_jsonl(const std::string& text, const std::string& stream) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception&) {
      throw IngestionError(stream + " stream, line " + std::to_string(n) + ": malformed JSON");
    }
  }
  return out;
}

inline std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

// Rows of a headered CSV; the header must match `expected` exactly.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::vector<std::string>& expected,
                                                       const std::string& stream) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (header) {
      header = false;
      if (cells != expected) {
        std::string want;
        for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + expected[i];
        throw IngestionError(stream + " stream: expected header '" + want + "'");
      }
      continue;
    }
    if (cells.size() != expected.size()) {
      throw IngestionError(stream + " stream, line " + std::to_string(n) + ": expected " +
                           std::to_string(expected.size()) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_double(const std::string& s, const std::string& stream) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw IngestionError(stream + " stream: not a number: '" + s + "'");
}

// `t_s,rr_ms`
inline physio::RRSeries parse_beats(const std::string& text) {
  physio::RRSeries rr;
  for (const auto& row : parse_csv(text, {"t_s", "rr_ms"}, "beats")) {
    rr.timestamps_s.push_back(parse_double(row[0], "beats"));
    rr.intervals_ms.push_back(parse_double(row[1], "beats"));
  }
  try {
    rr.validate();
  } catch (const DataError& e) {
    throw IngestionError(std::string("beats stream: ") + e.what());
  }
  return rr;
}

// `t_s,pupil_mm,valid`
inline physio::PupilSeries parse_pupil(const std::string& text) {
  physio::PupilSeries out;
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& row : parse_csv(text, {"t_s", "pupil_mm", "valid"}, "pupil")) {
    physio::PupilSample s;
    s.t_s = parse_double(row[0], "pupil");
    s.diameter_mm = parse_double(row[1], "pupil");
    s.valid = row[2] == "1" || row[2] == "true";
    if (s.t_s < last) throw IngestionError("pupil stream: timestamps must be nondecreasing");
    last = s.t_s;
    out.push_back(s);
  }
  return out;
}

inline std::string fmt(double v, int precision = 6) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline std::string beats_csv(const physio::RRSeries& rr) {
  std::string s = "t_s,rr_ms\n";
  for (std::size_t i = 0; i < rr.intervals_ms.size(); ++i) s += fmt(rr.timestamps_s[i], 17) + "," + fmt(rr.intervals_ms[i], 17) + "\n";
  return s;
}

inline std::string pupil_csv(const physio::PupilSeries& p) {
  std::string s = "t_s,pupil_mm,valid\n";
  for (const auto& x : p) s += fmt(x.t_s, 17) + "," + fmt(x.diameter_mm, 17) + "," + (x.valid ? "1" : "0") + "\n";
  return s;
}

inline std::string frames_csv(const physio::FeatureSet& fs) {
  std::string s = "t_s,hrv_sdnn_ms,pupil_z\n";
  for (const auto& f : fs.frames) s += std::to_string(f.t_s) + "," + fmt(f.hrv_sdnn_ms, 9) + "," + fmt(f.pupil_z, 9) + "\n";
  return s;
}

inline nlohmann::json nan_to_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline std::string frames_jsonl(const physio::FeatureSet& fs) {
  std::string s;
  for (const auto& f : fs.frames) {
    nlohmann::json j{{"t_s", f.t_s}, {"hrv_sdnn_ms", nan_to_null(f.hrv_sdnn_ms)}, {"pupil_z", nan_to_null(f.pupil_z)}, {"hrv_warmup", f.hrv_warmup}};
    s += j.dump() + "\n";
  }
  return s;
}

inline nlohmann::json to_json(const physio::FeatureMetadata& m) {
  return {{"pupil_normalization", m.pupil_normalization},
          {"baseline_begin_s", m.baseline_begin_s},
          {"baseline_end_s", std::isinf(m.baseline_end_s) ? nlohmann::json("session_end") : nlohmann::json(m.baseline_end_s)},
          {"pupil_degenerate", m.pupil_degenerate},
          {"hrv_warmup_seconds", m.hrv_warmup_seconds}};
}

// `subject,t_s,hrv,pupil_z,td` where td is 1..3, TD1..TD3 or low/medium/high.
inline std::vector<effortclass::LabelledFrame> parse_dataset(const std::string& text) {
  std::vector<effortclass::LabelledFrame> out;
  for (const auto& row : parse_csv(text, {"subject", "t_s", "hrv", "pupil_z", "td"}, "dataset")) {
    effortclass::LabelledFrame f;
    f.subject = row[0];
    f.t_s = parse_double(row[1], "dataset");
    f.x = {parse_double(row[2], "dataset"), parse_double(row[3], "dataset")};
    const auto& td = row[4];
    if (td == "1" || td == "TD1" || td == "low") {
      f.label = 0;
    } else if (td == "2" || td == "TD2" || td == "medium") {
      f.label = 1;
    } else if (td == "3" || td == "TD3" || td == "high") {
      f.label = 2;
    } else {
      throw IngestionError("dataset stream: unknown task difficulty '" + td + "'");
    }
    if (!std::isfinite(f.x[0]) || !std::isfinite(f.x[1])) throw IngestionError("dataset stream: non-finite feature");
    out.push_back(std::move(f));
  }
  return out;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline nlohmann::json manifest(const std::string& command, const nlohmann::json& config, const nlohmann::json& seed,
                               const std::vector<std::string>& outputs) {
  return {{"command", command},
          {"config_hash", "fnv1a64:" + hex64(fnv1a(config.dump()))},
          {"seed", seed},
          {"versions", {{"oft", kVersion}, {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
          {"outputs", outputs}};
}

}  // namespace oft::io
