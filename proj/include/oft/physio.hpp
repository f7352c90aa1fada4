#pragma once

// Physiological signal conditioning: pupil cleansing, SDNN heart-rate
// variability, normalization, zero-phase band-pass filtering and per-second
// feature frames.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oft/error.hpp"

namespace oft::physio {

inline constexpr double kPupilMinMm = 2.0;
inline constexpr double kPupilMaxMm = 8.0;
inline constexpr std::size_t kSdnnSpan = 100;

// Inter-beat intervals with the time (seconds since scenario start) at which
// each beat was observed.
struct RRSeries {
  std::vector<double> intervals_ms;
  std::vector<double> timestamps_s;

  void validate() const {
    if (intervals_ms.size() != timestamps_s.size()) {
      throw DataError("RR series: intervals and timestamps differ in length");
    }
    for (std::size_t i = 0; i < intervals_ms.size(); ++i) {
      if (!(intervals_ms[i] > 0.0)) throw DataError("RR series: non-positive interval");
      if (i > 0 && !(timestamps_s[i] > timestamps_s[i - 1])) {
        throw DataError("RR series: timestamps must be strictly increasing");
      }
    }
  }
};

struct PupilSample {
  double t_s = 0.0;
  double diameter_mm = 0.0;
  bool valid = false;

  friend bool operator==(const PupilSample&, const PupilSample&) = default;
};

using PupilSeries = std::vector<PupilSample>;

// Keeps valid samples whose diameter lies in [2, 8] mm, in input order.
inline PupilSeries cleanse_pupil(std::span<const PupilSample> raw) {
  PupilSeries out;
  out.reserve(raw.size());
  std::copy_if(raw.begin(), raw.end(), std::back_inserter(out), [](const PupilSample& s) {
    return s.valid && s.diameter_mm >= kPupilMinMm && s.diameter_mm <= kPupilMaxMm;
  });
  return out;
}

// Sample (N-1) standard deviation of the last min(span, N) intervals.
inline double sdnn(std::span<const double> intervals_ms, std::size_t span = kSdnnSpan) {
  if (span < 2) throw ArgumentError("sdnn: span must be at least 2");
  if (intervals_ms.size() < 2) {
    throw InsufficientDataError("sdnn: at least 2 intervals are required");
  }
  const std::size_t n = std::min(span, intervals_ms.size());
  const auto window = intervals_ms.last(n);
  const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double rr : window) ss += (rr - mean) * (rr - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

enum class NormMethod { kZScore, kMeanRatio };

inline const char* to_string(NormMethod m) {
  return m == NormMethod::kZScore ? "z-score" : "mean-ratio";
}

struct NormalizedSeries {
  std::vector<double> values;
  NormMethod method = NormMethod::kZScore;
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // sample (N-1)
};

inline Moments sample_moments(std::span<const double> xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return m;
}

// Normalizes `series` with statistics taken from `baseline`.
inline NormalizedSeries normalize(std::span<const double> series, NormMethod method,
                                  std::span<const double> baseline) {
  const Moments m = sample_moments(baseline);
  NormalizedSeries out{{}, method};
  out.values.reserve(series.size());
  if (method == NormMethod::kZScore) {
    if (baseline.size() < 2 || !(m.stddev > 0.0)) {
      throw DegenerateInputError("normalize(z-score): baseline variance is zero");
    }
    for (double x : series) out.values.push_back((x - m.mean) / m.stddev);
  } else {
    if (baseline.empty() || m.mean == 0.0) {
      throw DegenerateInputError("normalize(mean-ratio): baseline mean is zero");
    }
    for (double x : series) out.values.push_back(x / m.mean);
  }
  return out;
}

inline NormalizedSeries normalize(std::span<const double> series, NormMethod method) {
  return normalize(series, method, series);
}

struct TimedValue {
  double t_s = 0.0;
  double value = 0.0;
};

namespace detail {

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized by a0

  std::vector<double> run(std::span<const double> x) const {
    std::vector<double> y(x.size());
    double z1 = 0.0, z2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double out = b0 * x[i] + z1;
      z1 = b1 * x[i] - a1 * out + z2;
      z2 = b2 * x[i] - a2 * out;
      y[i] = out;
    }
    return y;
  }
};

// Second-order Butterworth sections (bilinear transform, Q = 1/sqrt(2)).
inline Biquad butter_lowpass(double cutoff_hz, double fs) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

inline Biquad butter_highpass(double cutoff_hz, double fs) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

}  // namespace detail

// Zero-phase band-pass: high-pass and low-pass Butterworth sections applied
// forward then backward over an odd-reflected padding of the input.
// Requires uniform sampling.
inline std::vector<double> bandpass(std::span<const TimedValue> series, double low_hz,
                                    double high_hz) {
  if (series.size() < 3) throw InsufficientDataError("bandpass: at least 3 samples required");
  const double dt = (series.back().t_s - series.front().t_s) / static_cast<double>(series.size() - 1);
  if (!(dt > 0.0)) throw DataError("bandpass: timestamps must increase");
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double step = series[i].t_s - series[i - 1].t_s;
    if (std::abs(step - dt) > 1e-6 * dt + 1e-9) {
      throw DataError("bandpass: non-uniform sampling; resample the series to a uniform rate first");
    }
  }
  const double fs = 1.0 / dt;
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw ArgumentError("bandpass: require 0 < low_hz < high_hz < Nyquist");
  }

  const std::size_t n = series.size();
  const auto pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(6.0 * fs / low_hz)));
  std::vector<double> x;
  x.reserve(n + 2 * pad);
  const double first = series.front().value;
  const double last = series.back().value;
  for (std::size_t i = pad; i >= 1; --i) x.push_back(2.0 * first - series[i].value);
  for (const auto& s : series) x.push_back(s.value);
  for (std::size_t i = 1; i <= pad; ++i) x.push_back(2.0 * last - series[n - 1 - i].value);

  const auto hp = detail::butter_highpass(low_hz, fs);
  const auto lp = detail::butter_lowpass(high_hz, fs);
  auto pass = [&](std::vector<double> v) { return lp.run(hp.run(v)); };

  auto y = pass(std::move(x));
  std::reverse(y.begin(), y.end());
  y = pass(std::move(y));
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad),
          y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// Rolling SDNN over the most recent `span` beats.
class RollingSdnn {
 public:
  explicit RollingSdnn(std::size_t span = kSdnnSpan) : span_(span) {
    if (span_ < 2) throw ArgumentError("RollingSdnn: span must be at least 2");
  }

  void push(double rr_ms) {
    window_.push_back(rr_ms);
    if (window_.size() > span_) window_.erase(window_.begin());
  }

  std::size_t count() const { return window_.size(); }
  bool warmup() const { return window_.size() < span_; }
  std::optional<double> value() const {
    if (window_.size() < 2) return std::nullopt;
    return sdnn(window_, span_);
  }

 private:
  std::size_t span_;
  std::vector<double> window_;
};

// One row per second s, aggregating samples with timestamp in [s, s+1).
struct FeatureFrame {
  int t_s = 0;
  double hrv_sdnn_ms = std::numeric_limits<double>::quiet_NaN();
  double pupil_mm = std::numeric_limits<double>::quiet_NaN();
  double pupil_z = std::numeric_limits<double>::quiet_NaN();
  bool hrv_warmup = true;
};

struct FeatureOptions {
  std::size_t sdnn_span = kSdnnSpan;
  double baseline_begin_s = 0.0;
  double baseline_end_s = std::numeric_limits<double>::infinity();
};

struct FeatureMetadata {
  std::string pupil_normalization = "z-score";
  double baseline_begin_s = 0.0;
  double baseline_end_s = std::numeric_limits<double>::infinity();
  bool pupil_degenerate = false;  // baseline variance zero: pupil_z set to 0
  int hrv_warmup_seconds = 0;
};

struct FeatureSet {
  std::vector<FeatureFrame> frames;
  FeatureMetadata metadata;
};

// Builds per-second frames for seconds [0, duration_s). HRV is the rolling
// SDNN over beats observed before the end of each second; pupil_z is the
// per-second mean of cleansed samples, z-normalized over the baseline window.
inline FeatureSet extract_features(const RRSeries& rr, std::span<const PupilSample> raw_pupil,
                                   int duration_s, const FeatureOptions& opt = {}) {
  rr.validate();
  FeatureSet out;
  out.metadata.baseline_begin_s = opt.baseline_begin_s;
  out.metadata.baseline_end_s = opt.baseline_end_s;
  out.frames.resize(static_cast<std::size_t>(std::max(duration_s, 0)));

  RollingSdnn rolling(opt.sdnn_span);
  std::size_t beat = 0;
  for (int s = 0; s < duration_s; ++s) {
    auto& f = out.frames[static_cast<std::size_t>(s)];
    f.t_s = s;
    while (beat < rr.intervals_ms.size() && rr.timestamps_s[beat] < s + 1.0) {
      rolling.push(rr.intervals_ms[beat]);
      ++beat;
    }
    if (auto v = rolling.value()) f.hrv_sdnn_ms = *v;
    f.hrv_warmup = rolling.warmup();
    if (f.hrv_warmup) ++out.metadata.hrv_warmup_seconds;
  }

  const auto pupil = cleanse_pupil(raw_pupil);
  std::vector<double> sum(out.frames.size(), 0.0);
  std::vector<int> cnt(out.frames.size(), 0);
  for (const auto& p : pupil) {
    const auto s = static_cast<long>(std::floor(p.t_s));
    if (s < 0 || s >= duration_s) continue;
    sum[static_cast<std::size_t>(s)] += p.diameter_mm;
    ++cnt[static_cast<std::size_t>(s)];
  }
  std::vector<double> baseline;
  for (std::size_t s = 0; s < out.frames.size(); ++s) {
    if (cnt[s] == 0) continue;
    out.frames[s].pupil_mm = sum[s] / cnt[s];
    const auto t = static_cast<double>(s);
    if (t >= opt.baseline_begin_s && t < opt.baseline_end_s) baseline.push_back(out.frames[s].pupil_mm);
  }
  const Moments m = sample_moments(baseline);
  const bool degenerate = baseline.size() < 2 || !(m.stddev > 0.0);
  out.metadata.pupil_degenerate = degenerate;
  for (auto& f : out.frames) {
    if (std::isnan(f.pupil_mm)) continue;
    f.pupil_z = degenerate ? 0.0 : (f.pupil_mm - m.mean) / m.stddev;
  }
  return out;
}

// Causal pupil normalizer for in-loop monitoring: collects per-second means
// during [0, baseline_s), then freezes the baseline statistics. Before the
// baseline is frozen, values are normalized against the samples seen so far.
class OnlinePupilNormalizer {
 public:
  explicit OnlinePupilNormalizer(double baseline_s) : baseline_s_(baseline_s) {}

  std::optional<double> push(double t_s, std::optional<double> pupil_mm) {
    if (!pupil_mm) return std::nullopt;
    if (t_s < baseline_s_) {
      seen_.push_back(*pupil_mm);
      stats_ = sample_moments(seen_);
    }
    if (seen_.size() < 2 || !(stats_.stddev > 0.0)) return 0.0;
    return (*pupil_mm - stats_.mean) / stats_.stddev;
  }

 private:
  double baseline_s_;
  std::vector<double> seen_;
  Moments stats_;
};

}  // namespace oft::physio
