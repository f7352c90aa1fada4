#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oft/io.hpp"
#include "oft/physio.hpp"
#include "oracles.hpp"

using namespace oft;
using namespace oft::physio;
using oft_test::sdnn_oracle;

namespace {

std::vector<TimedValue> sinusoid(double hz, double fs, double seconds, double amp = 1.0, double dc = 0.0) {
  std::vector<TimedValue> v;
  const auto n = static_cast<std::size_t>(seconds * fs);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    v.push_back({t, dc + amp * std::sin(2.0 * std::numbers::pi * hz * t)});
  }
  return v;
}

// Amplitude estimate over the middle half, away from edge transients.
double mid_amplitude(const std::vector<double>& y) {
  const std::size_t a = y.size() / 4, b = 3 * y.size() / 4;
  double ss = 0.0;
  for (std::size_t i = a; i < b; ++i) ss += y[i] * y[i];
  return std::sqrt(2.0 * ss / static_cast<double>(b - a));
}

}  // namespace

TEST(Cleanse, BoundsAreInclusive) {
  const std::vector<PupilSample> raw{{0.0, 1.5, true}, {0.1, 5.0, true}, {0.2, 2.0, true}, {0.3, 8.0, true},
                                     {0.4, 9.0, true}, {0.5, 4.0, false}};
  const auto out = cleanse_pupil(raw);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[0].diameter_mm, 5.0);
  EXPECT_DOUBLE_EQ(out[1].diameter_mm, 2.0);
  EXPECT_DOUBLE_EQ(out[2].diameter_mm, 8.0);
}

TEST(Cleanse, AllInvalidGivesEmpty) {
  const std::vector<PupilSample> raw{{0.0, 4.0, false}, {0.1, 4.0, false}};
  EXPECT_TRUE(cleanse_pupil(raw).empty());
}

TEST(Cleanse, IdempotentOnRandomStreams) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  std::bernoulli_distribution valid(0.8);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<PupilSample> raw(50);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = {0.1 * static_cast<double>(i), d(rng), valid(rng)};
    const auto once = cleanse_pupil(raw);
    EXPECT_EQ(cleanse_pupil(once), once);
  }
}

TEST(Sdnn, Examples) {
  EXPECT_NEAR(sdnn(std::vector<double>{800, 800, 800, 800}), 0.0, 1e-12);
  EXPECT_NEAR(sdnn(std::vector<double>{800, 900}), 70.71067811865476, 1e-9);
  EXPECT_THROW(sdnn(std::vector<double>{800}), InsufficientDataError);
}

TEST(Sdnn, UsesOnlyTheLastSpanBeats) {
  std::vector<double> rr{100, 5000};
  for (int i = 0; i < 100; ++i) rr.push_back(i % 2 ? 810 : 790);
  EXPECT_NEAR(sdnn(rr, 100), sdnn_oracle(rr, 100), 1e-9);
  EXPECT_LT(sdnn(rr, 100), 11.0);
}

TEST(Sdnn, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(2, 300);
  std::normal_distribution<double> rr(800.0, 60.0);
  for (int rep = 0; rep < 1500; ++rep) {
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& x : xs) x = std::max(300.0, rr(rng));
    EXPECT_NEAR(sdnn(xs), sdnn_oracle(xs, 100), 1e-9);
  }
}

TEST(Sdnn, TranslationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> rr(800.0, 40.0);
  std::uniform_real_distribution<double> shift(-200.0, 200.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs(120);
    for (auto& x : xs) x = rr(rng);
    const double c = shift(rng);
    auto ys = xs;
    for (auto& y : ys) y += c;
    EXPECT_NEAR(sdnn(xs), sdnn(ys), 1e-9);
  }
}

TEST(Normalize, Examples) {
  const auto z = normalize(std::vector<double>{1, 2, 3}, NormMethod::kZScore).values;
  EXPECT_NEAR(z[0], -1.0, 1e-12);  // sample std of {1,2,3} is 1
  EXPECT_NEAR(z[1], 0.0, 1e-12);
  EXPECT_NEAR(z[2], 1.0, 1e-12);
  const auto r = normalize(std::vector<double>{5, 5, 5}, NormMethod::kMeanRatio).values;
  for (double v : r) EXPECT_DOUBLE_EQ(v, 1.0);
  const auto r2 = normalize(std::vector<double>{2, 4}, NormMethod::kMeanRatio).values;
  EXPECT_NEAR(r2[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r2[1], 4.0 / 3.0, 1e-12);
}

TEST(Normalize, DegenerateInputs) {
  EXPECT_THROW(normalize(std::vector<double>{4, 4, 4}, NormMethod::kZScore), DegenerateInputError);
  EXPECT_THROW(normalize(std::vector<double>{0, 0}, NormMethod::kMeanRatio), DegenerateInputError);
}

TEST(Normalize, ZScoreMomentsProperty) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(2, 400);
  std::normal_distribution<double> x(4.0, 0.7);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& v : xs) v = x(rng);
    const auto m = sample_moments(normalize(xs, NormMethod::kZScore).values);
    EXPECT_NEAR(m.mean, 0.0, 1e-9);
    EXPECT_NEAR(m.stddev, 1.0, 1e-9);
  }
}

TEST(Bandpass, DcIsRemoved) {
  std::vector<TimedValue> v;
  for (int i = 0; i < 20000; ++i) v.push_back({i / 10.0, 3.7});
  const auto y = bandpass(v, 0.01, 0.09);
  for (double s : y) EXPECT_NEAR(s, 0.0, 1e-6);
}

TEST(Bandpass, PassesInBandSinusoid) {
  const auto y = bandpass(sinusoid(0.05, 10.0, 2000.0, 1.0, 4.0), 0.01, 0.09);
  EXPECT_NEAR(mid_amplitude(y), 1.0, 0.10);
}

TEST(Bandpass, RejectsOneHertzByTwentyDb) {
  const auto y = bandpass(sinusoid(1.0, 10.0, 2000.0), 0.01, 0.09);
  EXPECT_LE(20.0 * std::log10(mid_amplitude(y)), -20.0);
}

TEST(Bandpass, Errors) {
  auto v = sinusoid(0.05, 10.0, 100.0);
  EXPECT_THROW(bandpass(v, 0.09, 0.01), ArgumentError);
  EXPECT_THROW(bandpass(v, 0.01, 6.0), ArgumentError);
  v[10].t_s += 0.03;
  try {
    bandpass(v, 0.01, 0.09);
    FAIL() << "non-uniform sampling accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("resample"), std::string::npos);
  }
}

TEST(Features, PerSecondTumblingFrames) {
  RRSeries rr;
  double t = 0.0;
  for (int i = 0; i < 40; ++i) {
    const double v = i % 2 ? 900.0 : 700.0;
    t += v / 1000.0;
    rr.intervals_ms.push_back(v);
    rr.timestamps_s.push_back(t);
  }
  std::vector<PupilSample> pupil;
  for (int s = 0; s < 30; ++s) {
    pupil.push_back({s + 0.0, 3.0 + (s % 3), true});
    pupil.push_back({s + 0.5, 3.0 + (s % 3), true});
    pupil.push_back({s + 0.7, 0.5, true});  // artefact, dropped
  }
  FeatureOptions opt;
  opt.sdnn_span = 10;
  const auto f = extract_features(rr, pupil, 30, opt);
  ASSERT_EQ(f.frames.size(), 30u);
  EXPECT_TRUE(std::isnan(f.frames[0].hrv_sdnn_ms));  // one beat by t=1
  EXPECT_FALSE(std::isnan(f.frames[1].hrv_sdnn_ms));
  EXPECT_TRUE(f.frames[1].hrv_warmup);
  EXPECT_FALSE(f.frames[29].hrv_warmup);
  std::vector<double> seen;
  for (std::size_t i = 0; i < rr.intervals_ms.size(); ++i)
    if (rr.timestamps_s[i] < 30.0) seen.push_back(rr.intervals_ms[i]);
  EXPECT_NEAR(f.frames[29].hrv_sdnn_ms, sdnn_oracle(seen, 10), 1e-9);
  EXPECT_DOUBLE_EQ(f.frames[4].pupil_mm, 4.0);
  std::vector<double> z;
  for (const auto& fr : f.frames) z.push_back(fr.pupil_z);
  const auto m = sample_moments(z);
  EXPECT_NEAR(m.mean, 0.0, 1e-9);
  EXPECT_NEAR(m.stddev, 1.0, 1e-9);
  EXPECT_FALSE(f.metadata.pupil_degenerate);
}

TEST(Features, FlatPupilFlaggedDegenerate) {
  RRSeries rr{{800, 800, 800}, {0.8, 1.6, 2.4}};
  std::vector<PupilSample> pupil{{0.0, 4.0, true}, {1.0, 4.0, true}, {2.0, 4.0, true}};
  const auto f = extract_features(rr, pupil, 3);
  EXPECT_TRUE(f.metadata.pupil_degenerate);
  for (const auto& fr : f.frames) EXPECT_DOUBLE_EQ(fr.pupil_z, 0.0);
}

TEST(Features, RejectsUnorderedBeats) {
  RRSeries rr{{800, 800}, {1.0, 0.5}};
  EXPECT_THROW(extract_features(rr, {}, 2), DataError);
}

TEST(OnlineNormalizer, FreezesAfterBaseline) {
  OnlinePupilNormalizer n(3.0);
  EXPECT_EQ(n.push(0, std::nullopt), std::nullopt);
  EXPECT_DOUBLE_EQ(*n.push(0, 3.0), 0.0);
  n.push(1, 4.0);
  n.push(2, 5.0);
  EXPECT_NEAR(*n.push(3, 6.0), 2.0, 1e-12);  // baseline {3,4,5}: mean 4, sd 1
  EXPECT_NEAR(*n.push(4, 4.0), 0.0, 1e-12);
}

TEST(Io, BeatsAndPupilRoundTrip) {
  const auto rr = io::parse_beats("t_s,rr_ms\n0.8,800\n1.7,900\n");
  ASSERT_EQ(rr.intervals_ms.size(), 2u);
  EXPECT_DOUBLE_EQ(rr.intervals_ms[1], 900.0);
  const auto p = io::parse_pupil("t_s,pupil_mm,valid\n0,3.5,1\n0.1,0,0\n");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_FALSE(p[1].valid);
  EXPECT_THROW(io::parse_beats("time,rr\n1,2\n"), IngestionError);
}
