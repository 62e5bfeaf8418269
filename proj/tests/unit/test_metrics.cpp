#include <gtest/gtest.h>

#include <random>

#include "prosody_eval/metrics.hpp"
#include "support.hpp"

using namespace prosody_eval;
using namespace testing_support;

namespace {

PitchTrack track(std::vector<double> f0) {
  PitchTrack t;
  for (double f : f0) t.voiced.push_back(f > 0.0);
  t.f0_hz = std::move(f0);
  t.hop_s = 0.0125;
  return t;
}

std::vector<F0Pair> zip(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<F0Pair> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], b[i]);
  return out;
}

}  // namespace

TEST(Msd, Examples) {
  const Matrix a = Matrix::from_rows({{0.0, 0.0}});
  const Matrix b = Matrix::from_rows({{0.0, 1.0}});
  EXPECT_EQ(msd(a, a), 0.0);
  EXPECT_NEAR(msd(a, b), 6.14185, 1e-5);
  EXPECT_NEAR(kMsdAlpha, 10.0 * std::sqrt(2.0) / std::log(10.0), 1e-15);

  const Matrix c = Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  Matrix d = c;
  d(0, 0) += 1.0;
  d(1, 0) -= 3.0;
  EXPECT_EQ(msd(c, d), 0.0);
  EXPECT_THROW(msd(c, a), Error);
}

TEST(Msd, MatchesDirectFormula) {
  std::mt19937 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  Matrix a(12, 80);
  Matrix b(12, 80);
  for (std::size_t t = 0; t < 12; ++t)
    for (std::size_t k = 0; k < 80; ++k) {
      a(t, k) = g(rng);
      b(t, k) = g(rng);
    }
  long double total = 0.0L;
  for (std::size_t t = 0; t < 12; ++t) {
    long double s = 0.0L;
    for (std::size_t k = 1; k < 80; ++k) s += static_cast<long double>(a(t, k) - b(t, k)) * (a(t, k) - b(t, k));
    total += std::sqrt(s);
  }
  const double expected = static_cast<double>(10.0L * std::sqrt(2.0L) / std::log(10.0L) * total / 12.0L);
  EXPECT_NEAR(msd(a, b), expected, 1e-10);
}

TEST(F0Metrics, Frmse) {
  const auto same = zip({100, 150, 220}, {100, 150, 220});
  EXPECT_EQ(*frmse(same), 0.0);
  EXPECT_NEAR(*frmse(zip({100, 200, 300}, {110, 190, 310})), 10.0, 1e-12);
  EXPECT_NEAR(*frmse(zip({100}, {104})), 4.0, 1e-12);
  EXPECT_FALSE(frmse({}).has_value());
  EXPECT_NEAR(*frmse_lf0(zip({100}, {200})), std::log(2.0), 1e-12);
}

TEST(F0Metrics, Fcorr) {
  EXPECT_NEAR(*fcorr(zip({1, 2, 3}, {1, 2, 3})), 1.0, 1e-12);
  EXPECT_NEAR(*fcorr(zip({1, 2, 3}, {6, 4, 2})), -1.0, 1e-12);
  EXPECT_FALSE(fcorr(zip({1, 2, 3}, {5, 5, 5})).has_value());
  EXPECT_FALSE(fcorr(zip({1}, {2})).has_value());
}

TEST(F0Metrics, FcorrAffineInvariance) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(80.0, 300.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20);
    std::vector<double> b(20);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const double base = *fcorr(zip(a, b));
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    const double s = scale(rng);
    const double o = shift(rng);
    std::vector<double> a2 = a;
    for (auto& v : a2) v = s * v + o;
    EXPECT_NEAR(*fcorr(zip(a2, b)), base, 1e-9);
    std::vector<double> b2 = b;
    for (auto& v : b2) v = s * v + o;
    EXPECT_NEAR(*fcorr(zip(a, b2)), base, 1e-9);
  }
}

TEST(F0Metrics, RelativeErrorAndGpe) {
  EXPECT_EQ(relative_f0_error(100, 100), 0.0);
  EXPECT_NEAR(relative_f0_error(100, 130), 30.0, 1e-12);
  EXPECT_NEAR(relative_f0_error(200, 160), 20.0, 1e-12);
  EXPECT_EQ(*gpe(zip({200}, {160})), 0.0);
  EXPECT_EQ(*gpe(zip({100, 100}, {100, 100})), 0.0);
  EXPECT_NEAR(*gpe(zip({100, 100, 100, 100}, {100, 130, 119, 100})), 25.0, 1e-12);
  EXPECT_NEAR(*gpe(zip({100, 200}, {150, 100})), 100.0, 1e-12);
  EXPECT_FALSE(gpe({}).has_value());
}

TEST(F0Metrics, Fpe) {
  EXPECT_EQ(*fpe(zip({100, 200, 300}, {100, 200, 300})), 0.0);
  const double cents = 1200.0 * std::log2(1.01);
  EXPECT_NEAR(cents, 17.2264, 1e-4);
  EXPECT_NEAR(*fpe(zip({100, 100}, {100, 101})), cents / 2.0, 1e-9);
  EXPECT_NEAR(*fpe(zip({100, 200, 150}, {105, 210, 157.5})), 0.0, 1e-9);
  // gross pairs are left out of the fine-error spread
  EXPECT_NEAR(*fpe(zip({100, 100, 100}, {100, 101, 200})), cents / 2.0, 1e-9);
  EXPECT_FALSE(fpe(zip({100}, {101})).has_value());
  EXPECT_FALSE(fpe(zip({100, 100}, {101, 300})).has_value());
  EXPECT_NEAR(*fpe_percent(zip({100, 100}, {100, 102})), 1.0, 1e-9);
}

TEST(F0Metrics, VoicedPairsNeedBothSidesVoiced) {
  const PitchTrack ref = track({100, 0, 120, 130});
  const PitchTrack pred = track({101, 111, 0, 131});
  const WarpPath path{{{0, 0}, {1, 1}, {2, 2}, {3, 3}}};
  const auto pairs = voiced_pairs(path, ref, pred);
  const std::vector<F0Pair> expected{{100, 101}, {130, 131}};
  EXPECT_EQ(pairs, expected);
}

TEST(Compare, SelfComparisonIdentities) {
  const AudioBuffer a = glide(110.0, 210.0, 1.0);
  const MetricsReport r = compare_utterances(a, a, CompareOptions{});
  EXPECT_EQ(r.msd_db, 0.0);
  EXPECT_EQ(*r.frmse_hz, 0.0);
  EXPECT_EQ(*r.gpe_percent, 0.0);
  EXPECT_EQ(*r.fpe_cents, 0.0);
  EXPECT_NEAR(*r.fcorr, 1.0, 1e-12);
  EXPECT_EQ(r.n_aligned_frames, 77u);
}

TEST(Compare, StretchedToneIsAbsorbedByDtw) {
  const AudioBuffer ref = parse_wav(encode_wav(sine(220.0, 1.0)));
  const AudioBuffer pred = parse_wav(encode_wav(sine(220.0, 1.1)));
  const MetricsReport r = compare_utterances(ref, pred, CompareOptions{});
  ASSERT_TRUE(r.frmse_hz.has_value());
  EXPECT_LT(*r.frmse_hz, 2.0);
  EXPECT_GE(r.n_aligned_frames, 85u);
  // only the inserted frames cost anything: their sine phase differs from the
  // neighbouring reference frame, which moves the low-energy sidelobe bands
  EXPECT_LT(r.msd_db, 1.5);
  const MetricsReport detuned = compare_utterances(ref, parse_wav(encode_wav(sine(247.0, 1.1))), CompareOptions{});
  EXPECT_GT(detuned.msd_db, 5.0 * r.msd_db);
}

TEST(Compare, VoicedAgainstSilence) {
  const MetricsReport r = compare_utterances(sine(220.0, 0.5), silence(0.5), CompareOptions{});
  EXPECT_GT(r.msd_db, 0.0);
  EXPECT_FALSE(r.frmse_hz.has_value());
  EXPECT_FALSE(r.fcorr.has_value());
  EXPECT_FALSE(r.gpe_percent.has_value());
  EXPECT_FALSE(r.fpe_cents.has_value());
  EXPECT_EQ(r.n_voiced_pairs, 0u);
}

TEST(Compare, SampleRateMismatch) {
  const AudioBuffer a = sine(200.0, 0.5, 24000);
  const AudioBuffer b = sine(200.0, 0.5, 16000);
  EXPECT_THROW(compare_utterances(a, b, CompareOptions{}), Error);
  CompareOptions o;
  o.resample = true;
  const MetricsReport r = compare_utterances(a, b, o);
  ASSERT_TRUE(r.frmse_hz.has_value());
  EXPECT_LT(*r.frmse_hz, 1.0);
}

TEST(Corpus, Lf0Stats) {
  const Lf0Stats s = utterance_lf0_stats(track({100, 0, 200}));
  EXPECT_NEAR(s.variance, 0.12011, 1e-5);
  EXPECT_NEAR(s.variance, std::pow(std::log(2.0) / 2, 2), 1e-12);
  EXPECT_NEAR(s.range, 0.69315, 1e-5);
  const Lf0Stats flat = utterance_lf0_stats(track({150, 150, 150}));
  EXPECT_EQ(flat.variance, 0.0);
  EXPECT_EQ(flat.range, 0.0);
  EXPECT_THROW(utterance_lf0_stats(track({0, 0, 0})), Error);
}

TEST(Corpus, MeanOverUtterances) {
  const std::vector<PitchTrack> flat{track({120, 120}), track({120, 120, 120})};
  const CorpusProsodyStats z = corpus_prosody_stats(flat);
  EXPECT_EQ(z.mean_lf0_variance, 0.0);
  EXPECT_EQ(z.mean_lf0_range, 0.0);

  const std::vector<PitchTrack> tracks{track({100, 130, 90}), track({200, 150, 0, 260, 240}), track({0, 0})};
  const Lf0Stats a = utterance_lf0_stats(tracks[0]);
  const Lf0Stats b = utterance_lf0_stats(tracks[1]);
  const CorpusProsodyStats c = corpus_prosody_stats(tracks);
  EXPECT_NEAR(c.mean_lf0_variance, (a.variance + b.variance) / 2, 1e-12);
  EXPECT_NEAR(c.mean_lf0_range, (a.range + b.range) / 2, 1e-12);
  EXPECT_EQ(c.n_utterances, 2u);
  EXPECT_EQ(c.n_skipped, 1u);
}

TEST(Tempo, Examples) {
  const std::vector<TempoRecord> one{{"u", 42, 3.0}};
  EXPECT_NEAR(speech_tempo(one), 14.0, 1e-12);
  const std::vector<TempoRecord> two{{"a", 10, 1.0}, {"b", 20, 1.0}};
  EXPECT_NEAR(speech_tempo(two), 15.0, 1e-12);
  EXPECT_THROW(speech_tempo(std::vector<TempoRecord>{}), Error);
  const std::vector<TempoRecord> bad{{"a", 10, 0.0}};
  EXPECT_THROW(speech_tempo(bad), Error);
}

TEST(Tempo, ManifestParsing) {
  TempDir dir;
  write_text(dir / "t.csv", "utterance_id,phoneme_count,duration_s\nu1,42,3.0\nu2,20,1.0\n");
  const auto recs = read_tempo_manifest(dir / "t.csv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].phoneme_count, 20u);
  write_text(dir / "bad.csv", "utterance_id,phoneme_count,duration_s\nu1,abc,3.0\n");
  try {
    read_tempo_manifest(dir / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("phoneme_count"), std::string::npos) << msg;
  }
}
