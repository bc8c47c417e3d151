#include <gtest/gtest.h>

#include "qkdcs/core_model.hpp"

namespace qkdcs {
namespace {

bool has_path(const ValidationResult& r, const std::string& path) {
  for (const auto& v : r.violations)
    if (v.path == path) return true;
  return false;
}

TEST(Validate, DefaultConfigIsValid) {
  EXPECT_TRUE(validate(default_config()).ok());
  EXPECT_TRUE(validate(default_config(0.0, 3)).ok());
}

TEST(Validate, DefaultScenarioValues) {
  const auto c = default_config();
  ASSERT_EQ(c.intensities.size(), 3u);
  EXPECT_EQ(c.intensities[0].intensity, 0.48);
  EXPECT_EQ(c.intensities[1].intensity, 0.1);
  EXPECT_EQ(c.intensities[2].intensity, 1e-4);
  EXPECT_EQ(c.channel.eta_det, 0.65);
  EXPECT_EQ(c.channel.dark_count, 7.2e-8);
  EXPECT_EQ(c.channel.misalignment, 0.08);
  EXPECT_EQ(c.protocol.f_ec, 1.16);
  EXPECT_EQ(c.protocol.n_cut, 10);
  EXPECT_EQ(c.channel.loss_db_per_km, 0.2);
}

TEST(Validate, ProbabilitiesMustSumToOne) {
  auto c = default_config();
  c.intensities.settings[0].probability = 0.5;
  const auto r = validate(c);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_path(r, "intensities.settings"));
}

TEST(Validate, DeltaMaxOfOneIsRejected) {
  auto c = default_config(1.0, 1);
  EXPECT_TRUE(has_path(validate(c), "correlation.delta_max"));
}

TEST(Validate, CollectsEveryViolation) {
  auto c = default_config();
  c.channel.eta_det = 0.0;
  c.protocol.f_ec = 0.9;
  c.protocol.n_cut = 0;
  c.intensities.signal = "missing";
  const auto r = validate(c);
  EXPECT_TRUE(has_path(r, "channel.eta_det"));
  EXPECT_TRUE(has_path(r, "protocol.f_ec"));
  EXPECT_TRUE(has_path(r, "protocol.n_cut"));
  EXPECT_TRUE(has_path(r, "intensities.signal"));
}

TEST(Validate, DuplicateIntensitiesAndLabels) {
  auto c = default_config();
  c.intensities.settings[1].intensity = 0.48;
  c.intensities.settings[2].label = "mu";
  const auto r = validate(c);
  EXPECT_TRUE(has_path(r, "intensities.settings[1].intensity"));
  EXPECT_TRUE(has_path(r, "intensities.settings[2].label"));
}

TEST(Validate, BasisProbabilities) {
  auto c = default_config();
  c.basis.q_x = 0.5;
  EXPECT_TRUE(has_path(validate(c), "basis"));
}

TEST(Validate, XiCap) {
  auto c = default_config(1e-2, 7);
  EXPECT_TRUE(has_path(validate(c), "correlation.xi"));
}

TEST(Validate, GaussianTableNeedsEveryPattern) {
  auto c = default_config();
  TruncatedGaussian tg;
  tg.table[{0, 0}] = {0.48, 0.01, 0.45, 0.51};
  c.correlation = tg;
  c.formulation = Formulation::Fine;
  EXPECT_TRUE(has_path(validate(c), "correlation.table"));
  c.formulation = Formulation::Coarse;
  EXPECT_TRUE(has_path(validate(c), "formulation"));
}

TEST(Validate, GaussianTruncationOrder) {
  auto c = default_config();
  TruncatedGaussian tg;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) tg.table[{a, b}] = {0.2, 0.01, 0.25, 0.3};
  c.correlation = tg;
  c.formulation = Formulation::Fine;
  EXPECT_TRUE(has_path(validate(c), "correlation.table"));
}

TEST(Validate, FixedErrorTolerance) {
  auto c = default_config();
  c.protocol.e_tol = ErrorTolerance::fixed(0.6);
  EXPECT_TRUE(has_path(validate(c), "protocol.e_tol"));
  c.protocol.e_tol = ErrorTolerance::fixed(0.02);
  EXPECT_TRUE(validate(c).ok());
}

TEST(Histories, EnumerationOrderAndProbability) {
  const auto c = default_config();
  const auto h = enumerate_histories(c.intensities, 2);
  ASSERT_EQ(h.size(), 9u);
  EXPECT_EQ(h[0].settings, (SettingSequence{0, 0}));
  EXPECT_EQ(h[1].settings, (SettingSequence{0, 1}));
  EXPECT_EQ(h[8].settings, (SettingSequence{2, 2}));
  double total = 0.0;
  for (const auto& x : h) total += x.probability;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(h[1].probability, 0.999 * 0.0005);
}

TEST(Histories, EmptyHistoryForXiZero) {
  const auto h = enumerate_histories(default_config().intensities, 0);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_TRUE(h[0].settings.empty());
  EXPECT_EQ(h[0].probability, 1.0);
}

TEST(Histories, CapAndNegative) {
  const auto s = default_config().intensities;
  EXPECT_THROW(enumerate_histories(s, 7), DomainError);
  EXPECT_THROW(enumerate_histories(s, -1), DomainError);
}

TEST(Histories, Label) {
  const auto s = default_config().intensities;
  EXPECT_EQ(history_label(s, {0, 1}), "mu,nu");
  EXPECT_EQ(history_label(s, {}), "");
}

TEST(Channel, Transmittance) {
  ChannelParams ch;
  ch.distance_km = 50.0;
  EXPECT_NEAR(ch.channel_transmittance(), 0.1, 1e-15);
  EXPECT_NEAR(ch.transmittance(), 0.065, 1e-15);
}

TEST(Coarse, HistoryDeviation) {
  CoarseGrained cg;
  cg.delta_max = 1e-3;
  cg.xi = 1;
  cg.delta_by_history[{1}] = 5e-3;
  EXPECT_EQ(cg.delta_for({0}), 1e-3);
  EXPECT_EQ(cg.delta_for({1}), 5e-3);
  EXPECT_EQ(cg.largest_delta(), 5e-3);
}

}  // namespace
}  // namespace qkdcs
