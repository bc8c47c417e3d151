#include <gtest/gtest.h>

#include "qkdcs/config_io.hpp"

namespace qkdcs {
namespace {

const std::string kDir = QKDCS_CONFIG_DIR;

TEST(Config, ShippedFilesParse) {
  for (const char* f : {"coarse_default.json", "coarse_delta1e-2_xi3.json", "gaussian_xi1_synthetic.json"}) {
    const auto s = load_scenario(kDir + "/" + f);
    EXPECT_TRUE(validate(s.model).ok()) << f;
  }
  const auto s = load_scenario(kDir + "/coarse_delta1e-2_xi3.json");
  const auto& cg = std::get<CoarseGrained>(s.model.correlation);
  EXPECT_EQ(cg.delta_max, 0.01);
  EXPECT_EQ(cg.xi, 3);
  EXPECT_EQ(s.sweep.stop, 150.0);
  const auto g = load_scenario(kDir + "/gaussian_xi1_synthetic.json");
  EXPECT_EQ(g.model.formulation, Formulation::Fine);
  EXPECT_EQ(std::get<TruncatedGaussian>(g.model.correlation).table.size(), 9u);
}

TEST(Config, RoundTrip) {
  for (const char* f : {"coarse_default.json", "gaussian_xi1_synthetic.json"}) {
    const auto a = load_scenario(kDir + "/" + f);
    const auto j = to_json(a.model);
    const auto b = parse_scenario(j);
    EXPECT_EQ(to_json(b.model), j) << f;
  }
  auto cfg = default_config(1e-3, 2);
  cfg.protocol.e_tol = ErrorTolerance::fixed(0.02);
  const auto b = parse_scenario(to_json(cfg));
  EXPECT_EQ(b.model.protocol.e_tol.policy, ErrorTolerance::Policy::Fixed);
  EXPECT_EQ(b.model.protocol.e_tol.value, 0.02);
}

TEST(Config, DefaultsWhenEmpty) {
  const auto s = parse_scenario_text("{}");
  EXPECT_EQ(to_json(s.model), to_json(default_config()));
  EXPECT_EQ(s.sweep.mode, ComparisonMode::Both);
}

TEST(Config, CommentsAreIgnored) {
  EXPECT_NO_THROW(parse_scenario_text(R"({"_note": 1, "channel": {"_x": "y", "eta_det": 0.5}})"));
}

TEST(Config, Rejections) {
  for (const char* text : {
           R"({"bogus": 1})",
           R"({"channel": {"eta": 0.5}})",
           R"({"channel": {"eta_det": "high"}})",
           R"({"channel": {"eta_det": 1.5}})",
           R"({"formulation": "medium"})",
           R"({"correlation": {"model": "weird"}})",
           R"({"correlation": {"model": "coarse", "delta_max": -1}})",
           R"({"protocol": {"e_tol": "auto"}})",
           R"({"protocol": {"n_cut": 0}})",
           R"({"signal": "kappa"})",
           R"({"sweep": {"mode": "all"}})",
           R"({"intensities": {"label": "mu"}})",
           R"([1, 2])",
           R"({"channel": )",
       })
    EXPECT_THROW(parse_scenario_text(text), ConfigError) << text;
  EXPECT_THROW(load_scenario(kDir + "/missing.json"), ConfigError);
}

TEST(Config, MessagesNameThePath) {
  try {
    parse_scenario_text(R"({"protocol": {"f_ec": 1.1, "extra": 3}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("protocol: unknown key 'extra'"), std::string::npos);
  }
}

TEST(Config, Modes) {
  EXPECT_EQ(parse_mode("candidate"), ComparisonMode::CandidateRefs);
  EXPECT_EQ(parse_mode("canonical"), ComparisonMode::CanonicalRefs);
  EXPECT_EQ(parse_mode("both"), ComparisonMode::Both);
  EXPECT_THROW(parse_mode("Both"), ConfigError);
  const auto s = parse_scenario_text(R"({"sweep": {"mode": "candidate", "step": 5}})");
  EXPECT_EQ(s.sweep.mode, ComparisonMode::CandidateRefs);
  EXPECT_EQ(s.sweep.step, 5.0);
}

}  // namespace
}  // namespace qkdcs
