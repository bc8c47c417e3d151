#include <gtest/gtest.h>

#include <sstream>

#include "qkdcs/keyrate.hpp"

namespace qkdcs {
namespace {

struct Instance {
  ModelConfig cfg;
  ModelTables tables;
  Observables obs;
  CanonicalReferences refs;
  std::array<EstimationProgram, 3> progs;

  explicit Instance(ModelConfig c, double L = 20.0) : cfg(std::move(c)) {
    tables = build_tables(cfg);
    obs = observables(cfg, L);
    ChannelParams ch = cfg.channel;
    ch.distance_km = L;
    refs = canonical_references(ch, cfg.protocol.n_cut);
    progs = build_programs(cfg, tables, obs);
  }
};

TEST(Coarse, Shape) {
  Instance s(default_config());
  for (const auto& p : s.progs) {
    EXPECT_EQ(p.num_vars(), 33u);
    EXPECT_EQ(p.linear.size(), 6u);
    EXPECT_EQ(p.cs.size(), 66u);
    double nonzero = 0;
    for (double c : p.objective) nonzero += c != 0.0;
    EXPECT_EQ(nonzero, 1);
    EXPECT_EQ(p.objective[1], 1.0);
  }
  EXPECT_EQ(s.progs[0].sense, lp::Sense::Minimize);
  EXPECT_EQ(s.progs[2].sense, lp::Sense::Maximize);
  EXPECT_EQ(s.progs[2].variables[0].kind, VarKind::ErrX);
}

TEST(Coarse, QuantityScale) {
  Instance s(default_config());
  const double q = 0.999, p_mu = 0.999;
  EXPECT_DOUBLE_EQ(s.progs[0].quantity_scale, q * q * p_mu * s.tables.bounds.row(0).lower[1]);
  EXPECT_DOUBLE_EQ(s.progs[2].quantity_scale, (1 - q) * (1 - q) * p_mu * s.tables.bounds.row(0).upper[1]);
}

TEST(Coarse, PhysicalPointIsFeasible) {
  for (double d : {0.0, 1e-4, 1e-2})
    for (int xi : {1, 3}) {
      Instance s(default_config(d, xi), 40.0);
      for (const auto& p : s.progs) {
        const auto x = reference_point(p, s.refs);
        EXPECT_LE(linear_violation(p, x), 1e-15);
        EXPECT_LE(cs_violation(p, x), 1e-15);
      }
    }
}

TEST(Coarse, MismatchedTablesAreRejected) {
  const auto cfg = default_config(1e-2, 1);
  const auto obs = observables(cfg, 0.0);
  const auto bounds = build_coarse_bounds(cfg.intensities, 1e-2, 1, 10);
  const auto tau = build_coarse_tau(cfg.intensities, 1e-3, 1, 10);
  EXPECT_THROW(build_coarse(ProblemKind::P1, obs, bounds, tau, cfg), ConfigMismatch);
}

TEST(Fine, ShapeAndObjective) {
  auto cfg = default_config(1e-3, 1);
  cfg.formulation = Formulation::Fine;
  cfg.protocol.n_cut = 4;
  Instance s(cfg);
  const auto& p = s.progs[0];
  EXPECT_EQ(p.num_vars(), 3u * 3u * 5u);
  EXPECT_EQ(p.linear.size(), 3u * 3u * 2u);
  EXPECT_EQ(p.cs.size(), 3u * 6u * 5u);
  double w = 0.0;
  for (double c : p.objective) w += c;
  // history-averaged p_L(1) of the signal
  EXPECT_NEAR(w, s.tables.bounds.row(0, 0).lower[1], 1e-15);
  EXPECT_DOUBLE_EQ(p.quantity_scale, 0.999 * 0.999 * 0.999);
  for (const auto& c : p.cs) EXPECT_EQ(p.variables[c.var_a].history, p.variables[c.var_b].history);
}

TEST(Fine, MissingHistoriesAreRejected) {
  auto cfg = default_config(1e-3, 1);
  cfg.formulation = Formulation::Fine;
  const auto tables = build_tables(cfg);
  auto coarse = cfg;
  coarse.formulation = Formulation::Coarse;
  const auto obs = observables(coarse, 0.0);
  EXPECT_THROW(build_fine(ProblemKind::P1, obs, tables.bounds, tables.tau, cfg), MissingHistory);
}

TEST(Standard, PhysicalPointIsFeasible) {
  const auto cfg = default_config(0.0, 1);
  const auto obs = observables(cfg, 30.0);
  const auto bounds = build_coarse_bounds(cfg.intensities, 0.0, 0, 10);
  ChannelParams ch = cfg.channel;
  ch.distance_km = 30.0;
  const auto refs = canonical_references(ch, 10);
  for (auto k : kProblems) {
    const auto p = build_standard_lp(k, obs, bounds, cfg.intensities, cfg.basis);
    EXPECT_EQ(p.num_vars(), 11u);
    EXPECT_TRUE(p.cs.empty());
    EXPECT_LE(linear_violation(p, reference_point(p, refs)), 1e-15);
  }
}

TEST(Text, LpRendering) {
  Instance s(default_config());
  std::ostringstream os;
  write_lp_text(os, s.progs[0]);
  const auto text = os.str();
  EXPECT_NE(text.find("Minimize"), std::string::npos);
  EXPECT_NE(text.find("Subject To"), std::string::npos);
  EXPECT_NE(text.find("mu.lower"), std::string::npos);
  EXPECT_NE(text.find("\\ band YZ_0_a0 -> YZ_0_a1"), std::string::npos);
  EXPECT_NE(text.find("End"), std::string::npos);
  EXPECT_EQ(variable_name(s.progs[2], 12), "HX_1_a1");
}

TEST(LinearPart, RowsAndBoxes) {
  Instance s(default_config());
  const auto lpp = linear_part(s.progs[0]);
  EXPECT_EQ(lpp.num_rows(), 6u);
  EXPECT_EQ(lpp.num_vars(), 33u);
  EXPECT_EQ(lpp.lower[0], 0.0);
  EXPECT_EQ(lpp.upper[0], 1.0);
}

}  // namespace
}  // namespace qkdcs
