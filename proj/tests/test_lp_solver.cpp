#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qkdcs/lp_solver.hpp"
#include "qkdcs/opt_engine.hpp"

namespace qkdcs {
namespace {

// Lagrangian dual value of a minimisation at multipliers y. By weak duality it never
// exceeds the optimum; equality with c^T x certifies x optimal.
double dual_value(const lp::Problem& p, const std::vector<double>& y) {
  std::vector<double> d = p.objective;
  double v = 0.0;
  for (std::size_t i = 0; i < p.num_rows(); ++i) {
    for (std::size_t j = 0; j < p.num_vars(); ++j) d[j] -= y[i] * p.rows[i][j];
    const double bound = y[i] > 0 ? p.row_lower[i] : p.row_upper[i];
    if (y[i] != 0.0) v += y[i] * bound;
  }
  for (std::size_t j = 0; j < p.num_vars(); ++j) {
    const double bound = d[j] > 0 ? p.lower[j] : p.upper[j];
    if (d[j] != 0.0) v += d[j] * bound;
  }
  return v;
}

lp::Problem random_lp(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), b(0.0, 1.0);
  lp::Problem p(n, 0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    p.objective[j] = u(rng);
    p.lower[j] = -b(rng);
    p.upper[j] = b(rng);
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> r(n);
    for (auto& v : r) v = u(rng);
    // the origin is feasible, so every instance has an optimum
    const double lo = -b(rng), hi = b(rng);
    p.add_row(std::move(r), i % 3 == 0 ? -lp::kInf : lo, i % 3 == 1 ? lp::kInf : hi);
  }
  return p;
}

TEST(Simplex, DualCertificatesOnRandomPrograms) {
  std::mt19937_64 rng(20);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_lp(rng, 20, 1 + t % 4);
    const auto s = lp::solve(p);
    ASSERT_EQ(s.status, lp::Status::Optimal) << "instance " << t;
    EXPECT_LE(lp::max_violation(p, s.x), 1e-9);
    ASSERT_EQ(s.row_duals.size(), p.num_rows());
    EXPECT_NEAR(dual_value(p, s.row_duals), s.objective, 1e-9) << "instance " << t;
    double cx = 0.0;
    for (std::size_t j = 0; j < p.num_vars(); ++j) cx += p.objective[j] * s.x[j];
    EXPECT_NEAR(cx, s.objective, 1e-12);
  }
}

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    auto p = random_lp(rng, 4, 1 + t % 3);
    p.sense = t % 2 ? lp::Sense::Maximize : lp::Sense::Minimize;
    std::vector<detail::SmallRow> rows;
    for (std::size_t i = 0; i < p.num_rows(); ++i) rows.push_back({p.rows[i], p.row_lower[i], p.row_upper[i]});
    const auto ref = detail::small_lp(p.objective, p.lower, p.upper, rows, p.sense == lp::Sense::Maximize);
    const auto s = lp::solve(p);
    ASSERT_TRUE(ref.has_value());
    ASSERT_EQ(s.status, lp::Status::Optimal);
    EXPECT_NEAR(s.objective, *ref, 1e-10);
  }
}

TEST(Simplex, MaximizeIsNegatedMinimize) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 20; ++t) {
    auto p = random_lp(rng, 12, 3);
    auto q = p;
    q.sense = lp::Sense::Maximize;
    for (auto& c : q.objective) c = -c;
    EXPECT_NEAR(lp::solve(p).objective, -lp::solve(q).objective, 1e-10);
  }
}

TEST(Simplex, WarmStartAgreesWithColdStart) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    auto p = random_lp(rng, 15, 4);
    const double cold = lp::solve(p).objective;
    p.start.resize(p.num_vars());
    for (std::size_t j = 0; j < p.num_vars(); ++j) p.start[j] = p.lower[j] + u(rng) * (p.upper[j] - p.lower[j]);
    const auto warm = lp::solve(p);
    ASSERT_EQ(warm.status, lp::Status::Optimal);
    EXPECT_NEAR(warm.objective, cold, 1e-10);
  }
}

TEST(Simplex, Infeasible) {
  lp::Problem p(2, 0.0, 1.0);
  p.objective = {1.0, 1.0};
  p.add_row({1.0, 1.0}, 3.0, lp::kInf);
  EXPECT_EQ(lp::solve(p).status, lp::Status::Infeasible);
}

TEST(Simplex, InconsistentBoundsAreInfeasible) {
  lp::Problem p(1, 1.0, 0.0);
  EXPECT_EQ(lp::solve(p).status, lp::Status::Infeasible);
}

TEST(Simplex, Unbounded) {
  lp::Problem p(2, 0.0, lp::kInf);
  p.objective = {-1.0, 0.0};
  p.add_row({1.0, -1.0}, -lp::kInf, 1.0);
  EXPECT_EQ(lp::solve(p).status, lp::Status::Unbounded);
}

TEST(Simplex, EqualityRows) {
  lp::Problem p(3, 0.0, 1.0);
  p.objective = {1.0, 2.0, 3.0};
  p.add_row({1.0, 1.0, 1.0}, 1.5, 1.5);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::Optimal);
  EXPECT_NEAR(s.objective, 2.0, 1e-12);
  EXPECT_NEAR(s.x[0], 1.0, 1e-12);
  EXPECT_NEAR(s.x[1], 0.5, 1e-12);
}

TEST(Simplex, BadlyScaledRows) {
  lp::Problem p(2, 0.0, 1.0);
  p.objective = {-1.0, -1.0};
  p.add_row({1e-9, 2e-9}, -lp::kInf, 1e-9);
  p.add_row({3e6, 1e6}, -lp::kInf, 2e6);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::Optimal);
  EXPECT_NEAR(s.objective, -0.8, 1e-10);
}

TEST(Simplex, RowLengthIsChecked) {
  lp::Problem p(2);
  EXPECT_THROW(p.add_row({1.0}, 0.0, 1.0), DomainError);
}

}  // namespace
}  // namespace qkdcs
