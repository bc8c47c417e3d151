#pragma once

// Two-stage solution of the estimation programs: a successive-linear-programming
// candidate search that keeps every iterate feasible for the nonlinear bands, and a
// certification LP in which every band is replaced by its tangent outer relaxation.
// A brute-force grid oracle for tiny programs is provided for verification.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qkdcs/cs_math.hpp"
#include "qkdcs/decoy_programs.hpp"
#include "qkdcs/errors.hpp"
#include "qkdcs/lp_solver.hpp"

namespace qkdcs {

// ---------------------------------------------------------------------------
// Decomposition into independent blocks

/// A subprogram on the variables `vars` of its parent.
struct ProgramBlock {
  EstimationProgram program;
  std::vector<std::size_t> vars;
};

/// Splits a program into connected components of the graph whose edges are shared
/// rows and bands. The objective is separable, so block optima add up.
inline std::vector<ProgramBlock> decompose(const EstimationProgram& p) {
  const std::size_t n = p.num_vars();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };
  for (const auto& row : p.linear)
    for (std::size_t t = 1; t < row.terms.size(); ++t) unite(row.terms[0].first, row.terms[t].first);
  for (const auto& c : p.cs) unite(c.var_a, c.var_b);

  std::vector<std::size_t> block_of(n), local(n);
  std::vector<ProgramBlock> blocks;
  std::vector<std::size_t> root_block(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t r = find(j);
    if (root_block[r] == n) {
      root_block[r] = blocks.size();
      ProgramBlock b;
      b.program.kind = p.kind;
      b.program.sense = p.sense;
      b.program.quantity_scale = p.quantity_scale;
      blocks.push_back(std::move(b));
    }
    auto& b = blocks[root_block[r]];
    block_of[j] = root_block[r];
    local[j] = b.vars.size();
    b.vars.push_back(j);
    b.program.variables.push_back(p.variables[j]);
    b.program.objective.push_back(p.objective[j]);
  }
  for (const auto& row : p.linear) {
    if (row.terms.empty()) continue;
    LinearConstraint r = row;
    for (auto& [j, c] : r.terms) j = local[j];
    blocks[block_of[row.terms[0].first]].program.linear.push_back(std::move(r));
  }
  for (const auto& c : p.cs)
    blocks[block_of[c.var_a]].program.cs.push_back({local[c.var_a], local[c.var_b], c.tau});
  return blocks;
}

namespace detail {

inline std::vector<double> gather(const std::vector<double>& x, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (auto j : idx) out.push_back(x[j]);
  return out;
}

inline std::vector<double> line_row(std::size_t n, std::size_t a, std::size_t b, double slope) {
  std::vector<double> row(n, 0.0);
  row[b] += 1.0;
  row[a] -= slope;
  return row;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Certification

enum class Certificate { Optimal, ValidBound };

inline const char* to_string(Certificate c) { return c == Certificate::Optimal ? "Optimal" : "ValidBound"; }

struct CertifiedBound {
  double bound = 0.0;
  Certificate certificate = Certificate::ValidBound;
  double gap = std::numeric_limits<double>::quiet_NaN();  // |bound - candidate objective|
  std::vector<double> x;                                  // optimum of the relaxed LP
};

inline constexpr double kCertificateTolerance = 1e-8;

/// The LP obtained by replacing every band with its tangent pair at `refs[var_a]`.
inline lp::Problem tangent_lp(const EstimationProgram& p, const std::vector<double>& refs,
                              double eps = cs::kDefaultInteriorMargin) {
  lp::Problem lpp = linear_part(p);
  const std::size_t n = p.num_vars();
  for (const auto& c : p.cs) {
    const auto t = cs::tangent_relaxation(refs.at(c.var_a), c.tau, eps);
    if (!(t.lower.slope == 0.0 && t.lower.intercept <= 0.0))
      lpp.add_row(detail::line_row(n, c.var_a, c.var_b, t.lower.slope), t.lower.intercept, lp::kInf);
    if (!(t.upper.slope == 0.0 && t.upper.intercept >= 1.0))
      lpp.add_row(detail::line_row(n, c.var_a, c.var_b, t.upper.slope), -lp::kInf, t.upper.intercept);
  }
  lpp.start.assign(refs.begin(), refs.end());
  for (auto& v : lpp.start) v = std::clamp(v, 0.0, 1.0);
  return lpp;
}

/// Valid bound on the nonlinear optimum (lower for Min, upper for Max) from the
/// tangent relaxation at the reference points. With a candidate objective, the
/// certificate is Optimal when both agree within 1e-8 max(1, |candidate|).
inline CertifiedBound certify(const EstimationProgram& p, const std::vector<double>& refs,
                              std::optional<double> candidate_objective = std::nullopt) {
  if (refs.size() != p.num_vars()) throw DomainError("certify: one reference value per variable is required");
  CertifiedBound out;
  out.x.assign(p.num_vars(), 0.0);
  for (const auto& block : decompose(p)) {
    const auto sol = lp::solve(tangent_lp(block.program, detail::gather(refs, block.vars)));
    if (sol.status != lp::Status::Optimal)
      throw SolverError(std::string("certification LP of ") + to_string(p.kind) + " returned " +
                        lp::to_string(sol.status));
    out.bound += sol.objective;
    for (std::size_t j = 0; j < block.vars.size(); ++j) out.x[block.vars[j]] = sol.x[j];
  }
  if (candidate_objective) {
    out.gap = std::abs(out.bound - *candidate_objective);
    if (out.gap <= kCertificateTolerance * std::max(1.0, std::abs(*candidate_objective)))
      out.certificate = Certificate::Optimal;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidate stage

struct SlpOptions {
  double initial_radius = 0.1;
  double shrink = 0.5;
  double expand = 2.0;
  double max_radius = 0.5;
  double step_tol = 1e-10;       // stop once the trust radius falls below this
  double objective_tol = 1e-12;  // stop after repeated changes below tol * max(1, |objective|)
  int stall_iterations = 3;
  int max_iterations = 200;
  double feasibility_tol = 1e-10;  // accepted violation of an iterate
  double residual_tol = 1e-7;      // required residual of the returned point
  int chord_pieces = 2;            // chords per side of the current point
};

struct CandidateSolution {
  std::vector<double> x;
  double objective = 0.0;
  double residual = 0.0;  // max violation of the linear rows and the true bands
  int iterations = 0;
};

namespace detail {

inline double angle(double y) { return std::asin(std::sqrt(std::clamp(y, 0.0, 1.0))); }

// Inner approximation of every band around the current point: chords of G_- and
// G_+ over pieces of var_a's trust interval on both sides of the current var_a. They
// pass through the band boundary at the current var_a, so a band-feasible iterate
// stays LP-feasible and every LP solution is band-feasible. Sides that can become
// active within the trust region get `per_side` pieces, the others one.
inline void add_chord_rows(lp::Problem& lpp, const EstimationProgram& p, const std::vector<double>& x,
                           const std::vector<double>& lo, const std::vector<double>& hi, int per_side) {
  const std::size_t n = lpp.num_vars();
  std::vector<std::array<double, 2>> pieces;
  auto split = [&](double xa, double l, double h, int count) {
    pieces.clear();
    const double ta = angle(xa);
    for (const double end : {l, h}) {
      const double te = angle(end);
      double prev = xa;
      for (int k = 1; k <= count; ++k) {
        const double t = ta + (te - ta) * k / count;
        const double y = k == count ? end : std::sin(t) * std::sin(t);
        if (end < xa) pieces.push_back({y, prev});
        else pieces.push_back({prev, y});
        prev = y;
      }
    }
  };
  for (const auto& c : p.cs) {
    const double xa = x[c.var_a], xb = x[c.var_b], l = lo[c.var_a], h = hi[c.var_a], z = c.tau;
    if (z >= 1.0) {
      lpp.add_row(line_row(n, c.var_a, c.var_b, 1.0), 0.0, 0.0);
      continue;
    }
    const double reach = hi[c.var_b] - lo[c.var_b];
    if (h > 1.0 - z) {
      const bool near = xb - cs::G_minus(xa, z) <= cs::G_minus(h, z) - cs::G_minus(l, z) + reach;
      split(xa, l, h, near ? per_side : 1);
      bool any = false;
      for (const auto& seg : pieces) {
        if (seg[1] - seg[0] <= 1e-14) continue;
        const auto line = cs::lower_chord(seg[0], seg[1], z);
        lpp.add_row(line_row(n, c.var_a, c.var_b, line.slope), line.intercept, lp::kInf);
        any = true;
      }
      if (!any) lpp.add_row(line_row(n, c.var_a, c.var_b, 0.0), cs::G_minus(xa, z), lp::kInf);
    }
    if (l < z) {
      const bool near = cs::G_plus(xa, z) - xb <= cs::G_plus(h, z) - cs::G_plus(l, z) + reach;
      split(xa, l, h, near ? per_side : 1);
      bool any = false;
      for (const auto& seg : pieces) {
        if (seg[1] - seg[0] <= 1e-14) continue;
        const auto line = cs::upper_chord(seg[0], seg[1], z);
        lpp.add_row(line_row(n, c.var_a, c.var_b, line.slope), -lp::kInf, line.intercept);
        any = true;
      }
      if (!any) lpp.add_row(line_row(n, c.var_a, c.var_b, 0.0), -lp::kInf, cs::G_plus(xa, z));
    }
  }
}

// Trust regions are boxes in the angle t = asin(sqrt(y)). In these coordinates the
// band is |t_a - t_b| <= acos(sqrt(tau)), so its curvature in y is resolved evenly,
// including near 0 and 1 where the slopes diverge.

inline void trust_interval(double y, double radius, double& lo, double& hi) {
  constexpr double half_pi = 1.5707963267948966;
  const double t = angle(y);
  const double a = std::max(0.0, t - radius), b = std::min(half_pi, t + radius);
  lo = std::min(y, a <= 0.0 ? 0.0 : std::sin(a) * std::sin(a));
  hi = std::max(y, b >= half_pi ? 1.0 : std::sin(b) * std::sin(b));
}

// Moves var_b into [G_-(var_a), G_+(var_a)] wherever a band is violated.
inline void project_bands(const EstimationProgram& p, std::vector<double>& x, int sweeps = 50) {
  for (int s = 0; s < sweeps && cs_violation(p, x) > 0.0; ++s)
    for (const auto& c : p.cs) {
      const auto [g_lo, g_hi] = cs::band(std::clamp(x[c.var_a], 0.0, 1.0), c.tau);
      x[c.var_b] = std::clamp(x[c.var_b], g_lo, g_hi);
    }
}

// One trust-region SLP run on a block. With `elastic`, each linear row gets a
// non-negative slack and the objective is the total slack.
inline bool slp_run(const EstimationProgram& p, std::vector<double>& x, const SlpOptions& o, bool elastic,
                    int& iterations) {
  const std::size_t n = p.num_vars();
  const std::size_t m = p.linear.size();
  std::vector<double> slack(elastic ? m : 0, 0.0);
  for (std::size_t i = 0; i < slack.size(); ++i) slack[i] = p.linear[i].violation(x);

  auto objective = [&](const std::vector<double>& v, const std::vector<double>& s) {
    if (elastic) return std::accumulate(s.begin(), s.end(), 0.0);
    return (p.sense == lp::Sense::Maximize ? -1.0 : 1.0) * evaluate_objective(p, v);
  };
  // One radius per variable: a coordinate whose step fills its box grows, the
  // others shrink, so chords refine only where the iterate has settled.
  std::vector<double> r(n, o.initial_radius);
  auto largest = [&] { return n ? *std::max_element(r.begin(), r.end()) : 0.0; };
  double f = objective(x, slack);
  int stall = 0;
  const int pieces = o.chord_pieces;
  while (iterations < o.max_iterations && largest() >= o.step_tol) {
    if (elastic && f <= o.feasibility_tol * 1e-3) return true;
    ++iterations;
    const std::size_t nv = n + slack.size();
    lp::Problem lpp(nv, 0.0, 1.0);
    lpp.sense = lp::Sense::Minimize;
    std::vector<double> lo(n), hi(n);
    for (std::size_t j = 0; j < n; ++j) {
      trust_interval(x[j], r[j], lo[j], hi[j]);
      lpp.lower[j] = lo[j];
      lpp.upper[j] = hi[j];
      lpp.objective[j] = elastic ? 0.0 : (p.sense == lp::Sense::Maximize ? -p.objective[j] : p.objective[j]);
    }
    for (std::size_t i = 0; i < slack.size(); ++i) {
      lpp.upper[n + i] = lp::kInf;
      lpp.objective[n + i] = 1.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto& row = p.linear[i];
      std::vector<double> coeffs(nv, 0.0);
      for (const auto& [j, c] : row.terms) coeffs[j] += c;
      if (elastic) coeffs[n + i] = row.relation == Relation::LessEq ? -1.0 : 1.0;
      if (row.relation == Relation::LessEq) lpp.add_row(std::move(coeffs), -lp::kInf, row.rhs);
      else lpp.add_row(std::move(coeffs), row.rhs, lp::kInf);
    }
    add_chord_rows(lpp, p, x, lo, hi, pieces);
    lpp.start = x;
    lpp.start.insert(lpp.start.end(), slack.begin(), slack.end());

    const auto sol = lp::solve(lpp);
    bool accepted = false;
    if (sol.status == lp::Status::Optimal) {
      std::vector<double> xn(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(n));
      std::vector<double> sn(sol.x.begin() + static_cast<std::ptrdiff_t>(n), sol.x.end());
      for (std::size_t i = 0; i < sn.size(); ++i) sn[i] = std::max(sn[i], p.linear[i].violation(xn));
      double linear_bad = 0.0;
      if (!elastic) linear_bad = linear_violation(p, xn);
      const double fn = objective(xn, sn);
      if (cs_violation(p, xn) <= o.feasibility_tol && linear_bad <= o.feasibility_tol &&
          fn <= f + 1e-15 * std::max(1.0, std::abs(f))) {
        for (std::size_t j = 0; j < n; ++j) {
          const double step = std::abs(angle(xn[j]) - angle(x[j]));
          r[j] = step >= 0.9 * r[j] ? std::min(r[j] * o.expand, o.max_radius) : std::max(r[j] * o.shrink, 0.1 * o.step_tol);
        }
        stall = std::abs(fn - f) <= o.objective_tol * std::max(1.0, std::abs(f)) ? stall + 1 : 0;
        x = std::move(xn);
        slack = std::move(sn);
        f = fn;
        accepted = true;
        if (stall >= o.stall_iterations) break;
      }
    }
    if (!accepted)
      for (auto& v : r) v *= o.shrink;
  }
  return !elastic || f <= o.feasibility_tol;
}

}  // namespace detail

/// Nonlinear candidate for one program. Runs a trust-region SLP per independent
/// block from `start` (a band projection and an elastic phase first restore
/// feasibility if needed). Throws NoFeasibleCandidate when no point with residual
/// <= residual_tol is found.
inline CandidateSolution slp_candidate(const EstimationProgram& p, const std::vector<double>& start,
                                       const SlpOptions& options = {}) {
  if (start.size() != p.num_vars()) throw DomainError("slp_candidate: start must give one value per variable");
  CandidateSolution out;
  out.x.assign(p.num_vars(), 0.0);
  for (const auto& block : decompose(p)) {
    const auto& bp = block.program;
    std::vector<double> x = detail::gather(start, block.vars);
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
    detail::project_bands(bp, x);
    int iters = 0;
    if (linear_violation(bp, x) > options.feasibility_tol)
      if (!detail::slp_run(bp, x, options, true, iters))
        throw NoFeasibleCandidate(std::string("no feasible start found for ") + to_string(p.kind));
    detail::slp_run(bp, x, options, false, iters);
    detail::project_bands(bp, x);
    out.iterations = std::max(out.iterations, iters);
    for (std::size_t j = 0; j < block.vars.size(); ++j) out.x[block.vars[j]] = x[j];
  }
  out.objective = evaluate_objective(p, out.x);
  out.residual = std::max(linear_violation(p, out.x), cs_violation(p, out.x));
  if (out.residual > options.residual_tol)
    throw NoFeasibleCandidate(std::string("candidate for ") + to_string(p.kind) + " violates the constraints");
  return out;
}

/// Pluggable nonlinear stage; any solver returning a near-feasible point can be used,
/// since certification makes the final bound valid regardless.
class CandidateSolver {
 public:
  virtual ~CandidateSolver() = default;
  virtual CandidateSolution solve(const EstimationProgram& program, const std::vector<double>& start) const = 0;
};

class SlpCandidateSolver final : public CandidateSolver {
 public:
  explicit SlpCandidateSolver(SlpOptions options = {}) : options_(options) {}
  CandidateSolution solve(const EstimationProgram& program, const std::vector<double>& start) const override {
    return slp_candidate(program, start, options_);
  }

 private:
  SlpOptions options_;
};

// ---------------------------------------------------------------------------
// Grid oracle

inline constexpr std::size_t kGridOracleMaxVars = 6;
inline constexpr double kGridOracleMaxPoints = 1e8;

namespace detail {

// Best objective over the vertices of {y in [lo, hi] : rows}, by enumerating every
// choice of active rows and free coordinates. Returns nullopt when infeasible.
struct SmallRow {
  std::vector<double> c;
  double lo, hi;
};

inline std::optional<double> small_lp(const std::vector<double>& obj, const std::vector<double>& lo,
                                      const std::vector<double>& hi, const std::vector<SmallRow>& rows,
                                      bool maximize, double tol = 1e-12) {
  const std::size_t n = lo.size(), m = rows.size();
  std::optional<double> best;
  auto consider = [&](const std::vector<double>& y) {
    for (std::size_t j = 0; j < n; ++j)
      if (y[j] < lo[j] - tol || y[j] > hi[j] + tol) return;
    for (const auto& r : rows) {
      double a = 0.0;
      for (std::size_t j = 0; j < n; ++j) a += r.c[j] * y[j];
      if (a < r.lo - tol || a > r.hi + tol) return;
    }
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) v += obj[j] * y[j];
    if (!best || (maximize ? v > *best : v < *best)) best = v;
  };
  // Each row can be active at its lower or upper side.
  const std::size_t codes = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(m)));
  for (std::size_t code = 0; code < codes; ++code) {
    std::vector<std::pair<std::size_t, double>> active;
    std::size_t cc = code;
    bool valid = true;
    for (std::size_t i = 0; i < m; ++i, cc /= 3) {
      const std::size_t side = cc % 3;
      if (side == 0) continue;
      const double b = side == 1 ? rows[i].lo : rows[i].hi;
      if (!std::isfinite(b)) valid = false;
      active.emplace_back(i, b);
    }
    if (!valid || active.size() > n) continue;
    const std::size_t k = active.size();
    // choose k free coordinates; the rest sit at a bound
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::vector<std::size_t> freev, fixed;
      for (std::size_t j = 0; j < n; ++j) (pick[j] ? freev : fixed).push_back(j);
      for (std::size_t mask = 0; mask < (std::size_t{1} << fixed.size()); ++mask) {
        std::vector<double> y(n, 0.0);
        for (std::size_t t = 0; t < fixed.size(); ++t) y[fixed[t]] = (mask >> t) & 1 ? hi[fixed[t]] : lo[fixed[t]];
        if (k > 0) {
          Eigen::MatrixXd a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
          Eigen::VectorXd b(static_cast<Eigen::Index>(k));
          for (std::size_t i = 0; i < k; ++i) {
            double rhs = active[i].second;
            for (auto j : fixed) rhs -= rows[active[i].first].c[j] * y[j];
            b(static_cast<Eigen::Index>(i)) = rhs;
            for (std::size_t t = 0; t < k; ++t)
              a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[active[i].first].c[freev[t]];
          }
          Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
          if (!lu.isInvertible()) continue;
          const Eigen::VectorXd sol = lu.solve(b);
          for (std::size_t t = 0; t < k; ++t) y[freev[t]] = sol(static_cast<Eigen::Index>(t));
        }
        consider(y);
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return best;
}

// Largest y in [0, 1] with f(y) <= target for a non-decreasing f (or -1 if none).
template <class F>
double monotone_last_below(F f, double target) {
  if (f(0.0) > target) return -1.0;
  if (f(1.0) <= target) return 1.0;
  double a = 0.0, b = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (a + b);
    (f(mid) <= target ? a : b) = mid;
  }
  return a;
}

// Smallest y in [0, 1] with f(y) >= target for a non-decreasing f (or 2 if none).
template <class F>
double monotone_first_above(F f, double target) {
  if (f(1.0) < target) return 2.0;
  if (f(0.0) >= target) return 0.0;
  double a = 0.0, b = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (a + b);
    (f(mid) >= target ? b : a) = mid;
  }
  return b;
}

}  // namespace detail

/// Relaxed: every constraint is loosened by what a half-step move of the gridded
/// variables can change, giving a bound on the optimum (lower for Min). Feasible:
/// grid points must satisfy the constraints exactly, giving the value of a feasible
/// point (upper for Min).
enum class GridBound { Relaxed, Feasible };

/// Exhaustive grid search for programs with at most six variables. Variables are
/// split into the two colour classes of the band graph; the class carrying the
/// objective is scanned on the grid and the other class is eliminated exactly
/// (band intervals plus a small vertex-enumeration LP). The two modes bracket the
/// true optimum. Cost O((1/step)^k) for k gridded variables. Returns nullopt when
/// no grid point is feasible.
inline std::optional<double> grid_oracle(const EstimationProgram& p, double grid_step,
                                         GridBound mode = GridBound::Relaxed) {
  const std::size_t n = p.num_vars();
  if (n > kGridOracleMaxVars) throw TooManyVariables("grid_oracle supports at most 6 variables");
  if (!(grid_step > 0.0 && grid_step <= 0.5)) throw DomainError("grid_oracle: grid step must lie in (0, 0.5]");

  // Two-colour the band graph; fall back to gridding everything if it is not bipartite.
  std::vector<int> colour(n, -1);
  bool bipartite = true;
  for (std::size_t s = 0; s < n; ++s) {
    if (colour[s] >= 0) continue;
    colour[s] = 0;
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& c : p.cs) {
        std::size_t v;
        if (c.var_a == u) v = c.var_b;
        else if (c.var_b == u) v = c.var_a;
        else continue;
        if (colour[v] < 0) {
          colour[v] = 1 - colour[u];
          stack.push_back(v);
        } else if (colour[v] == colour[u]) {
          bipartite = false;
        }
      }
    }
  }
  std::vector<bool> gridded(n, true);
  if (bipartite) {
    // The gridded class must contain every objective variable.
    int obj_colour = -1;
    bool mixed = false;
    for (std::size_t j = 0; j < n; ++j)
      if (p.objective[j] != 0.0) {
        if (obj_colour < 0) obj_colour = colour[j];
        else if (obj_colour != colour[j]) mixed = true;
      }
    if (!mixed) {
      if (obj_colour < 0) obj_colour = 0;
      for (std::size_t j = 0; j < n; ++j) gridded[j] = colour[j] == obj_colour;
    }
  }
  std::vector<std::size_t> gv, ev;
  for (std::size_t j = 0; j < n; ++j) (gridded[j] ? gv : ev).push_back(j);

  const auto steps = static_cast<std::size_t>(std::floor(1.0 / grid_step + 1e-9));
  std::vector<double> levels;
  for (std::size_t i = 0; i <= steps; ++i) levels.push_back(std::min(1.0, static_cast<double>(i) * grid_step));
  if (levels.back() < 1.0) levels.push_back(1.0);
  if (std::pow(static_cast<double>(levels.size()), static_cast<double>(gv.size())) > kGridOracleMaxPoints)
    throw TooManyVariables("grid_oracle: grid too large for the gridded variables");
  const double h = mode == GridBound::Relaxed ? 0.5 * grid_step : 0.0;
  const bool maximize = p.sense == lp::Sense::Maximize;

  // Per band and grid level, relaxed interval of the eliminated endpoint.
  struct BandInterval {
    std::size_t g = 0, e = 0;
    std::vector<double> lo, hi;
  };
  std::vector<BandInterval> intervals;
  std::vector<std::size_t> grid_bands;  // bands between two gridded variables
  for (std::size_t bi = 0; bi < p.cs.size(); ++bi) {
    const auto& c = p.cs[bi];
    if (gridded[c.var_a] && gridded[c.var_b]) {
      grid_bands.push_back(bi);
      continue;
    }
    BandInterval iv;
    const double z = c.tau;
    if (gridded[c.var_a]) {
      // G_-(x) <= y <= G_+(x); both monotone non-decreasing in x
      iv.g = c.var_a;
      iv.e = c.var_b;
      for (double x : levels) {
        iv.lo.push_back(cs::G_minus(std::max(0.0, x - h), z));
        iv.hi.push_back(cs::G_plus(std::min(1.0, x + h), z));
      }
    } else {
      // G_-(y) <= x <= G_+(y), solved for y
      iv.g = c.var_b;
      iv.e = c.var_a;
      for (double x : levels) {
        const double up = detail::monotone_last_below([z](double y) { return cs::G_minus(y, z); }, std::min(1.0, x + h));
        const double dn = detail::monotone_first_above([z](double y) { return cs::G_plus(y, z); }, std::max(0.0, x - h));
        iv.lo.push_back(dn);
        iv.hi.push_back(up);
      }
    }
    intervals.push_back(std::move(iv));
  }
  std::vector<std::size_t> epos(n, 0);
  for (std::size_t t = 0; t < ev.size(); ++t) epos[ev[t]] = t;

  std::optional<double> best;
  std::vector<std::size_t> idx(gv.size(), 0);
  std::vector<double> x(n, 0.0);
  std::vector<std::size_t> level_of(n, 0);
  while (true) {
    for (std::size_t t = 0; t < gv.size(); ++t) {
      x[gv[t]] = levels[idx[t]];
      level_of[gv[t]] = idx[t];
    }
    bool ok = true;
    for (auto bi : grid_bands) {
      const auto& c = p.cs[bi];
      // relaxed: some point within h of the grid point satisfies the band
      const double lo = cs::G_minus(std::max(0.0, x[c.var_a] - h), c.tau);
      const double hi = cs::G_plus(std::min(1.0, x[c.var_a] + h), c.tau);
      if (x[c.var_b] + h < lo || x[c.var_b] - h > hi) ok = false;
    }
    std::vector<double> elo(ev.size(), 0.0), ehi(ev.size(), 1.0);
    for (const auto& iv : intervals) {
      if (!ok) break;
      const std::size_t t = epos[iv.e];
      elo[t] = std::max(elo[t], iv.lo[level_of[iv.g]]);
      ehi[t] = std::min(ehi[t], iv.hi[level_of[iv.g]]);
      if (elo[t] > ehi[t]) ok = false;
    }
    std::vector<detail::SmallRow> rows;
    for (const auto& row : p.linear) {
      if (!ok) break;
      double fixed = 0.0, relax = 0.0;
      std::vector<double> ce(ev.size(), 0.0);
      for (const auto& [j, c] : row.terms) {
        if (gridded[j]) {
          fixed += c * x[j];
          relax += std::abs(c) * h;
        } else {
          ce[epos[j]] += c;
        }
      }
      const double lo = row.relation == Relation::GreaterEq ? row.rhs - fixed - relax : -lp::kInf;
      const double hi = row.relation == Relation::LessEq ? row.rhs - fixed + relax : lp::kInf;
      if (std::all_of(ce.begin(), ce.end(), [](double v) { return v == 0.0; })) {
        if (0.0 < lo - 1e-15 || 0.0 > hi + 1e-15) ok = false;
        continue;
      }
      rows.push_back({std::move(ce), lo, hi});
    }
    if (ok) {
      double fx = 0.0;
      for (auto j : gv) fx += p.objective[j] * x[j];
      std::vector<double> oe(ev.size(), 0.0);
      for (auto j : ev) oe[epos[j]] = p.objective[j];
      std::optional<double> fe = ev.empty() ? std::optional<double>(0.0)
                                            : detail::small_lp(oe, elo, ehi, rows, maximize);
      if (fe) {
        const double v = fx + *fe;
        if (!best || (maximize ? v > *best : v < *best)) best = v;
      }
    }
    std::size_t t = gv.size();
    while (t > 0 && ++idx[t - 1] == levels.size()) idx[--t] = 0;
    if (t == 0) break;
  }
  return best;
}

}  // namespace qkdcs
