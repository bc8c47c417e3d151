#pragma once

// Dense bounded primal simplex for the small linear programs of the estimation
// stages (tens of variables, a few hundred rows).
//
// Every row i carries a logical variable r_i = a_i^T x bounded by the row bounds,
// so the constraint matrix is [A, -I] and all bounds live on variables. Rows that
// the starting point violates get an artificial column; phase 1 drives them to 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qkdcs/errors.hpp"

namespace qkdcs::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };
enum class Sense { Minimize, Maximize };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct Problem {
  Sense sense = Sense::Minimize;
  std::vector<double> objective;
  std::vector<double> lower, upper;  // variable bounds
  std::vector<std::vector<double>> rows;
  std::vector<double> row_lower, row_upper;
  /// Optional starting point. Variables strictly inside their bounds start as
  /// nonbasic superbasics, so a feasible start needs no phase 1.
  std::vector<double> start;

  explicit Problem(std::size_t n = 0, double lo = 0.0, double hi = 1.0)
      : objective(n, 0.0), lower(n, lo), upper(n, hi) {}

  std::size_t num_vars() const { return objective.size(); }
  std::size_t num_rows() const { return rows.size(); }
  void add_row(std::vector<double> coeffs, double lo, double hi) {
    if (coeffs.size() != num_vars()) throw DomainError("lp: row length must equal the number of variables");
    rows.push_back(std::move(coeffs));
    row_lower.push_back(lo);
    row_upper.push_back(hi);
  }
};

struct Options {
  double feasibility_tol = 1e-12;  // Harris relaxation, in scaled row units
  double optimality_tol = 1e-12;   // reduced-cost threshold, scaled objective
  double pivot_tol = 1e-9;
  double phase1_tol = 1e-10;
  double violation_tol = 1e-8;  // maximal accepted residual of the returned point
  int refactor_interval = 64;
  int degenerate_limit = 30;  // consecutive degenerate pivots before switching to Bland's rule
  int max_iterations = 0;     // 0: 100 (m + n) + 1000
};

struct Solution {
  Status status = Status::NumericalFailure;
  double objective = 0.0;
  std::vector<double> x;
  double max_violation = 0.0;
  int iterations = 0;
  std::vector<double> row_duals;  // multipliers of the rows for the stated objective
};

/// Maximal violation of the row and variable bounds at x.
inline double max_violation(const Problem& p, const std::vector<double>& x) {
  double v = 0.0;
  for (std::size_t j = 0; j < p.num_vars(); ++j) v = std::max({v, p.lower[j] - x[j], x[j] - p.upper[j]});
  for (std::size_t i = 0; i < p.num_rows(); ++i) {
    double act = 0.0;
    for (std::size_t j = 0; j < p.num_vars(); ++j) act += p.rows[i][j] * x[j];
    v = std::max({v, p.row_lower[i] - act, act - p.row_upper[i]});
  }
  return v;
}

namespace detail {

class Simplex {
 public:
  Simplex(const Problem& p, const Options& o) : prob_(p), opt_(o) {
    m_ = p.num_rows();
    n_ = p.num_vars();
    for (std::size_t j = 0; j < n_; ++j)
      if (p.lower[j] > p.upper[j]) infeasible_bounds_ = true;
    for (std::size_t i = 0; i < m_; ++i)
      if (p.row_lower[i] > p.row_upper[i]) infeasible_bounds_ = true;

    a_.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
    row_scale_.assign(m_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (double v : p.rows[i]) s = std::max(s, std::abs(v));
      if (s > 0.0) row_scale_[i] = 1.0 / s;
      for (std::size_t j = 0; j < n_; ++j)
        a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p.rows[i][j] * row_scale_[i];
    }
    double cmax = 0.0;
    for (double v : p.objective) cmax = std::max(cmax, std::abs(v));
    obj_scale_ = cmax > 0.0 ? 1.0 / cmax : 1.0;
    const double sign = p.sense == Sense::Maximize ? -1.0 : 1.0;

    // Variables: structurals, logicals, then artificials.
    for (std::size_t j = 0; j < n_; ++j) {
      lo_.push_back(p.lower[j]);
      hi_.push_back(p.upper[j]);
      cost_.push_back(sign * p.objective[j] * obj_scale_);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      lo_.push_back(p.row_lower[i] * row_scale_[i]);
      hi_.push_back(p.row_upper[i] * row_scale_[i]);
      cost_.push_back(0.0);
    }
  }

  Solution run() {
    Solution sol;
    if (infeasible_bounds_) {
      sol.status = Status::Infeasible;
      return sol;
    }
    start();
    const std::size_t total = lo_.size();
    std::vector<double> phase1(total, 0.0);
    for (std::size_t k = n_ + m_; k < total; ++k) phase1[k] = 1.0;
    if (total > n_ + m_) {
      const Status s = iterate(phase1);
      if (s != Status::Optimal) return fail(s);
      recompute();
      double infeas = 0.0;
      for (std::size_t k = n_ + m_; k < total; ++k) infeas += std::abs(x_[k]);
      if (infeas > opt_.phase1_tol) {
        sol.status = Status::Infeasible;
        sol.iterations = iterations_;
        return sol;
      }
      for (std::size_t k = n_ + m_; k < total; ++k) {
        lo_[k] = hi_[k] = 0.0;
        if (state_[k] != State::Basic) {
          state_[k] = State::Lower;
          x_[k] = 0.0;
        }
      }
    }
    const Status s = iterate(cost_);
    if (s != Status::Optimal) return fail(s);
    refactor();
    recompute();

    sol.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t j = 0; j < n_; ++j) sol.x[j] = std::clamp(sol.x[j], prob_.lower[j], prob_.upper[j]);
    sol.max_violation = max_violation(prob_, sol.x);
    sol.iterations = iterations_;
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += prob_.objective[j] * sol.x[j];
    sol.status = sol.max_violation <= opt_.violation_tol ? Status::Optimal : Status::NumericalFailure;
    if (m_ > 0) {
      Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
      for (std::size_t i = 0; i < m_; ++i) cb(static_cast<Eigen::Index>(i)) = cost_[basis_[i]];
      const Eigen::VectorXd y = binv_.transpose() * cb;
      const double sign = prob_.sense == Sense::Maximize ? -1.0 : 1.0;
      sol.row_duals.resize(m_);
      for (std::size_t i = 0; i < m_; ++i)
        sol.row_duals[i] = sign * y(static_cast<Eigen::Index>(i)) * row_scale_[i] / obj_scale_;
    }
    return sol;
  }

 private:
  enum class State : unsigned char { Basic, Lower, Upper, Between };

  const Problem& prob_;
  Options opt_;
  std::size_t m_ = 0, n_ = 0;
  bool infeasible_bounds_ = false;
  Eigen::MatrixXd a_;
  std::vector<double> row_scale_;
  double obj_scale_ = 1.0;
  std::vector<double> lo_, hi_, cost_, x_;
  std::vector<std::size_t> art_row_;
  std::vector<double> art_sign_;
  std::vector<State> state_;
  std::vector<std::size_t> basis_;
  Eigen::MatrixXd binv_;
  int iterations_ = 0;
  int since_refactor_ = 0;

  Solution fail(Status s) const {
    Solution sol;
    sol.status = s;
    sol.iterations = iterations_;
    return sol;
  }

  // Column j of [A, -I, artificials] as a dense vector.
  Eigen::VectorXd column(std::size_t j) const {
    if (j < n_) return a_.col(static_cast<Eigen::Index>(j));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    if (j < n_ + m_) {
      e(static_cast<Eigen::Index>(j - n_)) = -1.0;
    } else {
      const std::size_t k = j - n_ - m_;
      e(static_cast<Eigen::Index>(art_row_[k])) = art_sign_[k];
    }
    return e;
  }

  Eigen::VectorXd ftran(std::size_t j) const {
    if (j < n_) return binv_ * a_.col(static_cast<Eigen::Index>(j));
    if (j < n_ + m_) return -binv_.col(static_cast<Eigen::Index>(j - n_));
    const std::size_t k = j - n_ - m_;
    return art_sign_[k] * binv_.col(static_cast<Eigen::Index>(art_row_[k]));
  }

  double reduced_cost(std::size_t j, const std::vector<double>& cost, const Eigen::VectorXd& y) const {
    if (j < n_) return cost[j] - a_.col(static_cast<Eigen::Index>(j)).dot(y);
    if (j < n_ + m_) return cost[j] + y(static_cast<Eigen::Index>(j - n_));
    const std::size_t k = j - n_ - m_;
    return cost[j] - art_sign_[k] * y(static_cast<Eigen::Index>(art_row_[k]));
  }

  void start() {
    x_.assign(n_ + m_, 0.0);
    state_.assign(n_ + m_, State::Lower);
    for (std::size_t j = 0; j < n_; ++j) {
      double v = prob_.start.empty() ? (std::isfinite(lo_[j]) ? lo_[j] : std::isfinite(hi_[j]) ? hi_[j] : 0.0)
                                     : std::clamp(prob_.start[j], lo_[j], hi_[j]);
      x_[j] = v;
      state_[j] = v == lo_[j] ? State::Lower : v == hi_[j] ? State::Upper : State::Between;
    }
    basis_.assign(m_, 0);
    std::vector<double> diag(m_, -1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double act = 0.0;
      for (std::size_t j = 0; j < n_; ++j) act += a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x_[j];
      const std::size_t li = n_ + i;
      x_[li] = act;
      if (act >= lo_[li] && act <= hi_[li]) {
        state_[li] = State::Basic;
        basis_[i] = li;
        continue;
      }
      // The logical sits at the violated bound; an artificial absorbs the residual.
      const double b = act < lo_[li] ? lo_[li] : hi_[li];
      state_[li] = act < lo_[li] ? State::Lower : State::Upper;
      x_[li] = b;
      const double sigma = b - act > 0.0 ? 1.0 : -1.0;
      art_row_.push_back(i);
      art_sign_.push_back(sigma);
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      cost_.push_back(0.0);
      x_.push_back(std::abs(b - act));
      state_.push_back(State::Basic);
      basis_[i] = lo_.size() - 1;
      diag[i] = sigma;
    }
    binv_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) binv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 / diag[i];
  }

  void refactor() {
    since_refactor_ = 0;
    if (m_ == 0) return;
    Eigen::MatrixXd b(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) b.col(static_cast<Eigen::Index>(i)) = column(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    binv_ = lu.inverse();
  }

  // x_B = -B^{-1} N x_N
  void recompute() {
    if (m_ == 0) return;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < lo_.size(); ++j)
      if (state_[j] != State::Basic && x_[j] != 0.0) rhs -= column(j) * x_[j];
    const Eigen::VectorXd xb = binv_ * rhs;
    for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] = xb(static_cast<Eigen::Index>(i));
  }

  Status iterate(const std::vector<double>& cost) {
    const int max_iter =
        opt_.max_iterations > 0 ? opt_.max_iterations : static_cast<int>(100 * (m_ + n_) + 1000);
    int degenerate = 0;
    const auto mi = static_cast<Eigen::Index>(m_);
    while (true) {
      if (iterations_ >= max_iter) return Status::NumericalFailure;
      if (since_refactor_ >= opt_.refactor_interval) {
        refactor();
        recompute();
      }
      Eigen::VectorXd cb(mi);
      for (std::size_t i = 0; i < m_; ++i) cb(static_cast<Eigen::Index>(i)) = cost[basis_[i]];
      const Eigen::VectorXd y = binv_.transpose() * cb;
      const double dtol = opt_.optimality_tol * std::max(1.0, y.size() ? y.cwiseAbs().maxCoeff() : 0.0);
      const bool bland = degenerate > opt_.degenerate_limit;

      std::size_t enter = lo_.size();
      double best = 0.0, dir = 0.0;
      for (std::size_t j = 0; j < lo_.size(); ++j) {
        if (state_[j] == State::Basic || lo_[j] == hi_[j]) continue;
        const double d = reduced_cost(j, cost, y);
        double dj = 0.0;
        if ((state_[j] == State::Lower || state_[j] == State::Between) && d < -dtol) dj = 1.0;
        else if ((state_[j] == State::Upper || state_[j] == State::Between) && d > dtol) dj = -1.0;
        if (dj == 0.0) continue;
        if (bland) {
          enter = j;
          dir = dj;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          dir = dj;
        }
      }
      if (enter == lo_.size()) return Status::Optimal;

      const Eigen::VectorXd alpha = ftran(enter);
      const double flip = dir > 0.0 ? hi_[enter] - x_[enter] : x_[enter] - lo_[enter];
      const double ftol = opt_.feasibility_tol;

      // Harris pass 1: largest step keeping all basics within relaxed bounds.
      double relaxed = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double ai = dir * alpha(static_cast<Eigen::Index>(i));
        if (std::abs(ai) <= opt_.pivot_tol) continue;
        const std::size_t b = basis_[i];
        if (ai > 0.0 && std::isfinite(lo_[b])) relaxed = std::min(relaxed, std::max(0.0, (x_[b] - lo_[b] + ftol) / ai));
        if (ai < 0.0 && std::isfinite(hi_[b])) relaxed = std::min(relaxed, std::max(0.0, (hi_[b] - x_[b] + ftol) / -ai));
      }
      if (!std::isfinite(relaxed) && !std::isfinite(flip)) return Status::Unbounded;

      std::size_t leave = m_;
      double theta;
      if (flip <= relaxed) {
        theta = flip;
      } else {
        // Pass 2: among ratios within the relaxed step, the largest pivot.
        double piv = 0.0;
        theta = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          const double ai = dir * alpha(static_cast<Eigen::Index>(i));
          if (std::abs(ai) <= opt_.pivot_tol) continue;
          const std::size_t b = basis_[i];
          double t = kInf;
          if (ai > 0.0 && std::isfinite(lo_[b])) t = std::max(0.0, (x_[b] - lo_[b]) / ai);
          if (ai < 0.0 && std::isfinite(hi_[b])) t = std::max(0.0, (hi_[b] - x_[b]) / -ai);
          if (t > relaxed) continue;
          const bool better = bland ? (leave == m_ || basis_[i] < basis_[leave]) && std::abs(ai) > opt_.pivot_tol
                                    : std::abs(ai) > piv;
          if (better) {
            piv = std::abs(ai);
            leave = i;
            theta = t;
          }
        }
        if (leave == m_) return Status::NumericalFailure;
      }

      ++iterations_;
      degenerate = theta <= 1e-14 ? degenerate + 1 : 0;
      for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] -= dir * theta * alpha(static_cast<Eigen::Index>(i));
      x_[enter] += dir * theta;
      if (leave == m_) {
        state_[enter] = dir > 0.0 ? State::Upper : State::Lower;
        x_[enter] = dir > 0.0 ? hi_[enter] : lo_[enter];
        continue;
      }
      const std::size_t out = basis_[leave];
      const double ai = dir * alpha(static_cast<Eigen::Index>(leave));
      state_[out] = ai > 0.0 ? State::Lower : State::Upper;
      x_[out] = ai > 0.0 ? lo_[out] : hi_[out];
      state_[enter] = State::Basic;
      basis_[leave] = enter;

      // Product-form update of the explicit inverse.
      const auto r = static_cast<Eigen::Index>(leave);
      const double pivot = alpha(r);
      binv_.row(r) /= pivot;
      const Eigen::RowVectorXd prow = binv_.row(r);
      for (Eigen::Index i = 0; i < mi; ++i)
        if (i != r && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * prow;
      ++since_refactor_;
    }
  }
};

}  // namespace detail

/// Solves min/max c^T x subject to row and variable bounds. Deterministic.
inline Solution solve(const Problem& problem, const Options& options = {}) {
  if ((!problem.start.empty() && problem.start.size() != problem.num_vars()) ||
      problem.lower.size() != problem.num_vars() || problem.upper.size() != problem.num_vars() ||
      problem.row_lower.size() != problem.num_rows() || problem.row_upper.size() != problem.num_rows())
    throw DomainError("lp: inconsistent problem dimensions");
  detail::Simplex s(problem, options);
  Solution sol = s.run();
  if (sol.status == Status::NumericalFailure && !problem.start.empty()) {
    // A warm start can leave basics just outside their bounds; retry from the slack basis.
    Problem cold = problem;
    cold.start.clear();
    const int warm_iterations = sol.iterations;
    sol = detail::Simplex(cold, options).run();
    sol.iterations += warm_iterations;
  }
  return sol;
}

}  // namespace qkdcs::lp
