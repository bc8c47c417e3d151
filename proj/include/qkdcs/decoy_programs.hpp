#pragma once

// Estimation programs for the single-photon yield (P1: Z basis, P2: X basis) and the
// single-photon error rate (P3: X basis) as solver-agnostic data: a linear objective,
// linear rows from the decoy observables and Cauchy-Schwarz bands between settings.

#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qkdcs/channel_sim.hpp"
#include "qkdcs/core_model.hpp"
#include "qkdcs/cs_math.hpp"
#include "qkdcs/errors.hpp"
#include "qkdcs/lp_solver.hpp"
#include "qkdcs/photon_stats.hpp"

namespace qkdcs {

enum class ProblemKind { P1, P2, P3 };
enum class VarKind { YieldZ, YieldX, ErrX };

inline const char* to_string(ProblemKind p) {
  switch (p) {
    case ProblemKind::P1: return "P1";
    case ProblemKind::P2: return "P2";
    case ProblemKind::P3: return "P3";
  }
  return "?";
}

inline VarKind variable_kind(ProblemKind p) {
  return p == ProblemKind::P1 ? VarKind::YieldZ : p == ProblemKind::P2 ? VarKind::YieldX : VarKind::ErrX;
}

struct VariableIndex {
  VarKind kind = VarKind::YieldZ;
  int n = 0;
  std::size_t setting = 0;  // ignored by the standard program
  std::optional<std::size_t> history;
  bool operator==(const VariableIndex&) const = default;
};

enum class Relation { LessEq, GreaterEq };

struct LinearConstraint {
  std::vector<std::pair<std::size_t, double>> terms;
  Relation relation = Relation::LessEq;
  double rhs = 0.0;
  std::string label;

  double activity(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& [j, c] : terms) s += c * x[j];
    return s;
  }
  double violation(const std::vector<double>& x) const {
    const double act = activity(x);
    return std::max(0.0, relation == Relation::LessEq ? act - rhs : rhs - act);
  }
};

/// G_-(x[var_a], tau) <= x[var_b] <= G_+(x[var_a], tau).
struct CsConstraint {
  std::size_t var_a = 0;
  std::size_t var_b = 0;
  double tau = 1.0;
};

/// Every variable is box-bounded to [0, 1].
struct EstimationProgram {
  ProblemKind kind = ProblemKind::P1;
  lp::Sense sense = lp::Sense::Minimize;
  std::vector<VariableIndex> variables;
  std::vector<double> objective;
  std::vector<LinearConstraint> linear;
  std::vector<CsConstraint> cs;
  /// Multiplying the objective by this gives the physical single-photon quantity.
  double quantity_scale = 1.0;

  std::size_t num_vars() const { return variables.size(); }
  std::optional<std::size_t> find(const VariableIndex& v) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
      if (variables[i] == v) return i;
    return std::nullopt;
  }
};

inline double evaluate_objective(const EstimationProgram& p, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.num_vars(); ++j) s += p.objective[j] * x[j];
  return s;
}

inline double linear_violation(const EstimationProgram& p, const std::vector<double>& x) {
  double v = 0.0;
  for (std::size_t j = 0; j < p.num_vars(); ++j) v = std::max({v, -x[j], x[j] - 1.0});
  for (const auto& row : p.linear) v = std::max(v, row.violation(x));
  return v;
}

inline double cs_violation(const EstimationProgram& p, const std::vector<double>& x) {
  double v = 0.0;
  for (const auto& c : p.cs) v = std::max(v, cs::band_violation(x[c.var_a], x[c.var_b], c.tau));
  return v;
}

/// The physical point: Fock-state yields or error rates of the channel model.
inline std::vector<double> reference_point(const EstimationProgram& p, const CanonicalReferences& refs) {
  std::vector<double> x;
  for (const auto& v : p.variables)
    x.push_back(v.kind == VarKind::ErrX ? refs.error.at(static_cast<std::size_t>(v.n))
                                        : refs.yield.at(static_cast<std::size_t>(v.n)));
  return x;
}

/// Linear rows and boxes as an LP, without the bands.
inline lp::Problem linear_part(const EstimationProgram& p) {
  lp::Problem lpp(p.num_vars(), 0.0, 1.0);
  lpp.sense = p.sense;
  lpp.objective = p.objective;
  for (const auto& row : p.linear) {
    std::vector<double> coeffs(p.num_vars(), 0.0);
    for (const auto& [j, c] : row.terms) coeffs[j] += c;
    if (row.relation == Relation::LessEq) lpp.add_row(std::move(coeffs), -lp::kInf, row.rhs);
    else lpp.add_row(std::move(coeffs), row.rhs, lp::kInf);
  }
  return lpp;
}

namespace detail {

inline double observed(const SettingObservables& o, ProblemKind p) {
  return p == ProblemKind::P1 ? o.z_norm : p == ProblemKind::P2 ? o.x_norm : o.e_norm;
}

// Lower and upper decoy rows of one (setting, history) block of variables first..first+n_cut.
inline void add_decoy_rows(EstimationProgram& prog, std::size_t first, const PhotonRow& row, double obs,
                           const std::string& label) {
  LinearConstraint lower, upper;
  for (std::size_t n = 0; n < row.lower.size(); ++n) {
    lower.terms.emplace_back(first + n, row.lower[n]);
    upper.terms.emplace_back(first + n, row.upper[n]);
  }
  lower.relation = Relation::LessEq;
  lower.rhs = obs;
  lower.label = label + ".lower";
  upper.relation = Relation::GreaterEq;
  upper.rhs = obs - row.tail_upper;
  upper.label = label + ".upper";
  prog.linear.push_back(std::move(lower));
  prog.linear.push_back(std::move(upper));
}

inline double basis_weight(const BasisConfig& basis, ProblemKind p) {
  const double q = p == ProblemKind::P1 ? basis.q_z : basis.q_x;
  return q * q;
}

}  // namespace detail

/// Uncorrelated decoy program: yields Y_n shared by all settings, two rows per setting.
inline EstimationProgram build_standard_lp(ProblemKind kind, const Observables& obs, const PhotonBounds& bounds,
                                           const IntensitySet& intensities, const BasisConfig& basis) {
  EstimationProgram prog;
  prog.kind = kind;
  prog.sense = kind == ProblemKind::P3 ? lp::Sense::Maximize : lp::Sense::Minimize;
  const int n_cut = bounds.n_cut;
  for (int n = 0; n <= n_cut; ++n) prog.variables.push_back({variable_kind(kind), n, 0, std::nullopt});
  prog.objective.assign(prog.num_vars(), 0.0);
  prog.objective[1] = 1.0;
  for (std::size_t a = 0; a < intensities.size(); ++a)
    detail::add_decoy_rows(prog, 0, bounds.row(a), detail::observed(obs.at(a), kind), intensities[a].label);
  const std::size_t mu = intensities.signal_index();
  const auto& r = bounds.row(mu);
  prog.quantity_scale = detail::basis_weight(basis, kind) * intensities[mu].probability *
                        (kind == ProblemKind::P3 ? r.upper[1] : r.lower[1]);
  return prog;
}

/// Coarse formulation: variables (setting, n), bands for all ordered pairs a != b.
inline EstimationProgram build_coarse(ProblemKind kind, const Observables& obs, const PhotonBounds& bounds,
                                      const TauTable& tau, const ModelConfig& config) {
  if (!(bounds.tag == tau.tag) || bounds.n_cut != tau.n_cut)
    throw ConfigMismatch("photon bounds and overlap table were built for different correlation parameters");
  if (bounds.num_histories() != 1 || tau.histories.size() != 1 || obs.histories.size() != 1)
    throw ConfigMismatch("coarse programs need history-independent tables");
  const auto& intensities = config.intensities;
  const std::size_t k = intensities.size();
  const int n_cut = bounds.n_cut;
  const auto block = static_cast<std::size_t>(n_cut + 1);
  EstimationProgram prog;
  prog.kind = kind;
  prog.sense = kind == ProblemKind::P3 ? lp::Sense::Maximize : lp::Sense::Minimize;
  for (std::size_t a = 0; a < k; ++a)
    for (int n = 0; n <= n_cut; ++n) prog.variables.push_back({variable_kind(kind), n, a, std::nullopt});
  prog.objective.assign(prog.num_vars(), 0.0);
  const std::size_t mu = intensities.signal_index();
  prog.objective[mu * block + 1] = 1.0;
  for (std::size_t a = 0; a < k; ++a)
    detail::add_decoy_rows(prog, a * block, bounds.row(a), detail::observed(obs.at(a), kind), intensities[a].label);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      if (a != b)
        for (int n = 0; n <= n_cut; ++n)
          prog.cs.push_back({a * block + static_cast<std::size_t>(n), b * block + static_cast<std::size_t>(n),
                             tau.at(a, b, 0, n)});
  const auto& r = bounds.row(mu);
  prog.quantity_scale = detail::basis_weight(config.basis, kind) * intensities[mu].probability *
                        (kind == ProblemKind::P3 ? r.upper[1] : r.lower[1]);
  return prog;
}

/// Fine formulation: variables (history, setting, n); bands only between settings
/// that share the same history. The objective is the history average of p(1) Y_1, scaled by q^2 p_mu.
inline EstimationProgram build_fine(ProblemKind kind, const Observables& obs, const PhotonBounds& bounds,
                                    const TauTable& tau, const ModelConfig& config) {
  if (!(bounds.tag == tau.tag) || bounds.n_cut != tau.n_cut)
    throw ConfigMismatch("photon bounds and overlap table were built for different correlation parameters");
  const auto& intensities = config.intensities;
  const std::size_t k = intensities.size();
  const std::size_t hcount = bounds.num_histories();
  if (obs.histories.size() != hcount || tau.histories.size() != hcount || obs.rates.size() != k)
    throw MissingHistory("observables are missing for some (setting, history) pairs");
  for (std::size_t h = 0; h < hcount; ++h)
    if (obs.histories[h].settings != bounds.histories[h].settings ||
        tau.histories[h].settings != bounds.histories[h].settings || obs.rates[0].size() != hcount)
      throw MissingHistory("observables are missing for history " +
                           history_label(intensities, bounds.histories[h].settings));
  const int n_cut = bounds.n_cut;
  const auto block = static_cast<std::size_t>(n_cut + 1);
  EstimationProgram prog;
  prog.kind = kind;
  prog.sense = kind == ProblemKind::P3 ? lp::Sense::Maximize : lp::Sense::Minimize;
  for (std::size_t h = 0; h < hcount; ++h)
    for (std::size_t a = 0; a < k; ++a)
      for (int n = 0; n <= n_cut; ++n) prog.variables.push_back({variable_kind(kind), n, a, h});
  prog.objective.assign(prog.num_vars(), 0.0);
  const std::size_t mu = intensities.signal_index();
  const double w = detail::basis_weight(config.basis, kind) * intensities[mu].probability;
  auto first = [&](std::size_t h, std::size_t a) { return (h * k + a) * block; };
  for (std::size_t h = 0; h < hcount; ++h) {
    const auto& r = bounds.row(mu, h);
    prog.objective[first(h, mu) + 1] =
        bounds.histories[h].probability * (kind == ProblemKind::P3 ? r.upper[1] : r.lower[1]);
    const std::string hl = "[" + history_label(intensities, bounds.histories[h].settings) + "]";
    for (std::size_t a = 0; a < k; ++a)
      detail::add_decoy_rows(prog, first(h, a), bounds.row(a, h), detail::observed(obs.at(a, h), kind),
                             intensities[a].label + hl);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        if (a != b)
          for (int n = 0; n <= n_cut; ++n)
            prog.cs.push_back({first(h, a) + static_cast<std::size_t>(n), first(h, b) + static_cast<std::size_t>(n),
                               tau.at(a, b, h, n)});
  }
  prog.quantity_scale = w;
  return prog;
}

inline std::string variable_name(const EstimationProgram& p, std::size_t j) {
  const auto& v = p.variables[j];
  std::string s = v.kind == VarKind::YieldZ ? "YZ" : v.kind == VarKind::YieldX ? "YX" : "HX";
  s += "_" + std::to_string(v.n);
  if (!p.cs.empty()) s += "_a" + std::to_string(v.setting);
  if (v.history) s += "_c" + std::to_string(*v.history);
  return s;
}

/// Plain-text LP rendering (CPLEX LP style); bands are listed as comments.
inline void write_lp_text(std::ostream& os, const EstimationProgram& p) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "\\ problem " << to_string(p.kind) << ", " << p.num_vars() << " variables, " << p.linear.size()
     << " rows, " << p.cs.size() << " bands\n";
  os << (p.sense == lp::Sense::Minimize ? "Minimize\n" : "Maximize\n") << " obj:";
  for (std::size_t j = 0; j < p.num_vars(); ++j)
    if (p.objective[j] != 0.0) os << " + " << num(p.objective[j]) << " " << variable_name(p, j);
  os << "\nSubject To\n";
  for (const auto& row : p.linear) {
    os << " " << row.label << ":";
    for (const auto& [j, c] : row.terms) os << " + " << num(c) << " " << variable_name(p, j);
    os << (row.relation == Relation::LessEq ? " <= " : " >= ") << num(row.rhs) << "\n";
  }
  for (const auto& c : p.cs)
    os << "\\ band " << variable_name(p, c.var_a) << " -> " << variable_name(p, c.var_b) << " tau " << num(c.tau)
       << "\n";
  os << "Bounds\n";
  for (std::size_t j = 0; j < p.num_vars(); ++j) os << " 0 <= " << variable_name(p, j) << " <= 1\n";
  os << "End\n";
}

}  // namespace qkdcs
