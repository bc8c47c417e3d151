#pragma once

// End-to-end key-rate evaluation: observables, photon bounds and overlaps, the three
// estimation programs, candidate and certification stages, and distance sweeps.

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qkdcs/channel_sim.hpp"
#include "qkdcs/core_model.hpp"
#include "qkdcs/decoy_programs.hpp"
#include "qkdcs/errors.hpp"
#include "qkdcs/lp_solver.hpp"
#include "qkdcs/opt_engine.hpp"
#include "qkdcs/photon_stats.hpp"

namespace qkdcs {

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binary_entropy: p must lie in [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Asymptotic secret-key rate per signal, clamped at 0.
inline double key_rate(double z_mu, double z1_l, double x1_l, double e1_u, double f_ec, double e_tol) {
  if (!(x1_l > 0.0) || !(z1_l > 0.0)) return 0.0;
  const double phase = std::clamp(e1_u / x1_l, 0.0, 0.5);
  const double k = z1_l * (1.0 - binary_entropy(phase)) - f_ec * z_mu * binary_entropy(std::clamp(e_tol, 0.0, 1.0));
  return std::max(k, 0.0);
}

enum class ComparisonMode { CandidateRefs, CanonicalRefs, Both };

/// Distance-independent inputs of the programs.
struct ModelTables {
  PhotonBounds bounds;
  TauTable tau;
};

inline ModelTables build_tables(const ModelConfig& config, std::size_t quad_nodes = 64) {
  const auto vr = validate(config);
  if (!vr.ok()) throw ConfigError("invalid configuration: " + vr.violations.front().path + ": " + vr.violations.front().message);
  const int n_cut = config.protocol.n_cut;
  ModelTables t;
  if (const auto* cg = std::get_if<CoarseGrained>(&config.correlation)) {
    if (config.formulation == Formulation::Coarse) {
      t.bounds = build_coarse_bounds(config.intensities, cg->delta_max, cg->xi, n_cut);
      t.tau = build_coarse_tau(config.intensities, cg->delta_max, cg->xi, n_cut);
    } else {
      t.bounds = build_fine_coarse_bounds(config.intensities, *cg, n_cut);
      t.tau = build_fine_coarse_tau(config.intensities, *cg, n_cut);
    }
  } else {
    const auto& tg = std::get<TruncatedGaussian>(config.correlation);
    t.bounds = build_gaussian_bounds(config.intensities, tg, n_cut, quad_nodes);
    t.tau = build_gaussian_tau(config.intensities, tg, n_cut, quad_nodes);
  }
  return t;
}

inline constexpr std::array<ProblemKind, 3> kProblems = {ProblemKind::P1, ProblemKind::P2, ProblemKind::P3};

inline std::array<EstimationProgram, 3> build_programs(const ModelConfig& config, const ModelTables& tables,
                                                      const Observables& obs) {
  std::array<EstimationProgram, 3> out;
  for (std::size_t i = 0; i < 3; ++i)
    out[i] = config.formulation == Formulation::Coarse ? build_coarse(kProblems[i], obs, tables.bounds, tables.tau, config)
                                                       : build_fine(kProblems[i], obs, tables.bounds, tables.tau, config);
  return out;
}

/// Observed Z-basis click fraction of the signal intensity.
inline double signal_click_fraction(const ModelConfig& config, const Observables& obs) {
  const std::size_t mu = config.intensities.signal_index();
  double z = 0.0;
  for (std::size_t h = 0; h < obs.histories.size(); ++h) z += obs.histories[h].probability * obs.at(mu, h).z_norm;
  return config.basis.q_z * config.basis.q_z * config.intensities[mu].probability * z;
}

inline double error_tolerance(const ModelConfig& config, const Observables& obs) {
  return config.protocol.e_tol.policy == ErrorTolerance::Policy::Fixed ? config.protocol.e_tol.value : obs.z_qber;
}

struct KeyRateReport {
  double distance_km = 0.0;
  double z_mu = 0.0;
  double z1_l = std::numeric_limits<double>::quiet_NaN();
  double x1_l = std::numeric_limits<double>::quiet_NaN();
  double e1_u = std::numeric_limits<double>::quiet_NaN();
  double rate_candidate = std::numeric_limits<double>::quiet_NaN();
  double rate_canonical = std::numeric_limits<double>::quiet_NaN();
  std::array<std::optional<Certificate>, 3> certificates;
  std::string status = "ok";

  // Per-problem detail (objective units of each program).
  std::array<double, 3> candidate_objective{};
  std::array<double, 3> bound_candidate{};
  std::array<double, 3> bound_canonical{};
  std::array<double, 3> quantity_scale{};
  std::array<std::vector<double>, 3> candidate_point;
  /// Rate from the candidate objectives themselves (not certified).
  double rate_from_candidates = std::numeric_limits<double>::quiet_NaN();

  bool all_optimal() const {
    for (const auto& c : certificates)
      if (!c || *c != Certificate::Optimal) return false;
    return true;
  }
};

namespace detail {

inline double rate_from_bounds(const ModelConfig& config, double z_mu, double e_tol, const std::array<double, 3>& b,
                               const std::array<double, 3>& scale, double* z1, double* x1, double* e1) {
  const double z = b[0] * scale[0], x = b[1] * scale[1], e = b[2] * scale[2];
  if (z1) *z1 = z;
  if (x1) *x1 = x;
  if (e1) *e1 = e;
  return key_rate(z_mu, z, x, e, config.protocol.f_ec, e_tol);
}

}  // namespace detail

/// Evaluates one distance. Failures are recorded in `status` and leave rate fields at 0.
inline KeyRateReport evaluate_point(const ModelConfig& config, const ModelTables& tables, double distance_km,
                                    ComparisonMode mode = ComparisonMode::Both, const SlpOptions& slp = {}) {
  KeyRateReport rep;
  rep.distance_km = distance_km;
  try {
    const auto obs = observables(config, distance_km);
    rep.z_mu = signal_click_fraction(config, obs);
    const double e_tol = error_tolerance(config, obs);
    ChannelParams ch = config.channel;
    ch.distance_km = distance_km;
    const auto refs = canonical_references(ch, config.protocol.n_cut);
    const auto programs = build_programs(config, tables, obs);
    for (std::size_t i = 0; i < 3; ++i) rep.quantity_scale[i] = programs[i].quantity_scale;

    std::vector<std::string> notes;
    if (mode != ComparisonMode::CandidateRefs) {
      for (std::size_t i = 0; i < 3; ++i)
        rep.bound_canonical[i] = certify(programs[i], reference_point(programs[i], refs)).bound;
      rep.rate_canonical = detail::rate_from_bounds(config, rep.z_mu, e_tol, rep.bound_canonical, rep.quantity_scale,
                                                    &rep.z1_l, &rep.x1_l, &rep.e1_u);
    }
    if (mode != ComparisonMode::CanonicalRefs) {
      for (std::size_t i = 0; i < 3; ++i) {
        const auto start = reference_point(programs[i], refs);
        std::vector<double> ref = start;
        std::optional<double> cand_obj;
        try {
          const auto cand = slp_candidate(programs[i], start, slp);
          ref = cand.x;
          cand_obj = cand.objective;
          rep.candidate_objective[i] = cand.objective;
        } catch (const NoFeasibleCandidate& e) {
          notes.push_back(std::string(to_string(kProblems[i])) + " candidate fallback");
          rep.candidate_objective[i] = std::numeric_limits<double>::quiet_NaN();
        }
        const auto cb = certify(programs[i], ref, cand_obj);
        rep.bound_candidate[i] = cb.bound;
        rep.certificates[i] = cb.certificate;
        rep.candidate_point[i] = std::move(ref);
      }
      rep.rate_candidate = detail::rate_from_bounds(config, rep.z_mu, e_tol, rep.bound_candidate, rep.quantity_scale,
                                                    &rep.z1_l, &rep.x1_l, &rep.e1_u);
      rep.rate_from_candidates =
          detail::rate_from_bounds(config, rep.z_mu, e_tol, rep.candidate_objective, rep.quantity_scale, nullptr,
                                   nullptr, nullptr);
    }
    if (!notes.empty()) {
      rep.status.clear();
      for (const auto& s : notes) rep.status += (rep.status.empty() ? "" : "; ") + s;
    }
  } catch (const std::exception& e) {
    rep.status = std::string("error: ") + e.what();
    if (mode != ComparisonMode::CanonicalRefs) rep.rate_candidate = 0.0;
    if (mode != ComparisonMode::CandidateRefs) rep.rate_canonical = 0.0;
  }
  return rep;
}

/// Key rate of the standard uncorrelated decoy analysis (exact Poisson statistics).
inline double standard_decoy_rate(const ModelConfig& config, double distance_km) {
  ModelConfig c = config;
  c.formulation = Formulation::Coarse;
  const auto obs = observables(c, distance_km);
  const auto bounds = build_coarse_bounds(c.intensities, 0.0, 0, c.protocol.n_cut);
  std::array<double, 3> b{}, scale{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto prog = build_standard_lp(kProblems[i], obs, bounds, c.intensities, c.basis);
    const auto sol = lp::solve(linear_part(prog));
    if (sol.status != lp::Status::Optimal) throw SolverError("standard decoy LP failed");
    b[i] = sol.objective;
    scale[i] = prog.quantity_scale;
  }
  return detail::rate_from_bounds(c, signal_click_fraction(c, obs), error_tolerance(c, obs), b, scale, nullptr,
                                  nullptr, nullptr);
}

struct SweepConfig {
  std::vector<double> distances_km;
  ModelConfig scenario;
  ComparisonMode mode = ComparisonMode::Both;
  std::string output_path;
};

/// Evenly spaced distances from start to stop inclusive.
inline std::vector<double> distance_range(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start) || !(start >= 0.0)) throw ConfigError("invalid distance range");
  std::vector<double> d;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) d.push_back(start + static_cast<double>(i) * step);
  return d;
}

inline std::vector<KeyRateReport> run_sweep(const SweepConfig& sweep, const SlpOptions& slp = {}) {
  for (std::size_t i = 0; i < sweep.distances_km.size(); ++i) {
    if (!(sweep.distances_km[i] >= 0.0)) throw ConfigError("distances must be non-negative");
    if (i > 0 && !(sweep.distances_km[i] > sweep.distances_km[i - 1]))
      throw ConfigError("distances must be strictly increasing");
  }
  const auto tables = build_tables(sweep.scenario);
  std::vector<KeyRateReport> out;
  for (double d : sweep.distances_km) out.push_back(evaluate_point(sweep.scenario, tables, d, sweep.mode, slp));
  return out;
}

inline void write_csv_header(std::ostream& os) {
  os << "distance_km,Z_mu,Z1_L,X1_L,E1_U,rate_candidate,rate_canonical,cert_P1,cert_P2,cert_P3,status\n";
}

inline void write_csv_row(std::ostream& os, const KeyRateReport& r) {
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  auto cert = [](const std::optional<Certificate>& c) { return c ? std::string(to_string(*c)) : std::string(); };
  std::string status = r.status;
  for (auto& ch : status)
    if (ch == ',' || ch == '\n') ch = ';';
  const bool has_x = r.x1_l > 0.0;
  os << num(r.distance_km) << ',' << num(r.z_mu) << ',' << num(r.z1_l) << ',' << num(r.x1_l) << ','
     << (has_x ? num(r.e1_u) : std::string()) << ',' << num(r.rate_candidate) << ',' << num(r.rate_canonical) << ','
     << cert(r.certificates[0]) << ',' << cert(r.certificates[1]) << ',' << cert(r.certificates[2]) << ',' << status
     << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<KeyRateReport>& rows) {
  write_csv_header(os);
  for (const auto& r : rows) write_csv_row(os, r);
}

}  // namespace qkdcs
