#pragma once

// Quick oracle and property checks on small instances, run by `qkdcs check`.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qkdcs/cs_math.hpp"
#include "qkdcs/keyrate.hpp"
#include "qkdcs/lp_solver.hpp"
#include "qkdcs/opt_engine.hpp"

namespace qkdcs {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Random two-intensity coarse scenario with n_cut = 1, small enough for grid_oracle.
inline ModelConfig toy_config(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelConfig c = default_config();
  const double p_mu = 0.5 + 0.4 * u(rng);
  c.intensities.settings = {{"mu", 0.3 + 0.4 * u(rng), p_mu}, {"nu", 0.02 + 0.18 * u(rng), 1.0 - p_mu}};
  c.intensities.signal = "mu";
  CoarseGrained cg;
  cg.delta_max = std::pow(10.0, -3.0 + 1.5 * u(rng));
  cg.xi = 1 + static_cast<int>(rng() % 2);
  c.correlation = cg;
  c.protocol.n_cut = 1;
  c.channel.distance_km = 100.0 * u(rng);
  return c;
}

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

inline CheckResult check_band_identity() {
  double worst = 0.0;
  for (int i = 1; i < 50; ++i)
    for (int k = 1; k < 50; ++k) {
      const double y = i / 50.0, z = k / 50.0;
      const double s = std::sqrt(z * y), t = std::sqrt((1 - z) * (1 - y));
      worst = std::max({worst, std::abs(cs::g_plus(y, z) - (s + t) * (s + t)),
                        std::abs(cs::g_minus(y, z) - (s - t) * (s - t)),
                        std::max(0.0, cs::G_minus(y, z) - y), std::max(0.0, y - cs::G_plus(y, z))});
    }
  return {"band identity and containment", worst <= 1e-12, fmt("max deviation %.3g", worst)};
}

inline CheckResult check_tangents() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double ref = u(rng), z = u(rng);
    const auto tp = cs::tangent_relaxation(ref, z);
    for (int i = 0; i <= 200; ++i) {
      const double y = i / 200.0;
      worst = std::max({worst, tp.lower(y) - cs::G_minus(y, z), cs::G_plus(y, z) - tp.upper(y)});
    }
  }
  return {"tangent soundness", worst <= 1e-12, fmt("max excess %.3g", worst)};
}

inline CheckResult check_lp() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int mismatched = 0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 4, m = 3;
    lp::Problem p(n, 0.0, 1.0);
    std::vector<SmallRow> rows;
    for (auto& c : p.objective) c = u(rng);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> r(n);
      for (auto& v : r) v = u(rng);
      const double hi = 0.5 + 0.5 * u(rng);
      p.add_row(r, -lp::kInf, hi);
      rows.push_back({r, -lp::kInf, hi});
    }
    const auto s = lp::solve(p);
    const auto ref = small_lp(p.objective, p.lower, p.upper, rows, false);
    if (!ref || s.status != lp::Status::Optimal) {
      mismatched += (ref.has_value() != (s.status == lp::Status::Optimal));
      continue;
    }
    worst = std::max(worst, std::abs(s.objective - *ref));
  }
  return {"LP solver vs vertex enumeration", mismatched == 0 && worst <= 1e-9,
          fmt("max difference %.3g, status mismatches %g", worst, mismatched)};
}

inline CheckResult check_reduction() {
  const auto cfg = default_config(0.0, 1);
  const auto tables = build_tables(cfg);
  double worst = 0.0;
  for (double d : {0.0, 40.0, 80.0}) {
    const auto r = evaluate_point(cfg, tables, d);
    worst = std::max(worst, std::abs(r.rate_candidate - standard_decoy_rate(cfg, d)));
  }
  return {"zero-deviation reduction", worst <= 1e-9, fmt("max rate difference %.3g", worst)};
}

inline CheckResult check_grid_oracle() {
  double worst = 0.0;
  bool ordered = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto cfg = toy_config(seed);
    const auto tables = build_tables(cfg);
    const auto obs = observables(cfg, cfg.channel.distance_km);
    ChannelParams ch = cfg.channel;
    const auto refs = canonical_references(ch, cfg.protocol.n_cut);
    const auto progs = build_programs(cfg, tables, obs);
    for (const auto& p : progs) {
      const auto relaxed = grid_oracle(p, 1e-2, GridBound::Relaxed);
      if (!relaxed) continue;
      const auto feasible = grid_oracle(p, 1e-2, GridBound::Feasible);
      const auto cand = slp_candidate(p, reference_point(p, refs));
      const auto cert = certify(p, cand.x, cand.objective);
      const double sign = p.sense == lp::Sense::Minimize ? 1.0 : -1.0;
      if (sign * (cert.bound - cand.objective) > 1e-9) ordered = false;
      worst = std::max(worst, sign * (*relaxed - cand.objective));
      if (feasible) worst = std::max(worst, sign * (cert.bound - *feasible));
    }
  }
  return {"grid oracle bracket (step 1e-2)", ordered && worst <= 1e-2, fmt("max excess %.3g", worst)};
}

}  // namespace detail

inline std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  for (auto f : {detail::check_band_identity, detail::check_tangents, detail::check_lp, detail::check_reduction,
                 detail::check_grid_oracle}) {
    try {
      out.push_back(f());
    } catch (const std::exception& e) {
      out.push_back({"check", false, e.what()});
    }
  }
  return out;
}

}  // namespace qkdcs
