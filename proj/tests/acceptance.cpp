// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qkdcs/cs_math.hpp"
#include "qkdcs/keyrate.hpp"
#include "qkdcs/opt_engine.hpp"
#include "qkdcs/photon_stats.hpp"
#include "qkdcs/selfcheck.hpp"

namespace {

using namespace qkdcs;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Tolerances and budgets.
constexpr double kBandTol = 1e-12;
constexpr double kDerivativeTol = 1e-5;
constexpr double kDifferenceStep = 1e-8;
constexpr double kTangentTol = 1e-12;
constexpr double kReductionTol = 1e-9;
constexpr double kOracleStep = 1e-3;
constexpr double kOrderingTol = 1e-10;
constexpr double kDistanceTol = 1e-12;
constexpr double kMultiStartTol = 1e-7;
constexpr double kPointMassTauTol = 2e-9;
constexpr double kPointMassRateTol = 1e-8;

Outcome band_mathematics() {
  double identity = 0.0, containment = 0.0, derivative = 0.0;
  const int grid = 200;
  const double h = kDifferenceStep;
  for (int i = 1; i <= grid; ++i)
    for (int k = 1; k <= grid; ++k) {
      const double y = i / (grid + 1.0), z = k / (grid + 1.0);
      const double s = std::sqrt(z * y), t = std::sqrt((1 - z) * (1 - y));
      identity = std::max({identity, std::abs(cs::g_plus(y, z) - (s + t) * (s + t)),
                           std::abs(cs::g_minus(y, z) - (s - t) * (s - t))});
      containment = std::max({containment, cs::G_minus(y, z) - y, y - cs::G_plus(y, z)});
      const auto [d_lo, d_hi] = cs::band_derivatives(y, z);
      const double fd_lo = (cs::G_minus(y + h, z) - cs::G_minus(y - h, z)) / (2 * h);
      const double fd_hi = (cs::G_plus(y + h, z) - cs::G_plus(y - h, z)) / (2 * h);
      derivative = std::max({derivative, std::abs(d_lo - fd_lo) / std::max(1.0, std::abs(d_lo)),
                             std::abs(d_hi - fd_hi) / std::max(1.0, std::abs(d_hi))});
    }
  return {identity <= kBandTol && containment <= kBandTol && derivative <= kDerivativeTol,
          fmt("identity %.2g, containment %.2g, derivative %.2g", identity, containment, derivative)};
}

Outcome tangent_soundness() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = -1.0;
  for (int t = 0; t < 50; ++t) {
    const double ref = u(rng), z = u(rng);
    const auto tp = cs::tangent_relaxation(ref, z);
    for (int i = 0; i < 1000; ++i) {
      const double y = i / 999.0;
      worst = std::max({worst, tp.lower(y) - cs::G_minus(y, z), cs::G_plus(y, z) - tp.upper(y)});
    }
  }
  return {worst <= kTangentTol, fmt("max excess %.3g", worst)};
}

Outcome reduction() {
  const auto cfg = default_config(0.0, 1);
  const auto tables = build_tables(cfg);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double d = 100.0 * i / 9.0;
    const auto r = evaluate_point(cfg, tables, d);
    const double ref = standard_decoy_rate(cfg, d);
    worst = std::max({worst, std::abs(r.rate_candidate - ref), std::abs(r.rate_canonical - ref)});
  }
  return {worst <= kReductionTol, fmt("max |rate - standard rate| %.3g over 10 distances", worst)};
}

Outcome oracle_equivalence() {
  int instances = 0, programs = 0;
  double worst = -1.0, width = 0.0;
  bool ordered = true;
  for (std::uint64_t seed = 100; instances < 20; ++seed) {
    const auto cfg = toy_config(seed);
    const auto tables = build_tables(cfg);
    const auto obs = observables(cfg, cfg.channel.distance_km);
    const auto refs = canonical_references(cfg.channel, cfg.protocol.n_cut);
    const auto progs = build_programs(cfg, tables, obs);
    bool any = false;
    for (const auto& p : progs) {
      const auto relaxed = grid_oracle(p, kOracleStep, GridBound::Relaxed);
      if (!relaxed) continue;
      const auto feasible = grid_oracle(p, kOracleStep, GridBound::Feasible);
      const auto cand = slp_candidate(p, reference_point(p, refs));
      const auto cert = certify(p, cand.x, cand.objective);
      const double sign = p.sense == lp::Sense::Minimize ? 1.0 : -1.0;
      // Min: relaxed <= optimum <= feasible, and bound <= optimum <= candidate
      if (sign * (cert.bound - cand.objective) > 1e-12 * std::max(1.0, std::abs(cand.objective))) ordered = false;
      worst = std::max(worst, sign * (*relaxed - cand.objective));
      if (feasible) {
        worst = std::max(worst, sign * (cert.bound - *feasible));
        width = std::max(width, sign * (*feasible - *relaxed));
      }
      ++programs;
      any = true;
    }
    if (any) ++instances;
  }
  return {ordered && worst <= kOracleStep,
          fmt("%g instances, %g programs, max bracket excess %.3g, ", instances, programs, worst) +
              fmt("widest oracle bracket %.3g", width)};
}

Outcome soundness_ordering(std::vector<KeyRateReport>* d1e4_xi1) {
  std::map<std::pair<double, int>, std::vector<KeyRateReport>> sweeps;
  const auto distances = distance_range(0.0, 150.0, 10.0);
  double cand_vs_canon = 0.0, distance_rise = 0.0, delta_rise = 0.0, xi_rise = 0.0;
  int errors = 0;
  for (double delta : {1e-4, 1e-2})
    for (int xi : {1, 3}) {
      SweepConfig sc;
      sc.scenario = default_config(delta, xi);
      sc.distances_km = distances;
      auto rows = run_sweep(sc);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].status.starts_with("error")) ++errors;
        cand_vs_canon = std::max(cand_vs_canon, rows[i].rate_canonical - rows[i].rate_candidate);
        if (i > 0) distance_rise = std::max(distance_rise, rows[i].rate_candidate - rows[i - 1].rate_candidate);
      }
      sweeps[{delta, xi}] = std::move(rows);
    }
  for (std::size_t i = 0; i < distances.size(); ++i) {
    for (int xi : {1, 3})
      delta_rise = std::max(delta_rise, sweeps[{1e-2, xi}][i].rate_candidate - sweeps[{1e-4, xi}][i].rate_candidate);
    for (double delta : {1e-4, 1e-2})
      xi_rise = std::max(xi_rise, sweeps[{delta, 3}][i].rate_candidate - sweeps[{delta, 1}][i].rate_candidate);
  }
  *d1e4_xi1 = sweeps[{1e-4, 1}];
  const bool ok = errors == 0 && cand_vs_canon <= kOrderingTol && distance_rise <= kDistanceTol &&
                  delta_rise <= kDistanceTol && xi_rise <= kDistanceTol;
  return {ok, fmt("canonical - candidate %.3g, rise in distance %.3g, ", cand_vs_canon, distance_rise) +
                  fmt("rise in delta %.3g, rise in xi %.3g, ", delta_rise, xi_rise) + fmt("%g errors", errors)};
}

Outcome optimality(const std::vector<KeyRateReport>& sweep) {
  const auto cfg = default_config(1e-4, 1);
  const auto tables = build_tables(cfg);
  int optimal_points = 0;
  double beat = -1.0, rate_gap = 0.0;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& r : sweep) {
    if (!r.all_optimal()) continue;
    ++optimal_points;
    rate_gap = std::max(rate_gap, std::abs(r.rate_candidate - r.rate_from_candidates));
    const auto obs = observables(cfg, r.distance_km);
    const auto progs = build_programs(cfg, tables, obs);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& p = progs[i];
      const double sign = p.sense == lp::Sense::Minimize ? 1.0 : -1.0;
      for (int s = 0; s < 5; ++s) {
        std::vector<double> start(p.num_vars());
        for (auto& v : start) v = u(rng);
        try {
          const auto cand = slp_candidate(p, start);
          beat = std::max(beat, sign * (r.bound_candidate[i] - cand.objective));
        } catch (const NoFeasibleCandidate&) {
        }
      }
    }
  }
  return {optimal_points >= 1 && beat <= kMultiStartTol && rate_gap <= 1e-8,
          fmt("%g all-Optimal points, max multi-start excess %.3g, rate gap %.3g", optimal_points, beat, rate_gap)};
}

ModelConfig point_mass_config() {
  ModelConfig c = default_config(0.0, 1);
  TruncatedGaussian tg;
  tg.xi = 1;
  for (std::size_t prev = 0; prev < c.intensities.size(); ++prev)
    for (std::size_t cur = 0; cur < c.intensities.size(); ++cur) {
      const double m = c.intensities[cur].intensity;
      tg.table[{prev, cur}] = {m, 1e-9, m - 1e-6, m + 1e-6};
    }
  c.correlation = tg;
  c.formulation = Formulation::Fine;
  return c;
}

Outcome gaussian_consistency() {
  const auto cfg = point_mass_config();
  const auto tables = build_tables(cfg);
  double tau_dev = 0.0;
  for (double v : tables.tau.values) tau_dev = std::max(tau_dev, 1.0 - v);
  const auto coarse = default_config(0.0, 1);
  const auto coarse_tables = build_tables(coarse);
  double worst = 0.0;
  for (double d : {0.0, 50.0, 100.0}) {
    const auto fine = evaluate_point(cfg, tables, d, ComparisonMode::CandidateRefs);
    const auto ref = evaluate_point(coarse, coarse_tables, d, ComparisonMode::CandidateRefs);
    worst = std::max(worst, std::abs(fine.rate_candidate - ref.rate_candidate));
  }
  return {tau_dev <= kPointMassTauTol && worst <= kPointMassRateTol,
          fmt("max 1 - tau %.3g, max rate difference %.3g", tau_dev, worst)};
}

}  // namespace

int main() {
  bool all = true;
  auto run = [&](const char* name, double budget_s, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.passed && secs <= budget_s;
    all = all && ok;
    std::printf("%s %s: %s; %.2f s (budget %g s)\n", ok ? "PASS" : "FAIL", name, o.detail.c_str(), secs, budget_s);
    std::fflush(stdout);
  };
  std::vector<KeyRateReport> sweep;
  run("band mathematics", 1, band_mathematics);
  run("tangent soundness", 1, tangent_soundness);
  run("zero-deviation reduction", 30, reduction);
  run("grid oracle equivalence", 300, oracle_equivalence);
  run("soundness ordering", 600, [&] { return soundness_ordering(&sweep); });
  run("optimality certification", 600, [&] { return optimality(sweep); });
  run("truncated-Gaussian consistency", 120, gaussian_consistency);
  return all ? 0 : 1;
}
