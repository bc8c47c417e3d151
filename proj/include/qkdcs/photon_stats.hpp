#pragma once

// Photon-number probability bounds and Cauchy-Schwarz overlap parameters for the
// coarse-grained (bounded relative deviation) and truncated-Gaussian source models.

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "qkdcs/core_model.hpp"
#include "qkdcs/errors.hpp"

namespace qkdcs {

inline double poisson_pmf(int n, double a) {
  if (a == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-a + n * std::log(a) - std::lgamma(n + 1.0));
}

/// sum_{n > n_max} Poisson(n; a), summed directly to avoid cancellation.
inline double poisson_upper_tail(int n_max, double a) {
  double term = poisson_pmf(n_max + 1, a);
  double sum = 0.0;
  for (int n = n_max + 1; term > 0.0; ++n) {
    sum += term;
    if (term < 1e-20 * sum && n > a) break;
    term *= a / (n + 1);
  }
  return sum;
}

/// p_L(n), p_U(n) for n = 0..n_cut plus an upper bound on the mass beyond n_cut.
struct PhotonRow {
  std::vector<double> lower;
  std::vector<double> upper;
  double tail_upper = 0.0;
};

/// Identifies the correlation model a table was built for.
struct BuildTag {
  std::string model;  // "coarse" or "gaussian"
  double delta_max = 0.0;
  int xi = 0;
  bool operator==(const BuildTag&) const = default;
};

struct PhotonBounds {
  int n_cut = 0;
  std::vector<HistoryPattern> histories;    // one empty history in the coarse formulation
  std::vector<std::vector<PhotonRow>> rows;  // [setting][history]
  BuildTag tag;

  const PhotonRow& row(std::size_t setting, std::size_t history = 0) const { return rows.at(setting).at(history); }
  std::size_t num_settings() const { return rows.size(); }
  std::size_t num_histories() const { return histories.size(); }
};

/// Bounds on the photon-number distribution of a pulse whose actual intensity lies
/// in [a(1-delta), a(1+delta)]. For a(1+delta) <= 1 this is e^{-a+}..e^{-a-} at n=0 and
/// Poisson(n; a-)..Poisson(n; a+) above; in general the extremes of Poisson(n; .) over
/// the interval are used. The tail bound is the Poisson tail at a+.
inline PhotonRow coarse_bounds(double a, double delta_max, int n_cut) {
  if (!(a > 0.0)) throw DomainError("coarse_bounds: intensity must be > 0");
  if (!(delta_max >= 0.0 && delta_max < 1.0)) throw DomainError("coarse_bounds: delta_max must lie in [0,1)");
  const double lo = a * (1.0 - delta_max);
  const double hi = a * (1.0 + delta_max);
  PhotonRow row;
  row.lower.resize(static_cast<std::size_t>(n_cut) + 1);
  row.upper.resize(static_cast<std::size_t>(n_cut) + 1);
  for (int n = 0; n <= n_cut; ++n) {
    const double p_lo = poisson_pmf(n, lo);
    const double p_hi = poisson_pmf(n, hi);
    double mx = std::max(p_lo, p_hi);
    if (n > 0 && lo < n && n < hi) mx = std::max(mx, poisson_pmf(n, n));  // interior mode
    row.lower[static_cast<std::size_t>(n)] = std::min(p_lo, p_hi);
    row.upper[static_cast<std::size_t>(n)] = mx;
  }
  row.tail_upper = poisson_upper_tail(n_cut, hi);
  return row;
}

/// Coarse-grained overlap parameter between settings a and b for n photons.
inline double coarse_tau(double a, double b, int n, int xi, const IntensitySet& intensities, double delta_max) {
  if (n < 0) throw DomainError("coarse_tau: n must be >= 0");
  if (delta_max == 0.0) return 1.0;
  // 1 - sum_c p_c (e^{-c-} - e^{-c+}), with the difference written via expm1
  double leak = 0.0;
  for (const auto& s : intensities.settings) {
    const double c = s.intensity;
    leak += s.probability * (-std::exp(-c * (1.0 - delta_max)) * std::expm1(-2.0 * delta_max * c));
  }
  const double bracket = 1.0 - leak;
  const double spread = 2.0 * delta_max * (a + b);  // (a+ + b+) - (a- + b-)
  double head;
  if (n == 0) {
    head = std::exp(-spread);
  } else {
    const double ratio = (1.0 - delta_max) / (1.0 + delta_max);
    head = std::exp(spread + 2.0 * n * std::log(ratio));
  }
  return std::clamp(head * std::pow(bracket, 2.0 * xi), 0.0, 1.0);
}

/// tau indexed by (a, b, history, n); a != b entries only are meaningful.
struct TauTable {
  std::size_t num_settings = 0;
  std::vector<HistoryPattern> histories;
  int n_cut = 0;
  std::vector<double> values;
  BuildTag tag;

  std::size_t index(std::size_t a, std::size_t b, std::size_t h, int n) const {
    return ((a * num_settings + b) * histories.size() + h) * static_cast<std::size_t>(n_cut + 1) +
           static_cast<std::size_t>(n);
  }
  double at(std::size_t a, std::size_t b, std::size_t h, int n) const { return values.at(index(a, b, h, n)); }
  double& at(std::size_t a, std::size_t b, std::size_t h, int n) { return values.at(index(a, b, h, n)); }

  void resize(std::size_t k, std::vector<HistoryPattern> hist, int ncut) {
    num_settings = k;
    histories = std::move(hist);
    n_cut = ncut;
    values.assign(k * k * histories.size() * static_cast<std::size_t>(ncut + 1), 1.0);
  }
};

inline std::vector<HistoryPattern> single_empty_history() { return {HistoryPattern{{}, 1.0}}; }

/// Coarse formulation: one row per setting, history-independent.
inline PhotonBounds build_coarse_bounds(const IntensitySet& intensities, double delta_max, int xi, int n_cut) {
  PhotonBounds pb;
  pb.n_cut = n_cut;
  pb.histories = single_empty_history();
  pb.tag = {"coarse", delta_max, xi};
  for (const auto& s : intensities.settings) pb.rows.push_back({coarse_bounds(s.intensity, delta_max, n_cut)});
  return pb;
}

inline TauTable build_coarse_tau(const IntensitySet& intensities, double delta_max, int xi, int n_cut) {
  TauTable t;
  t.tag = {"coarse", delta_max, xi};
  const std::size_t k = intensities.size();
  t.resize(k, single_empty_history(), n_cut);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      if (a != b)
        for (int n = 0; n <= n_cut; ++n)
          t.at(a, b, 0, n) = coarse_tau(intensities[a].intensity, intensities[b].intensity, n, xi, intensities, delta_max);
  return t;
}

/// Fine formulation of the model-independent bounds: rows per (setting, history) with
/// a possibly history-dependent deviation.
inline PhotonBounds build_fine_coarse_bounds(const IntensitySet& intensities, const CoarseGrained& spec, int n_cut) {
  PhotonBounds pb;
  pb.n_cut = n_cut;
  pb.histories = enumerate_histories(intensities, spec.xi);
  pb.tag = {"coarse", spec.largest_delta(), spec.xi};
  for (const auto& s : intensities.settings) {
    std::vector<PhotonRow> per_history;
    for (const auto& h : pb.histories) per_history.push_back(coarse_bounds(s.intensity, spec.delta_for(h.settings), n_cut));
    pb.rows.push_back(std::move(per_history));
  }
  return pb;
}

/// Overlaps for the fine model-independent formulation; tau is monotone in delta, so
/// the largest deviation in the table gives a valid value for every history.
inline TauTable build_fine_coarse_tau(const IntensitySet& intensities, const CoarseGrained& spec, int n_cut) {
  TauTable t;
  const double d = spec.largest_delta();
  t.tag = {"coarse", d, spec.xi};
  const std::size_t k = intensities.size();
  t.resize(k, enumerate_histories(intensities, spec.xi), n_cut);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      if (a != b)
        for (int n = 0; n <= n_cut; ++n) {
          const double tau = coarse_tau(intensities[a].intensity, intensities[b].intensity, n, spec.xi, intensities, d);
          for (std::size_t h = 0; h < t.histories.size(); ++h) t.at(a, b, h, n) = tau;
        }
  return t;
}

// ---------------------------------------------------------------------------
// Truncated-Gaussian photon statistics

struct PnBracket {
  double lower = 0.0;
  double upper = 0.0;
};

namespace detail {

struct GlTable {
  std::vector<double> x, w;  // nodes and weights on [-1, 1]
};

inline const GlTable& gauss_legendre(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<GlTable>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> t(
        gsl_integration_glfixed_table_alloc(n), &gsl_integration_glfixed_table_free);
    if (!t) throw Error("failed to allocate Gauss-Legendre table");
    auto tab = std::make_unique<GlTable>();
    tab->x.resize(n);
    tab->w.resize(n);
    for (std::size_t i = 0; i < n; ++i) gsl_integration_glfixed_point(-1.0, 1.0, i, &tab->x[i], &tab->w[i], t.get());
    slot = std::move(tab);
  }
  return *slot;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal mass in [a, b], written to avoid cancellation in either tail.
inline double normal_mass(double a, double b) {
  if (b <= a) return 0.0;
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::sqrt(2.0)) - std::erfc(b / std::sqrt(2.0)));
  if (b <= 0.0) return normal_cdf(b) - normal_cdf(a);
  return 1.0 - normal_cdf(a) - 0.5 * std::erfc(b / std::sqrt(2.0));
}

inline constexpr double kClipSigmas = 10.0;

// Gauss-Legendre estimate of P_n for n = 0..n_max over the clipped interval, in the
// standardised variable so that narrow densities keep full precision.
inline std::vector<double> gaussian_poisson_quadrature(const GaussianParams& g, int n_max, std::size_t nodes) {
  const double a = (g.lower - g.mean) / g.stddev, b = (g.upper - g.mean) / g.stddev;
  const double lo = std::max(a, -kClipSigmas), hi = std::min(b, kClipSigmas);
  const double z = normal_mass(a, b);
  const auto& tab = gauss_legendre(nodes);
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double u = mid + half * tab.x[i];
    const double alpha = g.mean + g.stddev * u;
    const double density = std::exp(-0.5 * u * u) / (std::sqrt(2.0 * M_PI) * z);
    double p = std::exp(-alpha);
    const double w = half * tab.w[i] * density;
    for (int n = 0; n <= n_max; ++n) {
      if (n > 0) p *= alpha / n;
      out[static_cast<std::size_t>(n)] += w * p;
    }
  }
  return out;
}

// Mass of the renormalised density cut off by clipping to +-kClipSigmas.
inline double clipped_mass(const GaussianParams& g) {
  const double a = (g.lower - g.mean) / g.stddev, b = (g.upper - g.mean) / g.stddev;
  const double ca = std::max(a, -kClipSigmas), cb = std::min(b, kClipSigmas);
  return (normal_mass(a, ca) + normal_mass(cb, b)) / normal_mass(a, b);
}

}  // namespace detail

inline constexpr double kQuadratureTolerance = 1e-9;

/// Brackets of P_n = int g(alpha) Poisson(n; alpha) d alpha for n = 0..n_max, with g the
/// Gaussian renormalised on its truncation interval. Each bracket spans the
/// estimates at `quad_nodes` and twice as many nodes, widened by their difference,
/// a rounding bound, and (upper side) the mass discarded by clipping at 10 sigma.
inline std::vector<PnBracket> trunc_gauss_pn_all(const GaussianParams& g, int n_max, std::size_t quad_nodes = 64) {
  if (quad_nodes < 8) throw DomainError("trunc_gauss_pn: at least 8 quadrature nodes are required");
  if (!(g.stddev > 0.0 && g.lower > 0.0 && g.lower < g.mean && g.mean < g.upper))
    throw DomainError("trunc_gauss_pn: invalid truncated-Gaussian parameters");
  const double clipped = detail::clipped_mass(g);
  std::size_t nodes = quad_nodes;
  for (int attempt = 0; attempt < 3; ++attempt, nodes *= 2) {
    const auto coarse = detail::gaussian_poisson_quadrature(g, n_max, nodes);
    const auto fine = detail::gaussian_poisson_quadrature(g, n_max, 2 * nodes);
    std::vector<PnBracket> out(coarse.size());
    double width = 0.0;
    for (std::size_t n = 0; n < coarse.size(); ++n) {
      const double diff = std::abs(coarse[n] - fine[n]);
      const double round = 64.0 * std::numeric_limits<double>::epsilon() * std::max(coarse[n], fine[n]);
      out[n].lower = std::max(0.0, std::min(coarse[n], fine[n]) - diff - round);
      out[n].upper = std::min(1.0, std::max(coarse[n], fine[n]) + diff + round + clipped);
      width = std::max(width, out[n].upper - out[n].lower);
    }
    if (width <= kQuadratureTolerance) return out;
  }
  throw IntegrationNotConverged("truncated-Gaussian photon-number integral did not converge");
}

inline PnBracket trunc_gauss_pn(const GaussianParams& g, int n, std::size_t quad_nodes = 64) {
  return trunc_gauss_pn_all(g, n, quad_nodes).at(static_cast<std::size_t>(n));
}

/// Bracketed photon-number series of one conditioning pattern plus a bound on the
/// probability beyond the last entry.
struct PnSeries {
  std::vector<PnBracket> p;
  double tail_upper = 0.0;
};

/// Caches P_n brackets per history pattern of a truncated-Gaussian table.
class GaussianPnSource {
 public:
  GaussianPnSource(const TruncatedGaussian& model, int n_max, std::size_t quad_nodes = 64)
      : model_(model), n_max_(n_max), nodes_(quad_nodes) {}

  const PnSeries& series(const SettingSequence& pattern) {
    auto it = cache_.find(pattern);
    if (it != cache_.end()) return it->second;
    const auto& g = model_.at(pattern);
    PnSeries s{trunc_gauss_pn_all(g, n_max_, nodes_), poisson_upper_tail(n_max_, g.upper)};
    return cache_.emplace(pattern, std::move(s)).first->second;
  }
  int n_max() const { return n_max_; }

 private:
  const TruncatedGaussian& model_;
  int n_max_;
  std::size_t nodes_;
  std::map<SettingSequence, PnSeries> cache_;
};

/// Smallest N whose Poisson tail at the largest truncation point is below `tail_tol`.
inline int choose_n_trunc(const TruncatedGaussian& model, double tail_tol = 1e-20) {
  double amax = 0.0;
  for (const auto& [_, g] : model.table) amax = std::max(amax, g.upper);
  int n = 0;
  while (poisson_upper_tail(n, amax) >= tail_tol) ++n;
  return n;
}

namespace detail {

// Lower bound on the deficit 1 - sum_n sqrt(P_n Q_n) of the Bhattacharyya overlap.
// Two valid estimates are combined: the truncated direct sum with lower brackets,
// and the Hellinger form 1/2 sum (sqrt P - sqrt Q)^2, which stays accurate when the
// distributions nearly coincide.
inline double overlap_deficit(const PnSeries& p, const PnSeries& q) {
  double direct = 0.0, hellinger = 0.0;
  for (std::size_t n = 0; n < p.p.size(); ++n) {
    direct += std::sqrt(p.p[n].lower * q.p[n].lower);
    const double d = std::max({0.0, std::sqrt(p.p[n].upper) - std::sqrt(q.p[n].lower),
                               std::sqrt(q.p[n].upper) - std::sqrt(p.p[n].lower)});
    hellinger += d * d;
  }
  const double via_direct = 1.0 - direct;
  const double via_hellinger = 0.5 * (hellinger + p.tail_upper + q.tail_upper);
  return std::clamp(std::min(via_direct, via_hellinger), 0.0, 1.0);
}

}  // namespace detail

/// Overlap parameter between the histories v and w (each xi past settings plus the
/// current one), averaged over the xi future settings. `source.series(pattern)` must
/// return bracketed P_n for a conditioning pattern of length xi + 1.
template <class Source>
double general_tau(const SettingSequence& v, const SettingSequence& w, int xi, const IntensitySet& intensities,
                   Source& source) {
  const auto len = static_cast<std::size_t>(xi) + 1;
  if (xi < 1 || v.size() != len || w.size() != len) throw DomainError("general_tau: patterns must have length xi + 1");
  for (std::size_t i = 0; i + 1 < len; ++i)
    if (v[i] != w[i]) throw DomainError("general_tau: patterns must agree on all past settings");

  const std::size_t k = intensities.size();
  double weight_sum = 0.0, weighted_deficit = 0.0;
  std::vector<std::size_t> future(static_cast<std::size_t>(xi), 0);
  SettingSequence wv(len), ww(len);
  while (true) {
    double weight = 1.0;
    for (auto f : future) weight *= intensities[f].probability;
    double log_product = 0.0;  // log prod_j (1 - d_j)
    for (int j = 1; j <= xi; ++j) {
      // window of round k+j: settings k-xi+j .. k of the history, then k+1 .. k+j
      std::size_t pos = 0;
      for (std::size_t i = static_cast<std::size_t>(j); i < len; ++i, ++pos) {
        wv[pos] = v[i];
        ww[pos] = w[i];
      }
      for (int i = 0; i < j; ++i, ++pos) wv[pos] = ww[pos] = future[static_cast<std::size_t>(i)];
      const double d = detail::overlap_deficit(source.series(wv), source.series(ww));
      log_product += d >= 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-d);
    }
    weight_sum += weight;
    weighted_deficit += weight * -std::expm1(log_product);
    int p = xi - 1;
    while (p >= 0 && ++future[static_cast<std::size_t>(p)] == k) future[static_cast<std::size_t>(p--)] = 0;
    if (p < 0) break;
  }
  const double root = 1.0 - weighted_deficit / weight_sum;
  return std::clamp(root * root, 0.0, 1.0);
}

/// Photon bounds of the truncated-Gaussian model per (setting, history).
inline PhotonBounds build_gaussian_bounds(const IntensitySet& intensities, const TruncatedGaussian& model, int n_cut,
                                         std::size_t quad_nodes = 64) {
  PhotonBounds pb;
  pb.n_cut = n_cut;
  pb.histories = enumerate_histories(intensities, model.xi);
  pb.tag = {"gaussian", 0.0, model.xi};
  for (std::size_t a = 0; a < intensities.size(); ++a) {
    std::vector<PhotonRow> per_history;
    for (const auto& h : pb.histories) {
      SettingSequence pattern = h.settings;
      pattern.push_back(a);
      const auto& g = model.at(pattern);
      const auto br = trunc_gauss_pn_all(g, n_cut, quad_nodes);
      PhotonRow row;
      for (const auto& b : br) {
        row.lower.push_back(b.lower);
        row.upper.push_back(b.upper);
      }
      row.tail_upper = poisson_upper_tail(n_cut, g.upper);
      per_history.push_back(std::move(row));
    }
    pb.rows.push_back(std::move(per_history));
  }
  return pb;
}

/// Overlaps of the truncated-Gaussian model between histories differing only in the
/// current setting. The value does not depend on n.
inline TauTable build_gaussian_tau(const IntensitySet& intensities, const TruncatedGaussian& model, int n_cut,
                                   std::size_t quad_nodes = 64, double tail_tol = 1e-20) {
  TauTable t;
  t.tag = {"gaussian", 0.0, model.xi};
  const std::size_t k = intensities.size();
  t.resize(k, enumerate_histories(intensities, model.xi), n_cut);
  GaussianPnSource source(model, choose_n_trunc(model, tail_tol), quad_nodes);
  for (std::size_t h = 0; h < t.histories.size(); ++h)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        if (a == b) continue;
        SettingSequence v = t.histories[h].settings, w = t.histories[h].settings;
        v.push_back(a);
        w.push_back(b);
        const double tau = general_tau(v, w, model.xi, intensities, source);
        for (int n = 0; n <= n_cut; ++n) t.at(a, b, h, n) = tau;
      }
  return t;
}

}  // namespace qkdcs
