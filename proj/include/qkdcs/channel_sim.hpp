#pragma once

// Simulated observables of a lossy channel with misalignment and dark counts, and
// the Fock-state yields and error rates used as canonical linearization points.

#include <cmath>
#include <cstddef>
#include <vector>

#include "qkdcs/core_model.hpp"
#include "qkdcs/errors.hpp"

namespace qkdcs {

struct FockDetection {
  double yield = 0.0;  // probability of at least one click
  double error = 0.0;  // probability of a click that yields the wrong bit
};

/// Detection statistics of an n-photon state; double clicks get a random bit.
inline FockDetection fock_detection(int n, double eta, double misalignment, double p_d) {
  if (n < 0) throw DomainError("fock_detection: n must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0) || !(p_d >= 0.0 && p_d < 1.0))
    throw DomainError("fock_detection: eta must lie in [0,1] and p_d in [0,1)");
  const double s2 = std::sin(misalignment) * std::sin(misalignment);
  const double c2 = 1.0 - s2;
  const double p00 = std::pow(1.0 - eta, n);
  const double p10 = std::pow(1.0 - eta * s2, n) - p00;  // correct detector only
  const double p01 = std::pow(1.0 - eta * c2, n) - p00;  // wrong detector only
  const double p11 = 1.0 - p00 - p01 - p10;
  const double err_a = p01 + 0.5 * p11;                   // no dark count
  const double err_b = 0.5 * (p01 + p11);                 // dark count in the correct detector
  const double err_c = p00 + p01 + 0.5 * (p10 + p11);  // dark count in the wrong detector
  const double q = 1.0 - p_d;
  FockDetection out;
  out.yield = n == 0 ? -std::expm1(2.0 * std::log1p(-p_d))
                     : -std::expm1(2.0 * std::log1p(-p_d) + n * std::log1p(-eta));
  out.error = q * q * err_a + p_d * q * (err_b + err_c) + p_d * p_d * 0.5;
  return out;
}

/// Canonical linearization points Y~_n = Y_n^{Fock}, H~_n = H_n^{Fock} for n = 0..n_cut.
/// Under this channel model they depend only on n.
struct CanonicalReferences {
  std::vector<double> yield;
  std::vector<double> error;
};

inline CanonicalReferences canonical_references(const ChannelParams& channel, int n_cut) {
  CanonicalReferences refs;
  const double eta = channel.transmittance();
  for (int n = 0; n <= n_cut; ++n) {
    const auto f = fock_detection(n, eta, channel.misalignment, channel.dark_count);
    refs.yield.push_back(f.yield);
    refs.error.push_back(f.error);
  }
  return refs;
}

/// Observed rates of one (setting, history), normalised by q^2 p_a.
struct SettingObservables {
  double z_norm = 0.0;
  double x_norm = 0.0;
  double e_norm = 0.0;
};

/// Click and error rates for a pulse of mean photon number a.
inline SettingObservables channel_observables(double a, const ChannelParams& channel) {
  const double eta = channel.transmittance();
  const double p_d = channel.dark_count;
  const double q = 1.0 - p_d;
  const double s2 = std::sin(channel.misalignment) * std::sin(channel.misalignment);
  const double x = eta * a;
  const double click = -std::expm1(2.0 * std::log1p(-p_d) - x);
  // 1/2 + h - e^{-x}/2 with h = (e^{-x cos^2} - e^{-x sin^2}) / 2
  const double no_dark = -0.5 * std::expm1(-x * s2) + 0.5 * std::exp(-x) * std::expm1(x * s2);
  const double h = 0.5 * (std::exp(-x * (1.0 - s2)) - std::exp(-x * s2));
  SettingObservables o;
  o.z_norm = o.x_norm = click;
  o.e_norm = 0.5 * p_d * p_d + p_d * q * (1.0 + h) + q * q * no_dark;
  return o;
}

struct Observables {
  std::vector<HistoryPattern> histories;             // one empty history in the coarse formulation
  std::vector<std::vector<SettingObservables>> rates;  // [setting][history]
  double z_qber = 0.0;  // Z-basis error rate of the signal intensity implied by the model

  const SettingObservables& at(std::size_t setting, std::size_t history = 0) const {
    return rates.at(setting).at(history);
  }
};

/// Effective mean photon number of a setting after a history: the Gaussian mean for
/// the truncated-Gaussian model, the nominal intensity otherwise.
inline double effective_intensity(const ModelConfig& config, std::size_t setting, const SettingSequence& history) {
  if (const auto* tg = std::get_if<TruncatedGaussian>(&config.correlation)) {
    SettingSequence pattern = history;
    pattern.push_back(setting);
    return tg->at(pattern).mean;
  }
  return config.intensities[setting].intensity;
}

inline Observables observables(const ModelConfig& config, double distance_km) {
  if (!(distance_km >= 0.0)) throw DomainError("observables: distance must be >= 0");
  ChannelParams channel = config.channel;
  channel.distance_km = distance_km;
  Observables obs;
  obs.histories = config.formulation == Formulation::Fine
                      ? enumerate_histories(config.intensities, correlation_range(config.correlation), config.max_xi)
                      : std::vector<HistoryPattern>{HistoryPattern{{}, 1.0}};
  for (std::size_t a = 0; a < config.intensities.size(); ++a) {
    std::vector<SettingObservables> per_history;
    for (const auto& h : obs.histories)
      per_history.push_back(channel_observables(effective_intensity(config, a, h.settings), channel));
    obs.rates.push_back(std::move(per_history));
  }
  const std::size_t mu = config.intensities.signal_index();
  double errors = 0.0, clicks = 0.0;
  for (std::size_t h = 0; h < obs.histories.size(); ++h) {
    errors += obs.histories[h].probability * obs.rates[mu][h].e_norm;
    clicks += obs.histories[h].probability * obs.rates[mu][h].z_norm;
  }
  obs.z_qber = errors / clicks;
  return obs;
}

}  // namespace qkdcs
