#pragma once

// Configuration and domain types shared by every stage of the key-rate pipeline.

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkdcs/errors.hpp"

namespace qkdcs {

struct IntensitySetting {
  std::string label;
  double intensity = 0.0;    // nominal mean photon number
  double probability = 0.0;  // probability that Alice picks the setting
};

struct IntensitySet {
  std::vector<IntensitySetting> settings;
  std::string signal;  // label of the intensity whose single-photon quantities enter the rate

  std::size_t size() const { return settings.size(); }
  const IntensitySetting& operator[](std::size_t i) const { return settings[i]; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < settings.size(); ++i)
      if (settings[i].label == label) return i;
    return std::nullopt;
  }

  std::size_t signal_index() const {
    auto idx = index_of(signal);
    if (!idx) throw ConfigError("signal intensity '" + signal + "' is not in the intensity set");
    return *idx;
  }
};

struct BasisConfig {
  double q_z = 0.999;
  double q_x = 0.001;
};

/// Sequence of setting indices, oldest first and most recent last.
using SettingSequence = std::vector<std::size_t>;

/// Bounded relative deviation of the actual intensity around the nominal setting.
struct CoarseGrained {
  double delta_max = 0.0;
  int xi = 1;
  /// Optional history-dependent deviation, keyed by the last `xi` settings.
  /// Histories missing from the map fall back to `delta_max`.
  std::map<SettingSequence, double> delta_by_history;

  double delta_for(const SettingSequence& history) const {
    auto it = delta_by_history.find(history);
    return it == delta_by_history.end() ? delta_max : it->second;
  }
  double largest_delta() const {
    double d = delta_max;
    for (const auto& [_, v] : delta_by_history) d = std::max(d, v);
    return d;
  }
};

struct GaussianParams {
  double mean = 0.0;
  double stddev = 0.0;
  double lower = 0.0;  // truncation points of the density
  double upper = 0.0;
};

/// Truncated-Gaussian intensity model. Keys are `xi` past settings followed by
/// the current setting (length xi + 1).
struct TruncatedGaussian {
  int xi = 1;
  std::map<SettingSequence, GaussianParams> table;

  const GaussianParams& at(const SettingSequence& pattern) const {
    auto it = table.find(pattern);
    if (it == table.end()) throw MissingHistory("no Gaussian parameters for history pattern");
    return it->second;
  }
};

using CorrelationSpec = std::variant<CoarseGrained, TruncatedGaussian>;

inline int correlation_range(const CorrelationSpec& spec) {
  return std::visit([](const auto& s) { return s.xi; }, spec);
}

struct ChannelParams {
  double eta_det = 0.65;
  double dark_count = 7.2e-8;
  double misalignment = 0.08;  // radians
  double loss_db_per_km = 0.2;
  double distance_km = 0.0;

  double channel_transmittance() const {
    return std::pow(10.0, -loss_db_per_km * distance_km / 10.0);
  }
  /// Overall transmittance, channel times detector.
  double transmittance() const { return channel_transmittance() * eta_det; }
};

struct ErrorTolerance {
  enum class Policy { FromChannelModel, Fixed };
  Policy policy = Policy::FromChannelModel;
  double value = 0.0;  // used only with Policy::Fixed

  static ErrorTolerance from_channel_model() { return {}; }
  static ErrorTolerance fixed(double v) { return {Policy::Fixed, v}; }
};

struct ProtocolParams {
  double f_ec = 1.16;
  int n_cut = 10;
  ErrorTolerance e_tol;
};

/// Coarse programs index yields by (n, setting); fine programs also by the
/// history of the last xi settings.
enum class Formulation { Coarse, Fine };

struct ModelConfig {
  IntensitySet intensities;
  BasisConfig basis;
  CorrelationSpec correlation = CoarseGrained{};
  ChannelParams channel;
  ProtocolParams protocol;
  Formulation formulation = Formulation::Coarse;
  int max_xi = 6;
};

struct Violation {
  std::string path;
  std::string message;
  bool operator==(const Violation&) const = default;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool operator==(const ValidationResult&) const = default;
};

namespace detail {

inline bool finite_in(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

}  // namespace detail

inline ValidationResult validate(const ModelConfig& config) {
  ValidationResult result;
  auto fail = [&](std::string path, std::string message) {
    result.violations.push_back({std::move(path), std::move(message)});
  };

  const auto& settings = config.intensities.settings;
  if (settings.empty()) fail("intensities.settings", "at least one intensity setting is required");
  double prob_sum = 0.0;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto& s = settings[i];
    const std::string path = "intensities.settings[" + std::to_string(i) + "]";
    if (!(std::isfinite(s.intensity) && s.intensity > 0.0)) fail(path + ".intensity", "intensity must be > 0");
    if (!(std::isfinite(s.probability) && s.probability > 0.0))
      fail(path + ".probability", "probability must be > 0");
    prob_sum += s.probability;
    for (std::size_t j = 0; j < i; ++j) {
      if (settings[j].intensity == s.intensity) fail(path + ".intensity", "intensities must be distinct");
      if (settings[j].label == s.label) fail(path + ".label", "labels must be unique");
    }
  }
  if (!settings.empty() && std::abs(prob_sum - 1.0) > 1e-12)
    fail("intensities.settings", "probabilities sum != 1");
  if (!config.intensities.index_of(config.intensities.signal))
    fail("intensities.signal", "signal label is not a member of the intensity set");

  const auto& b = config.basis;
  if (!(b.q_z > 0.0 && b.q_z < 1.0)) fail("basis.q_z", "q_z must lie in (0,1)");
  if (!(b.q_x > 0.0 && b.q_x < 1.0)) fail("basis.q_x", "q_x must lie in (0,1)");
  if (!(std::abs(b.q_z + b.q_x - 1.0) <= 1e-12)) fail("basis", "q_z + q_x must equal 1");

  const int xi = correlation_range(config.correlation);
  if (xi < 0) fail("correlation.xi", "xi must be >= 0");
  if (xi > config.max_xi) fail("correlation.xi", "xi exceeds the configured cap");

  if (const auto* cg = std::get_if<CoarseGrained>(&config.correlation)) {
    if (!(std::isfinite(cg->delta_max) && cg->delta_max >= 0.0 && cg->delta_max < 1.0))
      fail("correlation.delta_max", "delta_max must be < 1 and >= 0");
    for (const auto& [hist, d] : cg->delta_by_history) {
      if (static_cast<int>(hist.size()) != xi) fail("correlation.delta_by_history", "history length must equal xi");
      if (!(std::isfinite(d) && d >= 0.0 && d < 1.0))
        fail("correlation.delta_by_history", "delta must be < 1 and >= 0");
    }
  } else {
    const auto& tg = std::get<TruncatedGaussian>(config.correlation);
    if (config.formulation != Formulation::Fine)
      fail("formulation", "the truncated-Gaussian model requires the fine formulation");
    if (xi < 1) fail("correlation.xi", "the truncated-Gaussian model requires xi >= 1");
    // Every pattern in A^xi x A must be present.
    const std::size_t k = settings.size();
    std::size_t expected = 1;
    for (int i = 0; i <= xi && xi <= config.max_xi; ++i) expected *= k;
    if (xi >= 0 && xi <= config.max_xi && tg.table.size() != expected)
      fail("correlation.table", "table must hold one entry per history pattern in A^xi x A");
    for (const auto& [pattern, g] : tg.table) {
      bool good_key = static_cast<int>(pattern.size()) == xi + 1;
      for (auto idx : pattern) good_key = good_key && idx < k;
      if (!good_key) fail("correlation.table", "malformed history pattern key");
      if (!(std::isfinite(g.stddev) && g.stddev > 0.0)) fail("correlation.table", "std must be > 0");
      if (!(std::isfinite(g.lower) && g.lower > 0.0)) fail("correlation.table", "lower truncation must be > 0");
      if (!(g.lower < g.mean && g.mean < g.upper))
        fail("correlation.table", "truncation must satisfy lower < mean < upper");
    }
  }

  const auto& ch = config.channel;
  if (!(ch.eta_det > 0.0 && ch.eta_det <= 1.0)) fail("channel.eta_det", "eta_det must lie in (0,1]");
  if (!(ch.dark_count >= 0.0 && ch.dark_count < 1.0)) fail("channel.dark_count", "p_d must lie in [0,1)");
  if (!std::isfinite(ch.misalignment)) fail("channel.misalignment", "misalignment must be finite");
  if (!(std::isfinite(ch.loss_db_per_km) && ch.loss_db_per_km >= 0.0))
    fail("channel.loss_db_per_km", "attenuation must be >= 0");
  if (!(std::isfinite(ch.distance_km) && ch.distance_km >= 0.0)) fail("channel.distance_km", "distance must be >= 0");
  const double eta = ch.transmittance();
  if (!(eta > 0.0 && eta <= 1.0)) fail("channel", "overall transmittance must lie in (0,1]");

  const auto& pr = config.protocol;
  if (!(pr.f_ec >= 1.0)) fail("protocol.f_ec", "f_EC must be >= 1");
  if (pr.n_cut < 1) fail("protocol.n_cut", "n_cut must be >= 1");
  if (pr.e_tol.policy == ErrorTolerance::Policy::Fixed && !(pr.e_tol.value > 0.0 && pr.e_tol.value < 0.5))
    fail("protocol.e_tol", "fixed E_tol must lie in (0, 0.5)");
  return result;
}

struct HistoryPattern {
  SettingSequence settings;  // most recent last
  double probability = 1.0;
};

/// All |A|^xi histories in lexicographic order of setting index.
inline std::vector<HistoryPattern> enumerate_histories(const IntensitySet& intensities, int xi, int max_xi = 6) {
  if (xi < 0) throw DomainError("xi must be >= 0");
  if (xi > max_xi) throw DomainError("xi exceeds the history enumeration cap");
  const std::size_t k = intensities.size();
  std::vector<HistoryPattern> out;
  std::vector<std::size_t> digits(static_cast<std::size_t>(xi), 0);
  while (true) {
    HistoryPattern h;
    h.settings = digits;
    for (auto d : digits) h.probability *= intensities[d].probability;
    out.push_back(std::move(h));
    // odometer increment, last position fastest
    int pos = xi - 1;
    while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == k) digits[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return out;
}

/// Human-readable history label, e.g. "mu,nu".
inline std::string history_label(const IntensitySet& intensities, const SettingSequence& seq) {
  std::string s;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) s += ',';
    s += intensities[seq[i]].label;
  }
  return s;
}

/// Scenario of the coarse-grained simulations: omega = 1e-4, nu = 0.1, mu = 0.48,
/// p_mu = q_Z = 0.999 (assumed), eta_det = 0.65, p_d = 7.2e-8, misalignment 0.08,
/// f_EC = 1.16, n_cut = 10, 0.2 dB/km.
inline ModelConfig default_config(double delta_max = 1e-2, int xi = 1) {
  ModelConfig c;
  const double p_mu = 0.999;
  c.intensities.settings = {{"mu", 0.48, p_mu}, {"nu", 0.1, (1.0 - p_mu) / 2}, {"omega", 1e-4, (1.0 - p_mu) / 2}};
  c.intensities.signal = "mu";
  c.basis = {0.999, 1.0 - 0.999};
  CoarseGrained cg;
  cg.delta_max = delta_max;
  cg.xi = xi;
  c.correlation = cg;
  return c;
}

}  // namespace qkdcs
