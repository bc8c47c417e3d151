#pragma once

// JSON scenario files. Field names mirror ModelConfig; keys starting with '_' are
// comments and ignored, any other unknown key is rejected.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "qkdcs/core_model.hpp"
#include "qkdcs/errors.hpp"
#include "qkdcs/keyrate.hpp"

namespace qkdcs {

using json = nlohmann::json;

struct SweepRange {
  double start = 0.0;
  double stop = 150.0;
  double step = 10.0;
  ComparisonMode mode = ComparisonMode::Both;
};

struct ScenarioFile {
  ModelConfig model;
  SweepRange sweep;
};

inline const char* to_string(ComparisonMode m) {
  switch (m) {
    case ComparisonMode::CandidateRefs: return "candidate";
    case ComparisonMode::CanonicalRefs: return "canonical";
    case ComparisonMode::Both: return "both";
  }
  return "?";
}

inline ComparisonMode parse_mode(const std::string& s) {
  if (s == "candidate") return ComparisonMode::CandidateRefs;
  if (s == "canonical") return ComparisonMode::CanonicalRefs;
  if (s == "both") return ComparisonMode::Both;
  throw ConfigError("mode must be one of candidate, canonical, both (got '" + s + "')");
}

namespace detail {

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!key.starts_with("_") && !ok.count(key)) throw ConfigError(path + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

inline SettingSequence parse_history(const json& j, const IntensitySet& set, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": history must be a list of intensity labels");
  SettingSequence seq;
  for (const auto& item : j) {
    if (!item.is_string()) throw ConfigError(path + ": history entries must be labels");
    auto idx = set.index_of(item.get<std::string>());
    if (!idx) throw ConfigError(path + ": unknown intensity label '" + item.get<std::string>() + "'");
    seq.push_back(*idx);
  }
  return seq;
}

inline json history_json(const IntensitySet& set, const SettingSequence& seq) {
  json out = json::array();
  for (auto i : seq) out.push_back(set[i].label);
  return out;
}

}  // namespace detail

inline ScenarioFile parse_scenario(const json& root) {
  using detail::get_or;
  detail::check_keys(root, "config",
                     {"intensities", "signal", "basis", "correlation", "formulation", "channel", "protocol", "sweep"});
  ScenarioFile out;
  ModelConfig& c = out.model;
  c = default_config();

  if (root.contains("intensities")) {
    const auto& list = root.at("intensities");
    if (!list.is_array()) throw ConfigError("intensities: expected a list");
    c.intensities.settings.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "intensities[" + std::to_string(i) + "]";
      detail::check_keys(list[i], path, {"label", "intensity", "probability"});
      IntensitySetting s;
      s.label = get_or<std::string>(list[i], "label", "", path);
      s.intensity = get_or<double>(list[i], "intensity", 0.0, path);
      s.probability = get_or<double>(list[i], "probability", 0.0, path);
      c.intensities.settings.push_back(s);
    }
  }
  c.intensities.signal = get_or<std::string>(root, "signal", c.intensities.signal, "config");

  if (root.contains("basis")) {
    const auto& b = root.at("basis");
    detail::check_keys(b, "basis", {"q_z"});
    c.basis.q_z = get_or<double>(b, "q_z", c.basis.q_z, "basis");
    c.basis.q_x = 1.0 - c.basis.q_z;
  }

  if (root.contains("correlation")) {
    const auto& k = root.at("correlation");
    const auto model = get_or<std::string>(k, "model", "coarse", "correlation");
    if (model == "coarse") {
      detail::check_keys(k, "correlation", {"model", "delta_max", "xi", "delta_by_history"});
      CoarseGrained cg;
      cg.delta_max = get_or<double>(k, "delta_max", 0.0, "correlation");
      cg.xi = get_or<int>(k, "xi", 1, "correlation");
      if (k.contains("delta_by_history")) {
        const auto& list = k.at("delta_by_history");
        if (!list.is_array()) throw ConfigError("correlation.delta_by_history: expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
          const std::string path = "correlation.delta_by_history[" + std::to_string(i) + "]";
          detail::check_keys(list[i], path, {"history", "delta"});
          if (!list[i].contains("history")) throw ConfigError(path + ": missing history");
          cg.delta_by_history[detail::parse_history(list[i].at("history"), c.intensities, path)] =
              get_or<double>(list[i], "delta", 0.0, path);
        }
      }
      c.correlation = cg;
    } else if (model == "truncated_gaussian") {
      detail::check_keys(k, "correlation", {"model", "xi", "table"});
      TruncatedGaussian tg;
      tg.xi = get_or<int>(k, "xi", 1, "correlation");
      const json empty = json::array();
      const auto& list = k.contains("table") ? k.at("table") : empty;
      if (!list.is_array()) throw ConfigError("correlation.table: expected a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "correlation.table[" + std::to_string(i) + "]";
        detail::check_keys(list[i], path, {"history", "mean", "stddev", "lower", "upper"});
        if (!list[i].contains("history")) throw ConfigError(path + ": missing history");
        GaussianParams g;
        g.mean = get_or<double>(list[i], "mean", 0.0, path);
        g.stddev = get_or<double>(list[i], "stddev", 0.0, path);
        g.lower = get_or<double>(list[i], "lower", 0.0, path);
        g.upper = get_or<double>(list[i], "upper", 0.0, path);
        tg.table[detail::parse_history(list[i].at("history"), c.intensities, path)] = g;
      }
      c.correlation = tg;
    } else {
      throw ConfigError("correlation.model must be 'coarse' or 'truncated_gaussian'");
    }
  }

  const auto form = get_or<std::string>(root, "formulation", "coarse", "config");
  if (form == "coarse")
    c.formulation = Formulation::Coarse;
  else if (form == "fine")
    c.formulation = Formulation::Fine;
  else
    throw ConfigError("formulation must be 'coarse' or 'fine'");

  if (root.contains("channel")) {
    const auto& ch = root.at("channel");
    detail::check_keys(ch, "channel", {"eta_det", "dark_count", "misalignment", "loss_db_per_km"});
    c.channel.eta_det = get_or<double>(ch, "eta_det", c.channel.eta_det, "channel");
    c.channel.dark_count = get_or<double>(ch, "dark_count", c.channel.dark_count, "channel");
    c.channel.misalignment = get_or<double>(ch, "misalignment", c.channel.misalignment, "channel");
    c.channel.loss_db_per_km = get_or<double>(ch, "loss_db_per_km", c.channel.loss_db_per_km, "channel");
  }

  if (root.contains("protocol")) {
    const auto& p = root.at("protocol");
    detail::check_keys(p, "protocol", {"f_ec", "n_cut", "e_tol"});
    c.protocol.f_ec = get_or<double>(p, "f_ec", c.protocol.f_ec, "protocol");
    c.protocol.n_cut = get_or<int>(p, "n_cut", c.protocol.n_cut, "protocol");
    if (p.contains("e_tol")) {
      const auto& e = p.at("e_tol");
      if (e.is_string() && e.get<std::string>() == "model")
        c.protocol.e_tol = ErrorTolerance::from_channel_model();
      else if (e.is_number())
        c.protocol.e_tol = ErrorTolerance::fixed(e.get<double>());
      else
        throw ConfigError("protocol.e_tol must be \"model\" or a number");
    }
  }

  if (root.contains("sweep")) {
    const auto& s = root.at("sweep");
    detail::check_keys(s, "sweep", {"start", "stop", "step", "mode"});
    out.sweep.start = get_or<double>(s, "start", out.sweep.start, "sweep");
    out.sweep.stop = get_or<double>(s, "stop", out.sweep.stop, "sweep");
    out.sweep.step = get_or<double>(s, "step", out.sweep.step, "sweep");
    if (s.contains("mode")) out.sweep.mode = parse_mode(get_or<std::string>(s, "mode", "both", "sweep"));
  }

  const auto v = validate(c);
  if (!v.ok()) {
    std::string msg = "invalid configuration:";
    for (const auto& x : v.violations) msg += "\n  " + x.path + ": " + x.message;
    throw ConfigError(msg);
  }
  return out;
}

inline ScenarioFile parse_scenario_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_scenario(root);
}

inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

inline json to_json(const ModelConfig& c) {
  json root;
  for (const auto& s : c.intensities.settings)
    root["intensities"].push_back({{"label", s.label}, {"intensity", s.intensity}, {"probability", s.probability}});
  root["signal"] = c.intensities.signal;
  root["basis"] = {{"q_z", c.basis.q_z}};
  if (const auto* cg = std::get_if<CoarseGrained>(&c.correlation)) {
    json k = {{"model", "coarse"}, {"delta_max", cg->delta_max}, {"xi", cg->xi}};
    for (const auto& [h, d] : cg->delta_by_history)
      k["delta_by_history"].push_back({{"history", detail::history_json(c.intensities, h)}, {"delta", d}});
    root["correlation"] = k;
  } else {
    const auto& tg = std::get<TruncatedGaussian>(c.correlation);
    json k = {{"model", "truncated_gaussian"}, {"xi", tg.xi}, {"table", json::array()}};
    for (const auto& [h, g] : tg.table)
      k["table"].push_back({{"history", detail::history_json(c.intensities, h)},
                            {"mean", g.mean},
                            {"stddev", g.stddev},
                            {"lower", g.lower},
                            {"upper", g.upper}});
    root["correlation"] = k;
  }
  root["formulation"] = c.formulation == Formulation::Fine ? "fine" : "coarse";
  root["channel"] = {{"eta_det", c.channel.eta_det},
                     {"dark_count", c.channel.dark_count},
                     {"misalignment", c.channel.misalignment},
                     {"loss_db_per_km", c.channel.loss_db_per_km}};
  json p = {{"f_ec", c.protocol.f_ec}, {"n_cut", c.protocol.n_cut}};
  if (c.protocol.e_tol.policy == ErrorTolerance::Policy::Fixed)
    p["e_tol"] = c.protocol.e_tol.value;
  else
    p["e_tol"] = "model";
  root["protocol"] = p;
  return root;
}

}  // namespace qkdcs
