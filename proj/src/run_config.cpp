#include "pontryagus/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <functional>
#include <map>

namespace pontryagus {

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad value '" + text + "' for " + key);
  return v;
}

}  // namespace

void RunConfig::validate() const {
  auto wrap = [](const std::string& block, const std::function<void()>& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("[" + block + "] " + e.what());
    }
  };
  if (output_dir.empty()) throw ConfigError("[run] output_dir must not be empty");
  if (threads < 0) throw ConfigError("[run] threads must be non-negative");
  wrap("mission", [&] { mission.validate(); });
  if (max_restarts < 1) throw ConfigError("[nominal] max_restarts must be positive");
  if (!(costate_box > 0.0)) throw ConfigError("[nominal] costate_box must be positive");
  wrap("walk", [&] { walk.validate(); });
  wrap("homotopy", [&] { homotopy.validate(); });
  wrap("training", [&] { training.validate(); });
  if (checkpoint_every < 0) throw ConfigError("[training] checkpoint_every must be non-negative");
  if (eval_transfers < 1) throw ConfigError("[evaluate] transfers must be positive");
  if (!(rollout_update_fraction > 0.0 && rollout_update_fraction <= 1.0)) {
    throw ConfigError("[rollout] update_fraction must lie in (0, 1]");
  }
}

NominalConfig RunConfig::nominal_config() const {
  NominalConfig n;
  n.seed = seed;
  n.max_restarts = max_restarts;
  n.costate_box = costate_box;
  n.time_of_flight = mission.time_of_flight();
  n.homotopy = homotopy;
  return n;
}

RunConfig load_run_config(const std::string& path, const char* seed_override) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }

  RunConfig cfg;
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  auto real = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_value<double>(k, v); };
  };
  auto integer = [](int& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_value<int>(k, v); };
  };
  auto orbit = [&](const std::string& side, OrbitSpec& o, std::map<std::string, Setter>& table) {
    table[side + ".a_au"] = real(o.a_au);
    table[side + ".e"] = real(o.e);
    table[side + ".i_deg"] = real(o.i_deg);
    table[side + ".omega_deg"] = real(o.omega_deg);
    table[side + ".raan_deg"] = real(o.raan_deg);
  };

  std::map<std::string, Setter> table;
  table["run.output_dir"] = [&](const std::string&, const std::string& v) { cfg.output_dir = v; };
  table["run.seed"] = [&](const std::string& k, const std::string& v) { cfg.seed = parse_value<std::uint64_t>(k, v); };
  table["run.threads"] = integer(cfg.threads);
  table["constants.mu_sun"] = real(cfg.mission.constants.mu_sun);
  table["constants.g0"] = real(cfg.mission.constants.g0);
  table["constants.au"] = real(cfg.mission.constants.au);
  orbit("departure", cfg.mission.departure, table);
  orbit("arrival", cfg.mission.arrival, table);
  table["engine.m0_kg"] = real(cfg.mission.m0_kg);
  table["engine.tmax_N"] = real(cfg.mission.tmax_N);
  table["engine.isp_s"] = real(cfg.mission.isp_s);
  table["engine.tof_days"] = real(cfg.mission.tof_days);
  table["nominal.max_restarts"] = integer(cfg.max_restarts);
  table["nominal.costate_box"] = real(cfg.costate_box);
  table["walk.gamma_bar"] = real(cfg.walk.gamma_bar);
  table["walk.n"] = integer(cfg.walk.n);
  table["walk.start_points"] = integer(cfg.walk.start_points);
  table["homotopy.alpha_tol"] = real(cfg.homotopy.alpha_tol);
  table["homotopy.max_iters"] = integer(cfg.homotopy.max_iters);
  table["training.batch"] = integer(cfg.training.batch);
  table["training.lr0"] = real(cfg.training.lr0);
  table["training.lr_factor"] = real(cfg.training.lr_factor);
  table["training.lr_patience"] = integer(cfg.training.lr_patience);
  table["training.stop_patience"] = integer(cfg.training.stop_patience);
  table["training.plateau_delta"] = real(cfg.training.plateau_delta);
  table["training.val_fraction"] = real(cfg.training.val_fraction);
  table["training.max_epochs"] = integer(cfg.training.max_epochs);
  table["training.checkpoint_every"] = integer(cfg.checkpoint_every);
  table["evaluate.transfers"] = integer(cfg.eval_transfers);
  table["rollout.update_fraction"] = real(cfg.rollout_update_fraction);

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any [section]");
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown key [" + section + "] " + key);
      it->second(full, node.data());
    }
  }
  if (seed_override && *seed_override) cfg.seed = parse_value<std::uint64_t>("PONTRYAGUS_SEED", seed_override);
  cfg.walk.seed = cfg.seed;
  cfg.training.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void stamp_units(DatasetInfo& info, const MissionSpec& mission) {
  const CanonicalUnits cu = mission.units();
  info.length_unit_m = cu.length_unit();
  info.mass_unit_kg = cu.mass_unit();
  info.time_unit_s = cu.time_unit();
}

}  // namespace pontryagus
