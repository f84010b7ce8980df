#include "bbm/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <toml.hpp>

#include "bbm/error.hpp"

namespace bbm {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::pair<ExperimentName, std::string_view> kNames[] = {
    {ExperimentName::Ergodic, "ergodic"},         {ExperimentName::Survival, "survival"},
    {ExperimentName::Phase, "phase"},             {ExperimentName::Martingale, "martingale"},
    {ExperimentName::WindowTail, "window-tail"},  {ExperimentName::BridgeCheck, "bridge-check"},
    {ExperimentName::Wave, "wave"},
};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

double as_real(const Json& v, const std::string& key) {
  if (!v.is_number()) invalid(key + " must be a number");
  return v.get<double>();
}

std::uint64_t as_count(const Json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  invalid(key + " must be a non-negative integer");
}

std::vector<double> as_reals(const Json& v, const std::string& key) {
  if (!v.is_array()) invalid(key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, key));
  return out;
}

std::string as_text(const Json& v, const std::string& key) {
  if (!v.is_string()) invalid(key + " must be a string");
  return v.get<std::string>();
}

std::string_view mode_name(BarrierMode mode) {
  switch (mode) {
    case BarrierMode::None: return "none";
    case BarrierMode::Full: return "full";
    case BarrierMode::TruncatedAt: return "truncated";
  }
  return "none";
}

using Setter = std::function<void(ExperimentConfig&, const Json&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"sim",
       {
           {"initial_position",
            [](auto& c, const Json& v) { c.sim.initial_position = as_real(v, "initial_position"); }},
           {"horizon", [](auto& c, const Json& v) { c.sim.horizon = as_real(v, "horizon"); }},
           {"obs_grid_step",
            [](auto& c, const Json& v) { c.sim.obs_grid_step = as_real(v, "obs_grid_step"); }},
           {"particle_cap",
            [](auto& c, const Json& v) { c.sim.particle_cap = as_count(v, "particle_cap"); }},
           {"seed", [](auto& c, const Json& v) { c.sim.seed = as_count(v, "seed"); }},
           {"drift", [](auto& c, const Json& v) { c.sim.drift = as_real(v, "drift"); }},
           {"branching",
            [](auto& c, const Json& v) {
              if (!v.is_boolean()) invalid("branching must be a boolean");
              c.sim.branching = v.get<bool>();
            }},
           {"knots",
            [](auto& c, const Json& v) {
              const auto text = as_text(v, "knots");
              if (text == "all") c.sim.knots = KnotRetention::All;
              else if (text == "sparse") c.sim.knots = KnotRetention::Sparse;
              else invalid("knots must be \"all\" or \"sparse\"");
            }},
           {"survival_cutoff",
            [](auto& c, const Json& v) { c.sim.survival_cutoff = as_count(v, "survival_cutoff"); }},
           {"offspring",
            [](auto& c, const Json& v) {
              if (!v.is_array()) invalid("offspring must be an array of [k, p] pairs");
              std::vector<OffspringLaw::Mass> masses;
              for (const auto& pair : v) {
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer())
                  invalid("offspring entries must be [k, p] with integer k");
                masses.push_back({pair[0].get<int>(), as_real(pair[1], "offspring")});
              }
              try {
                c.sim.offspring = validate_offspring(std::move(masses));
              } catch (const Error& e) {
                invalid(std::string("offspring: ") + e.what());
              }
            }},
       }},
      {"barrier",
       {
           {"slope", [](auto& c, const Json& v) { c.sim.barrier.slope = as_real(v, "slope"); }},
           {"mode",
            [](auto& c, const Json& v) {
              const auto text = as_text(v, "mode");
              if (text == "none") c.sim.barrier.mode = BarrierMode::None;
              else if (text == "full") c.sim.barrier.mode = BarrierMode::Full;
              else if (text == "truncated") c.sim.barrier.mode = BarrierMode::TruncatedAt;
              else invalid("mode must be none, full or truncated");
            }},
           {"truncation",
            [](auto& c, const Json& v) { c.sim.barrier.truncation = as_real(v, "truncation"); }},
       }},
      {"experiment",
       {
           {"name",
            [](auto& c, const Json& v) {
              if (parse_experiment_name(as_text(v, "name")) != c.name)
                invalid("experiment.name does not match the selected experiment");
            }},
           {"replicas", [](auto& c, const Json& v) { c.replicas = as_count(v, "replicas"); }},
           {"z_grid", [](auto& c, const Json& v) { c.z_grid = as_reals(v, "z_grid"); }},
           {"truncation_time",
            [](auto& c, const Json& v) {
              if (v.is_null()) c.truncation_time.reset();
              else c.truncation_time = as_real(v, "truncation_time");
            }},
           {"burn_in_fraction",
            [](auto& c, const Json& v) { c.burn_in_fraction = as_real(v, "burn_in_fraction"); }},
           {"output_dir", [](auto& c, const Json& v) { c.output_dir = as_text(v, "output_dir"); }},
           {"times", [](auto& c, const Json& v) { c.times = as_reals(v, "times"); }},
           {"sweep", [](auto& c, const Json& v) { c.sweep = as_reals(v, "sweep"); }},
           {"level", [](auto& c, const Json& v) { c.level = as_real(v, "level"); }},
           {"slopes", [](auto& c, const Json& v) { c.slopes = as_reals(v, "slopes"); }},
           {"trials", [](auto& c, const Json& v) { c.trials = as_count(v, "trials"); }},
           {"lineage_horizon",
            [](auto& c, const Json& v) { c.lineage_horizon = as_real(v, "lineage_horizon"); }},
           {"lineage_step",
            [](auto& c, const Json& v) { c.lineage_step = as_real(v, "lineage_step"); }},
           {"fine_step", [](auto& c, const Json& v) { c.fine_step = as_real(v, "fine_step"); }},
           {"bootstrap", [](auto& c, const Json& v) { c.bootstrap = as_count(v, "bootstrap"); }},
           {"wave_step", [](auto& c, const Json& v) { c.wave_step = as_real(v, "wave_step"); }},
           {"wave_tol", [](auto& c, const Json& v) { c.wave_tol = as_real(v, "wave_tol"); }},
           {"free_z_min", [](auto& c, const Json& v) { c.free_z_min = as_real(v, "free_z_min"); }},
           {"free_z_max", [](auto& c, const Json& v) { c.free_z_max = as_real(v, "free_z_max"); }},
       }},
  };
  return table;
}

void apply_json(ExperimentConfig& cfg, const Json& doc) {
  if (!doc.is_object()) invalid("configuration must be a table");
  const auto& table = setters();
  for (const auto& [section, body] : doc.items()) {
    const auto found = table.find(section);
    if (found == table.end()) invalid("unknown section [" + section + "]");
    if (!body.is_object()) invalid("[" + section + "] must be a table");
    for (const auto& [key, value] : body.items()) {
      const auto setter = found->second.find(key);
      if (setter == found->second.end()) invalid("unknown key " + section + "." + key);
      setter->second(cfg, value);
    }
  }
}

Json from_toml(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = from_toml(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& value : *a) out.push_back(from_toml(value));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  invalid("unsupported TOML value type");
}

std::vector<double> linspace(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<long>(std::llround((hi - lo) / step));
  for (long i = 0; i <= n; ++i) out.push_back(lo + step * static_cast<double>(i));
  return out;
}

}  // namespace

std::string_view to_string(ExperimentName name) {
  for (const auto& [value, text] : kNames)
    if (value == name) return text;
  return "ergodic";
}

ExperimentName parse_experiment_name(std::string_view text) {
  for (const auto& [value, spelled] : kNames)
    if (spelled == text) return value;
  invalid("unknown experiment " + std::string(text));
}

void ExperimentConfig::validate() const {
  sim.validate();
  if (replicas < 1) invalid("replicas must be >= 1");
  for (std::size_t i = 1; i < z_grid.size(); ++i)
    if (!(z_grid[i] > z_grid[i - 1])) invalid("z_grid must be strictly increasing");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    invalid("burn_in_fraction must lie in [0, 1)");
  if (truncation_time && !(*truncation_time >= 0.0)) invalid("truncation_time must be >= 0");
  for (const double t : times)
    if (!(t > 0.0)) invalid("times must be positive");
  for (const double s : sweep)
    if (!(s >= 0.0)) invalid("sweep entries must be >= 0");
  for (const double s : slopes)
    if (!std::isfinite(s)) invalid("slopes must be finite");
  if (trials < 1) invalid("trials must be >= 1");
  if (!(lineage_horizon > 0.0) || !(lineage_step > 0.0) || !(fine_step > 0.0))
    invalid("lineage_horizon, lineage_step and fine_step must be > 0");
  if (!(wave_step > 0.0) || !(wave_tol > 0.0)) invalid("wave_step and wave_tol must be > 0");
  if (!(free_z_min < free_z_max)) invalid("free_z_min must be below free_z_max");
}

ExperimentConfig default_config(ExperimentName name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.sim.initial_position = 1.0;
  cfg.sim.obs_grid_step = 0.05;
  switch (name) {
    case ExperimentName::Ergodic:
      cfg.sim.horizon = 14.0;
      cfg.sim.obs_grid_step = 0.02;
      cfg.sim.barrier = BarrierSpec::full(0.0);
      cfg.replicas = 64;
      cfg.z_grid = linspace(-6.0, 6.0, 0.02);
      break;
    case ExperimentName::WindowTail:
      cfg.sim.horizon = 12.0;
      cfg.sim.barrier = BarrierSpec::truncated_at(0.5, 2.0);
      cfg.replicas = 64;
      cfg.sweep = {2.0, 4.0, 6.0};
      // T^0.4 on the observation grid.
      cfg.truncation_time = std::round(std::pow(12.0, 0.4) / 0.05) * 0.05;
      break;
    case ExperimentName::Survival:
      cfg.sim.horizon = 30.0;
      cfg.sim.barrier = BarrierSpec::full(0.5);
      cfg.sim.survival_cutoff = 256;
      cfg.replicas = 1000;
      break;
    case ExperimentName::Phase:
      cfg.sim.horizon = 30.0;
      cfg.sim.barrier = BarrierSpec::full(0.5);
      cfg.sim.survival_cutoff = 256;
      cfg.replicas = 1000;
      cfg.slopes = {0.5, 1.0, kSqrt2, 1.6};
      break;
    case ExperimentName::Martingale:
      cfg.sim.horizon = 3.0;
      cfg.sim.obs_grid_step = 0.5;
      cfg.sim.barrier = BarrierSpec::none();
      cfg.replicas = 10'000;
      cfg.times = {1.0, 2.0, 3.0};
      break;
    case ExperimentName::BridgeCheck:
      cfg.replicas = 1;
      break;
    case ExperimentName::Wave:
      cfg.sim.barrier = BarrierSpec::full(0.5);
      cfg.replicas = 1;
      break;
  }
  return cfg;
}

void apply_toml_text(ExperimentConfig& cfg, std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream where;
    where << e.source().begin;
    invalid("TOML parse error at " + where.str() + ": " + std::string(e.description()));
  }
  apply_json(cfg, from_toml(doc));
}

void apply_toml_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_toml_text(cfg, text.str());
}

Json to_json(const ExperimentConfig& cfg) {
  Json offspring = Json::array();
  for (const auto& m : cfg.sim.offspring.masses()) offspring.push_back({m.count, m.probability});
  Json out;
  out["sim"] = {
      {"initial_position", cfg.sim.initial_position},
      {"horizon", cfg.sim.horizon},
      {"obs_grid_step", cfg.sim.obs_grid_step},
      {"particle_cap", cfg.sim.particle_cap},
      {"seed", cfg.sim.seed},
      {"offspring", offspring},
      {"drift", cfg.sim.drift},
      {"branching", cfg.sim.branching},
      {"knots", cfg.sim.knots == KnotRetention::All ? "all" : "sparse"},
      {"survival_cutoff", cfg.sim.survival_cutoff},
  };
  out["barrier"] = {
      {"slope", cfg.sim.barrier.slope},
      {"mode", mode_name(cfg.sim.barrier.mode)},
      {"truncation", cfg.sim.barrier.truncation},
  };
  out["experiment"] = {
      {"name", to_string(cfg.name)},
      {"replicas", cfg.replicas},
      {"z_grid", cfg.z_grid},
      {"truncation_time", cfg.truncation_time ? Json(*cfg.truncation_time) : Json(nullptr)},
      {"burn_in_fraction", cfg.burn_in_fraction},
      {"output_dir", cfg.output_dir},
      {"times", cfg.times},
      {"sweep", cfg.sweep},
      {"level", cfg.level},
      {"slopes", cfg.slopes},
      {"trials", cfg.trials},
      {"lineage_horizon", cfg.lineage_horizon},
      {"lineage_step", cfg.lineage_step},
      {"fine_step", cfg.fine_step},
      {"bootstrap", cfg.bootstrap},
      {"wave_step", cfg.wave_step},
      {"wave_tol", cfg.wave_tol},
      {"free_z_min", cfg.free_z_min},
      {"free_z_max", cfg.free_z_max},
  };
  return out;
}

ExperimentConfig config_from_json(const Json& json) {
  if (!json.is_object() || !json.contains("experiment") || !json["experiment"].contains("name"))
    invalid("configuration lacks experiment.name");
  ExperimentConfig cfg =
      default_config(parse_experiment_name(as_text(json["experiment"]["name"], "name")));
  apply_json(cfg, json);
  return cfg;
}

}  // namespace bbm
