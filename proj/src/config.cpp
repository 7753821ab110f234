#include "eit/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eit/common.hpp"

namespace eit {
namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(path + "." + item.key(), "unknown field");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double as_number(const json& value, const std::string& path) {
  if (!value.is_number()) fail(path, "must be a number");
  return value.get<double>();
}

double require_number(const json& obj, const std::string& path, const char* key) {
  return as_number(require(obj, path, key), path + "." + key);
}

double optional_number(const json& obj, const std::string& path, const char* key,
                       double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return as_number(obj.at(key), path + "." + key);
}

long long as_integer(const json& value, const std::string& path) {
  if (!value.is_number_integer()) fail(path, "must be an integer");
  return value.get<long long>();
}

long long optional_integer(const json& obj, const std::string& path, const char* key,
                           long long fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return as_integer(obj.at(key), path + "." + key);
}

bool optional_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_boolean()) fail(path + "." + key, "must be a boolean");
  return value.get<bool>();
}

std::string require_string(const json& obj, const std::string& path, const char* key) {
  const json& value = require(obj, path, key);
  if (!value.is_string()) fail(path + "." + key, "must be a string");
  return value.get<std::string>();
}

Eigen::Vector3d as_vector3(const json& value, const std::string& path) {
  if (!value.is_array() || value.size() != 3) fail(path, "must be a 3-element array");
  Eigen::Vector3d out;
  for (int d = 0; d < 3; ++d) out[d] = as_number(value[d], path);
  if (!out.allFinite()) fail(path, "entries must be finite");
  return out;
}

void parse_mesh(const json& obj, const std::string& path, MeshSpec* spec) {
  if (!obj.is_object()) fail(path, "must be an object");
  if (obj.contains("file")) {
    check_keys(obj, path, {"file"});
    const json& file = obj.at("file");
    if (!file.is_string() || file.get<std::string>().empty())
      fail(path + ".file", "must be a non-empty path string");
    spec->file = file.get<std::string>();
    return;
  }
  check_keys(obj, path,
             {"outer_radius", "inner_radius", "mid_radius", "edge_length", "flat_bottom_height"});
  spec->outer_radius = require_number(obj, path, "outer_radius");
  spec->inner_radius = require_number(obj, path, "inner_radius");
  spec->mid_radius = require_number(obj, path, "mid_radius");
  spec->edge_length = require_number(obj, path, "edge_length");
  spec->flat_bottom_height = optional_number(obj, path, "flat_bottom_height", 0.0);
  if (!(spec->outer_radius > 0)) fail(path + ".outer_radius", "must be positive");
  if (!(spec->inner_radius > 0)) fail(path + ".inner_radius", "must be positive");
  if (!(spec->inner_radius < spec->mid_radius))
    fail(path + ".mid_radius", "must exceed inner_radius");
  if (!(spec->mid_radius < spec->outer_radius))
    fail(path + ".outer_radius", "must exceed mid_radius");
  if (!(spec->edge_length > 0)) fail(path + ".edge_length", "must be positive");
  if (!(spec->flat_bottom_height >= 0) || !(spec->flat_bottom_height < spec->outer_radius))
    fail(path + ".flat_bottom_height", "must lie in [0, outer_radius)");
}

Eigen::MatrixXd parse_layout(const json& obj, const std::string& path, std::string* preset) {
  if (!obj.is_object()) fail(path, "must be an object");
  const bool has_preset = obj.contains("preset");
  const bool has_angles = obj.contains("angles");
  if (has_preset == has_angles) fail(path, "give exactly one of 'preset' or 'angles'");
  if (has_preset) {
    check_keys(obj, path, {"preset"});
    *preset = require_string(obj, path, "preset");
    try {
      return preset_layout(*preset);
    } catch (const ConfigError&) {
      fail(path + ".preset",
           "unknown layout preset '" + *preset + "' (expected symmetric12 or quadrant12)");
    }
  }
  check_keys(obj, path, {"angles"});
  const json& list = obj.at("angles");
  if (!list.is_array() || list.size() < 2)
    fail(path + ".angles", "must be an array of at least two [theta, phi] pairs");
  Eigen::MatrixXd angles(static_cast<int>(list.size()), 2);
  for (int e = 0; e < angles.rows(); ++e) {
    const std::string entry = path + ".angles[" + std::to_string(e) + "]";
    const json& pair = list[e];
    if (!pair.is_array() || pair.size() != 2) fail(entry, "must be a [theta, phi] pair");
    angles(e, 0) = as_number(pair[0], entry);
    angles(e, 1) = as_number(pair[1], entry);
    if (!(angles(e, 0) > 0.0) || !(angles(e, 0) < kPi / 2))
      fail(entry, "polar angle must lie strictly inside (0, pi/2)");
    if (!std::isfinite(angles(e, 1))) fail(entry, "azimuth must be finite");
  }
  return angles;
}

json canonical_document(json doc) {
  // The seed selects a noise draw, not an experiment; artifacts from
  // different seeds of one experiment must recognize each other.
  if (doc.is_object() && doc.contains("noise") && doc["noise"].is_object())
    doc["noise"].erase("seed");
  return doc;
}

const char* kGaussianFullbrain = R"json({
  "mesh": {"outer_radius": 0.09, "inner_radius": 0.07, "mid_radius": 0.08, "edge_length": 0.015},
  "layout": {"preset": "symmetric12"},
  "electrodes": {"radius": 0.024, "tau": 0.4, "zeta": 1000.0, "feeding": 0},
  "conductivity": {"skin": 0.2, "skull": 0.06, "brain": 0.2},
  "noise": {"omega": 0.001, "seed": 1},
  "mode": "gaussian-roi",
  "prior": {"length_scale": 0.05, "std_dev": 0.2},
  "optimizer": {"max_iterations": 40}
})json";

const char* kGaussianQuadrant = R"json({
  "mesh": {"outer_radius": 0.09, "inner_radius": 0.07, "mid_radius": 0.08, "edge_length": 0.015},
  "layout": {"preset": "symmetric12"},
  "electrodes": {"radius": 0.024, "tau": 0.4, "zeta": 1000.0, "feeding": 0},
  "conductivity": {"skin": 0.2, "skull": 0.06, "brain": 0.2},
  "noise": {"omega": 0.001, "seed": 1},
  "mode": "gaussian-roi",
  "prior": {"length_scale": 0.05, "std_dev": 0.2},
  "roi": {"halfspaces": [{"normal": [-1.0, 0.0, 0.0], "offset": 0.0},
                          {"normal": [0.0, -1.0, 0.0], "offset": 0.0}]},
  "optimizer": {"max_iterations": 40}
})json";

const char* kTvAdaptive = R"json({
  "mesh": {"outer_radius": 0.09, "inner_radius": 0.07, "mid_radius": 0.08, "edge_length": 0.015},
  "layout": {"preset": "symmetric12"},
  "electrodes": {"radius": 0.024, "tau": 0.4, "zeta": 1000.0, "feeding": 0},
  "conductivity": {"skin": 0.2, "skull": 0.06, "brain": 0.2},
  "noise": {"omega": 0.001, "seed": 1},
  "mode": "tv-adaptive",
  "prior": {"length_scale": 0.05, "std_dev": 0.2},
  "tv": {"gamma": 100000.0, "smoothing": 1e-06, "weight_steepness": 300.0,
         "weight_offset": 0.01, "linearizations": 5, "inner_steps": 5, "contacts_known": true},
  "inclusion": {"center": [-0.022, -0.022, 0.036], "radius": 0.018, "amplitude": 0.1},
  "optimizer": {"max_iterations": 40}
})json";

}  // namespace

Eigen::MatrixXd preset_layout(const std::string& name) {
  const double deg = kPi / 180.0;
  if (name == "symmetric12") {
    Eigen::MatrixXd angles(12, 2);
    for (int k = 0; k < 4; ++k) {
      angles(k, 0) = 0.60;
      angles(k, 1) = (45.0 + 90.0 * k) * deg;
    }
    for (int k = 0; k < 8; ++k) {
      angles(4 + k, 0) = 1.30;
      angles(4 + k, 1) = (22.5 + 45.0 * k) * deg;
    }
    return angles;
  }
  if (name == "quadrant12") {
    const double center = 225.0 * deg;
    Eigen::MatrixXd angles(12, 2);
    const double ring1[] = {-95.0, 0.0, 95.0};
    const double ring2[] = {-105.0, -35.0, 35.0, 105.0};
    const double ring3[] = {-90.0, -45.0, 0.0, 45.0, 90.0};
    int row = 0;
    for (double off : ring1) angles.row(row++) << 0.42, center + off * deg;
    for (double off : ring2) angles.row(row++) << 0.98, center + off * deg;
    for (double off : ring3) angles.row(row++) << 1.50, center + off * deg;
    return angles;
  }
  throw ConfigError("unknown layout preset '" + name + "'");
}

ExperimentConfig parse_config_text(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  try {
    if (!doc.is_object()) fail("$", "config document must be a JSON object");
    check_keys(doc, "$",
               {"mesh", "layout", "electrodes", "conductivity", "noise", "mode", "prior", "tv",
                "roi", "optimizer", "inclusion"});
    ExperimentConfig config;

    parse_mesh(require(doc, "$", "mesh"), "mesh", &config.mesh);
    config.layout = parse_layout(require(doc, "$", "layout"), "layout", &config.layout_preset);
    const int m = static_cast<int>(config.layout.rows());

    const json& elec = require(doc, "$", "electrodes");
    if (!elec.is_object()) fail("electrodes", "must be an object");
    check_keys(elec, "electrodes", {"radius", "tau", "zeta", "feeding", "min_separation"});
    config.contact_radius = require_number(elec, "electrodes", "radius");
    if (!(config.contact_radius > 0)) fail("electrodes.radius", "must be positive");
    config.contact_tau = require_number(elec, "electrodes", "tau");
    if (!(config.contact_tau > 0)) fail("electrodes.tau", "must be positive");
    const json& zeta = require(elec, "electrodes", "zeta");
    if (zeta.is_number()) {
      config.zeta_uniform = true;
      config.zeta = Eigen::VectorXd::Constant(m, zeta.get<double>());
    } else if (zeta.is_array()) {
      config.zeta_uniform = false;
      if (static_cast<int>(zeta.size()) != m)
        fail("electrodes.zeta", "array length must match the number of electrodes");
      config.zeta.resize(m);
      for (int e = 0; e < m; ++e)
        config.zeta[e] = as_number(zeta[e], "electrodes.zeta[" + std::to_string(e) + "]");
    } else {
      fail("electrodes.zeta", "must be a number or an array of numbers");
    }
    for (int e = 0; e < m; ++e)
      if (!(config.zeta[e] > 0))
        fail("electrodes.zeta[" + std::to_string(e) + "]", "must be positive");
    const long long feeding = optional_integer(elec, "electrodes", "feeding", 0);
    if (feeding < 0 || feeding >= m)
      fail("electrodes.feeding", "must index one of the electrodes");
    config.feeding = static_cast<int>(feeding);
    config.min_separation =
        optional_number(elec, "electrodes", "min_separation", 2.0 * config.contact_radius);
    if (!(config.min_separation >= 0)) fail("electrodes.min_separation", "must be nonnegative");

    const json& cond = require(doc, "$", "conductivity");
    if (!cond.is_object()) fail("conductivity", "must be an object");
    check_keys(cond, "conductivity", {"skin", "skull", "brain"});
    config.sigma_skin = require_number(cond, "conductivity", "skin");
    config.sigma_skull = require_number(cond, "conductivity", "skull");
    config.sigma_brain = require_number(cond, "conductivity", "brain");
    if (!(config.sigma_skin > 0)) fail("conductivity.skin", "must be positive");
    if (!(config.sigma_skull > 0)) fail("conductivity.skull", "must be positive");
    if (!(config.sigma_brain > 0)) fail("conductivity.brain", "must be positive");

    const json& noise = require(doc, "$", "noise");
    if (!noise.is_object()) fail("noise", "must be an object");
    check_keys(noise, "noise", {"omega", "seed"});
    config.omega = require_number(noise, "noise", "omega");
    if (!(config.omega >= 0) || !std::isfinite(config.omega))
      fail("noise.omega", "must be a finite nonnegative number");
    if (noise.contains("seed")) {
      const json& seed = noise.at("seed");
      if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                        seed.get<long long>() < 0))
        fail("noise.seed", "must be a nonnegative integer");
      config.seed = seed.get<std::uint64_t>();
    }

    const std::string mode = require_string(doc, "$", "mode");
    if (mode == "gaussian-roi")
      config.mode = ExperimentMode::kGaussianRoi;
    else if (mode == "tv-adaptive")
      config.mode = ExperimentMode::kTvAdaptive;
    else
      fail("mode", "must be 'gaussian-roi' or 'tv-adaptive'");

    if (doc.contains("prior")) {
      const json& prior = doc.at("prior");
      if (!prior.is_object()) fail("prior", "must be an object");
      check_keys(prior, "prior", {"length_scale", "std_dev"});
      config.prior.length_scale =
          optional_number(prior, "prior", "length_scale", config.prior.length_scale);
      config.prior.std_dev = optional_number(prior, "prior", "std_dev", config.prior.std_dev);
      if (!(config.prior.length_scale > 0)) fail("prior.length_scale", "must be positive");
      if (!(config.prior.std_dev > 0)) fail("prior.std_dev", "must be positive");
    }

    if (doc.contains("tv")) {
      const json& tv = doc.at("tv");
      if (!tv.is_object()) fail("tv", "must be an object");
      check_keys(tv, "tv",
                 {"gamma", "smoothing", "weight_steepness", "weight_offset", "linearizations",
                  "inner_steps", "contacts_known"});
      config.tv.gamma = optional_number(tv, "tv", "gamma", config.tv.gamma);
      config.tv.smoothing = optional_number(tv, "tv", "smoothing", config.tv.smoothing);
      config.tv.weight_steepness =
          optional_number(tv, "tv", "weight_steepness", config.tv.weight_steepness);
      config.tv.weight_offset =
          optional_number(tv, "tv", "weight_offset", config.tv.weight_offset);
      config.tv.linearizations = static_cast<int>(
          optional_integer(tv, "tv", "linearizations", config.tv.linearizations));
      config.tv.inner_steps =
          static_cast<int>(optional_integer(tv, "tv", "inner_steps", config.tv.inner_steps));
      config.tv.contacts_known =
          optional_bool(tv, "tv", "contacts_known", config.tv.contacts_known);
      if (!(config.tv.gamma > 0)) fail("tv.gamma", "must be positive");
      if (!(config.tv.smoothing > 0)) fail("tv.smoothing", "must be positive");
      if (!(config.tv.weight_steepness > 0)) fail("tv.weight_steepness", "must be positive");
      if (!(config.tv.weight_offset >= 0)) fail("tv.weight_offset", "must be nonnegative");
      if (config.tv.linearizations < 1) fail("tv.linearizations", "must be at least 1");
      if (config.tv.inner_steps < 1) fail("tv.inner_steps", "must be at least 1");
    }

    if (doc.contains("roi")) {
      const json& roi = doc.at("roi");
      if (!roi.is_object()) fail("roi", "must be an object");
      check_keys(roi, "roi", {"halfspaces"});
      const json& list = require(roi, "roi", "halfspaces");
      if (!list.is_array()) fail("roi.halfspaces", "must be an array");
      for (int h = 0; h < static_cast<int>(list.size()); ++h) {
        const std::string entry = "roi.halfspaces[" + std::to_string(h) + "]";
        const json& half = list[h];
        if (!half.is_object()) fail(entry, "must be an object");
        check_keys(half, entry, {"normal", "offset"});
        HalfSpace hs;
        hs.normal = as_vector3(require(half, entry, "normal"), entry + ".normal");
        if (!(hs.normal.norm() > 0)) fail(entry + ".normal", "must be nonzero");
        hs.offset = require_number(half, entry, "offset");
        if (!std::isfinite(hs.offset)) fail(entry + ".offset", "must be finite");
        config.roi_halfspaces.push_back(hs);
      }
    }

    if (doc.contains("optimizer")) {
      const json& opt = doc.at("optimizer");
      if (!opt.is_object()) fail("optimizer", "must be an object");
      check_keys(opt, "optimizer",
                 {"epsilon", "max_iterations", "lambda_init", "slope_fraction", "backoff",
                  "max_armijo_trials", "pole_threshold", "gradient_preflight", "preflight_step",
                  "preflight_tolerance"});
      OedOptions& o = config.optimizer;
      o.epsilon = optional_number(opt, "optimizer", "epsilon", o.epsilon);
      o.max_iterations =
          static_cast<int>(optional_integer(opt, "optimizer", "max_iterations", o.max_iterations));
      o.lambda_init = optional_number(opt, "optimizer", "lambda_init", o.lambda_init);
      o.slope_fraction = optional_number(opt, "optimizer", "slope_fraction", o.slope_fraction);
      o.backoff = optional_number(opt, "optimizer", "backoff", o.backoff);
      o.max_armijo_trials = static_cast<int>(
          optional_integer(opt, "optimizer", "max_armijo_trials", o.max_armijo_trials));
      o.pole_threshold = optional_number(opt, "optimizer", "pole_threshold", o.pole_threshold);
      o.gradient_preflight =
          optional_bool(opt, "optimizer", "gradient_preflight", o.gradient_preflight);
      o.preflight_step = optional_number(opt, "optimizer", "preflight_step", o.preflight_step);
      o.preflight_tolerance =
          optional_number(opt, "optimizer", "preflight_tolerance", o.preflight_tolerance);
      if (!(o.epsilon >= 0)) fail("optimizer.epsilon", "must be nonnegative");
      if (o.max_iterations < 0) fail("optimizer.max_iterations", "must be nonnegative");
      if (!(o.lambda_init > 0)) fail("optimizer.lambda_init", "must be positive");
      if (!(o.slope_fraction > 0) || !(o.slope_fraction < 1))
        fail("optimizer.slope_fraction", "must lie strictly inside (0, 1)");
      if (!(o.backoff > 0) || !(o.backoff < 1))
        fail("optimizer.backoff", "must lie strictly inside (0, 1)");
      if (o.max_armijo_trials < 1) fail("optimizer.max_armijo_trials", "must be at least 1");
      if (!(o.pole_threshold >= 0) || !(o.pole_threshold < kPi / 2))
        fail("optimizer.pole_threshold", "must lie in [0, pi/2)");
      if (!(o.preflight_step > 0)) fail("optimizer.preflight_step", "must be positive");
      if (!(o.preflight_tolerance > 0)) fail("optimizer.preflight_tolerance", "must be positive");
    }

    if (doc.contains("inclusion")) {
      const json& inc = doc.at("inclusion");
      if (!inc.is_object()) fail("inclusion", "must be an object");
      check_keys(inc, "inclusion", {"center", "radius", "amplitude"});
      config.inclusion.present = true;
      config.inclusion.center = as_vector3(require(inc, "inclusion", "center"), "inclusion.center");
      config.inclusion.radius = require_number(inc, "inclusion", "radius");
      if (!(config.inclusion.radius > 0)) fail("inclusion.radius", "must be positive");
      config.inclusion.amplitude = require_number(inc, "inclusion", "amplitude");
      if (!std::isfinite(config.inclusion.amplitude))
        fail("inclusion.amplitude", "must be finite");
    }

    config.config_hash = hash_hex(fnv1a64(canonical_document(doc).dump()));
    return config;
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "gaussian-fullbrain") return parse_config_text(kGaussianFullbrain, "preset:" + name);
  if (name == "gaussian-quadrant") return parse_config_text(kGaussianQuadrant, "preset:" + name);
  if (name == "tv-adaptive") return parse_config_text(kTvAdaptive, "preset:" + name);
  throw ConfigError("unknown preset '" + name +
                    "' (expected gaussian-fullbrain, gaussian-quadrant or tv-adaptive)");
}

std::vector<std::string> preset_names() {
  return {"gaussian-fullbrain", "gaussian-quadrant", "tv-adaptive"};
}

}  // namespace eit
