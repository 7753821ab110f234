#ifndef EIT_CONFIG_HPP
#define EIT_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eit/oed.hpp"
#include "eit/tv.hpp"

namespace eit {

// Mesh source: a mesh file, or parameters for the layered-ball generator.
struct MeshSpec {
  std::string file;  // non-empty selects the file source
  double outer_radius = 0.09;
  double inner_radius = 0.07;
  double mid_radius = 0.08;
  double edge_length = 0.015;
  double flat_bottom_height = 0.0;
  bool from_file() const { return !file.empty(); }
};

// Region of interest restriction: x is inside when normal . x > offset.
struct HalfSpace {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
};

struct InclusionSpec {
  bool present = false;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
  double amplitude = 0.0;  // added to the background inside the ball
};

struct PriorParams {
  double length_scale = 0.05;  // meters
  double std_dev = 0.2;        // S/m
};

enum class ExperimentMode { kGaussianRoi, kTvAdaptive };

// Fully resolved experiment description. The hash is FNV-1a over the
// canonical JSON with the seed removed, so reruns of one experiment under
// different noise draws still recognize each other's artifacts.
struct ExperimentConfig {
  MeshSpec mesh;
  std::string layout_preset;  // empty when the layout was given explicitly
  Eigen::MatrixXd layout;     // M x 2 (theta, phi)
  double contact_radius = 0.0;
  double contact_tau = 0.4;
  Eigen::VectorXd zeta;       // per electrode, resolved from scalar or array
  bool zeta_uniform = true;   // true when the config gave a single level
  int feeding = 0;
  double min_separation = 0.0;  // electrode center distance floor (meters)
  double sigma_skin = 0.2;
  double sigma_skull = 0.06;
  double sigma_brain = 0.2;
  double omega = 1e-3;          // noise level as a fraction of the data spread
  std::uint64_t seed = 1;
  ExperimentMode mode = ExperimentMode::kGaussianRoi;
  PriorParams prior;
  TvOptions tv;
  std::vector<HalfSpace> roi_halfspaces;  // ROI = brain nodes inside all of these
  OedOptions optimizer;
  InclusionSpec inclusion;
  std::string config_hash;
};

// Electrode-angle presets for the two initial configurations.
Eigen::MatrixXd preset_layout(const std::string& name);  // symmetric12 | quadrant12

// Parses and validates a config document; errors carry the field path.
// `origin` names the source (file path or preset) in error messages.
ExperimentConfig parse_config_text(const std::string& json_text, const std::string& origin);
ExperimentConfig load_config_file(const std::string& path);

// Built-in experiment presets with all defaults baked in:
// gaussian-fullbrain, gaussian-quadrant, tv-adaptive.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace eit

#endif  // EIT_CONFIG_HPP
