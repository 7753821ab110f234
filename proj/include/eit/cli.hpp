#ifndef EIT_CLI_HPP
#define EIT_CLI_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eit/config.hpp"
#include "eit/contact.hpp"
#include "eit/io.hpp"
#include "eit/mesh.hpp"

namespace eit {

// Everything the commands share once a config is resolved: the mesh with its
// element geometry, the electrode-carrying surface, the contact shape, the
// background conductivity and the region-of-interest node mask.
struct ExperimentSetup {
  SimplicialMesh mesh;
  ElementGeometry geometry;
  SphericalSurface surface{1.0};
  ContactProfile profile{0.1, 0.4};
  Eigen::VectorXd sigma0;      // background nodal conductivity
  std::vector<char> roi_node;  // brain nodes inside every ROI half-space
  int roi_count = 0;
  double mean_longest_boundary_edge = 0.0;
};

// Builds the mesh (generator or file), assigns nodal conductivities by the
// innermost adjacent region, resolves the ROI mask, and validates that the
// boundary resolves the contact radius and that the layout is feasible.
ExperimentSetup build_setup(const ExperimentConfig& config);

// Phantom conductivity: background plus the inclusion ball (when present).
// Throws if the perturbed conductivity is not strictly positive.
Eigen::VectorXd phantom_sigma(const ExperimentSetup& setup, const ExperimentConfig& config);

// Noise-free stacked measurements (config electrode order) of a conductivity
// at a given electrode layout, honoring the configured feeding electrode.
Eigen::VectorXd forward_measurements(const ExperimentSetup& setup, const ExperimentConfig& config,
                                     const Eigen::MatrixXd& layout,
                                     const Eigen::VectorXd& sigma);

// Background measurements at the configured layout.
Eigen::VectorXd background_measurements(const ExperimentSetup& setup,
                                        const ExperimentConfig& config);

// Reads the frozen noise state from `out_dir`, or computes eta from the
// symmetric-preset background measurement and writes it. Rejects a state file
// from a different config.
NoiseState ensure_noise_state(const ExperimentConfig& config, const ExperimentSetup& setup,
                              const std::string& out_dir);

// Command-line front end; `args` excludes the program name. Returns the
// process exit code (0 ok, 2 config error, 3 numerical error, 4 I/O error).
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace eit

#endif  // EIT_CLI_HPP
