#ifndef EIT_IO_HPP
#define EIT_IO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eit/mesh.hpp"
#include "eit/oed.hpp"
#include "eit/tv.hpp"

namespace eit {

// Every artifact embeds the hash of the configuration that produced it so
// mixed-provenance inputs are rejected instead of silently combined.

// Measurement CSV: provenance comments, a fixed header line, then one row
// `pattern_index,electrode_index,value_volts` per stacked entry.
struct MeasurementFile {
  Eigen::VectorXd values;   // stacked pattern-major, electrode-minor
  Eigen::MatrixXd layout;   // M x 2 electrode angles that produced the data
  std::string config_hash;
  std::uint64_t seed = 0;
};

void write_measurements(const std::string& path, const Eigen::VectorXd& values,
                        const Eigen::MatrixXd& layout, const std::string& config_hash,
                        std::uint64_t seed);
MeasurementFile read_measurements(const std::string& path);

// Nodal reconstruction CSV: `node_index,x,y,z,kappa`.
void write_nodal_field(const std::string& path, const SimplicialMesh& mesh,
                       const Eigen::VectorXd& values, const std::string& config_hash);

// Inversion trace CSV: `linearization,inner_step,tikhonov_value`.
void write_tv_trace(const std::string& path, const std::vector<TvTraceRow>& rows,
                    const std::string& config_hash);

// Design trace CSV:
// `iter,theta_1..theta_M,phi_1..phi_M,psi_a,psi_a_sqrt,grad_norm,lambda_bar,armijo_trials,accepted`.
void write_design_trace(const std::string& path, const std::vector<DesignTraceRow>& rows,
                        const std::string& config_hash);

// Gaussian density dump: five ASCII header lines (format tag, size, node-map
// hash, config hash, section list) followed by little-endian binary blocks:
// int64 node indices, f64 mean, f64 row-major covariance.
struct DensityDump {
  std::vector<std::int64_t> node_indices;  // mesh nodes the entries refer to
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::string config_hash;
};

void write_density_dump(const std::string& path, const DensityDump& dump);
DensityDump read_density_dump(const std::string& path);

// Electrode layout JSON with the surface and contact-shape context.
void write_layout_json(const std::string& path, const Eigen::MatrixXd& angles,
                       int feeding_electrode, double surface_radius, double contact_radius,
                       double contact_tau, const std::string& config_hash);
Eigen::MatrixXd read_layout_json(const std::string& path, int* feeding_electrode = nullptr);

// Frozen noise level: written on the first simulation of a configuration and
// reused afterwards so repeated experiments share one noise covariance.
struct NoiseState {
  std::string config_hash;
  double omega = 0.0;
  double eta = 0.0;
};

void write_noise_state(const std::string& path, const NoiseState& state);
std::optional<NoiseState> read_noise_state(const std::string& path);  // nullopt if absent

// Measurement-Jacobian fixture dump: four ASCII header lines (format tag,
// rows, cols, base-point hash) then f64 row-major entries.
void write_jacobian_dump(const std::string& path, const Eigen::MatrixXd& jacobian,
                         const std::string& base_hash);
Eigen::MatrixXd read_jacobian_dump(const std::string& path, std::string* base_hash = nullptr);

}  // namespace eit

#endif  // EIT_IO_HPP
