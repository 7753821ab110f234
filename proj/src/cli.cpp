#include "eit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eit/common.hpp"
#include "eit/forward.hpp"
#include "eit/gaussian.hpp"
#include "eit/jacobians.hpp"
#include "eit/oed.hpp"
#include "eit/tv.hpp"

namespace eit {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Electrode relabeling. The solver always feeds electrode 0, so commands
// rotate the configured feeding electrode into slot 0, work in that frame,
// and write artifacts back in config electrode order. Pattern j then means
// "feed vs. the j-th non-feeding electrode in config order".
struct FeedOrder {
  std::vector<int> order;  // order[slot] = config electrode id; slot 0 feeds
  std::vector<int> slot;   // slot[config electrode id]
};

FeedOrder feed_order(int m, int feeding) {
  FeedOrder f;
  f.order.reserve(m);
  f.order.push_back(feeding);
  for (int e = 0; e < m; ++e)
    if (e != feeding) f.order.push_back(e);
  f.slot.assign(m, 0);
  for (int s = 0; s < m; ++s) f.slot[static_cast<std::size_t>(f.order[s])] = s;
  return f;
}

Eigen::MatrixXd rows_in_feed_order(const Eigen::MatrixXd& angles, const FeedOrder& f) {
  Eigen::MatrixXd out(angles.rows(), angles.cols());
  for (int s = 0; s < angles.rows(); ++s) out.row(s) = angles.row(f.order[s]);
  return out;
}

Eigen::VectorXd entries_in_feed_order(const Eigen::VectorXd& v, const FeedOrder& f) {
  Eigen::VectorXd out(v.size());
  for (int s = 0; s < v.size(); ++s) out[s] = v[f.order[s]];
  return out;
}

Eigen::VectorXd stacked_to_config_order(const Eigen::VectorXd& rel, const FeedOrder& f) {
  const int m = static_cast<int>(f.order.size());
  Eigen::VectorXd cfg(rel.size());
  for (int j = 0; j + 1 < m; ++j)
    for (int s = 0; s < m; ++s) cfg[j * m + f.order[s]] = rel[j * m + s];
  return cfg;
}

Eigen::VectorXd stacked_to_feed_order(const Eigen::VectorXd& cfg, const FeedOrder& f) {
  const int m = static_cast<int>(f.order.size());
  Eigen::VectorXd rel(cfg.size());
  for (int j = 0; j + 1 < m; ++j)
    for (int s = 0; s < m; ++s) rel[j * m + s] = cfg[j * m + f.order[s]];
  return rel;
}

// Contact levels for an arbitrary electrode count: per-electrode levels only
// transfer to layouts of the same size, a uniform level transfers anywhere.
Eigen::VectorXd zeta_for_layout(const ExperimentConfig& config, int m) {
  if (m == config.zeta.size()) return config.zeta;
  if (!config.zeta_uniform)
    throw ConfigError(
        "electrodes.zeta: per-electrode contact levels do not match a layout with " +
        std::to_string(m) + " electrodes");
  return Eigen::VectorXd::Constant(m, config.zeta.mean());
}

std::string round_name(const std::string& stem, const std::string& ext, int round) {
  if (round <= 0) return stem + ext;
  return stem + "_round" + std::to_string(round) + ext;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Simulation and reconstruction cores shared by the commands.

Eigen::VectorXd noisy_measurements(const ExperimentSetup& setup, const ExperimentConfig& config,
                                   const Eigen::MatrixXd& layout, const Eigen::VectorXd& sigma,
                                   double eta, std::uint64_t seed) {
  Eigen::VectorXd values = forward_measurements(setup, config, layout, sigma);
  if (eta > 0.0) {
    NormalSampler rng(seed);
    for (long i = 0; i < values.size(); ++i) values[i] += eta * rng.next();
  }
  return values;
}

struct ReconArtifacts {
  Eigen::VectorXd nodal;  // full nodal perturbation (posterior mean)
  DensityDump dump;
  std::vector<TvTraceRow> trace;  // TV mode only
};

ReconArtifacts reconstruct_core(const ExperimentSetup& setup, const ExperimentConfig& config,
                                const Eigen::MatrixXd& layout, const Eigen::VectorXd& values,
                                double eta) {
  const int m = static_cast<int>(layout.rows());
  if (config.feeding >= m)
    throw ConfigError("electrodes.feeding: index " + std::to_string(config.feeding) +
                      " is outside the measurement layout of " + std::to_string(m) +
                      " electrodes");
  const FeedOrder f = feed_order(m, config.feeding);
  const Eigen::MatrixXd layout_rel = rows_in_feed_order(layout, f);
  const Eigen::VectorXd zeta_rel = entries_in_feed_order(zeta_for_layout(config, m), f);
  const Eigen::VectorXd data_rel = stacked_to_feed_order(values, f);

  ReconArtifacts art;
  art.dump.config_hash = config.config_hash;
  if (config.mode == ExperimentMode::kGaussianRoi) {
    const std::vector<ElectrodePatch> patches =
        build_electrode_patches(setup.mesh, setup.surface, setup.profile, layout_rel);
    const ForwardSolver solver(setup.mesh, setup.geometry, patches, setup.sigma0, zeta_rel);
    const SensitivityBundle bundle(solver);
    // Subtract the same direct pattern solve that produced the data so that
    // background data yields a bitwise-zero residual; the bundle's voltages
    // come from differenced adjoint solves and differ at rounding level.
    const Eigen::VectorXd y =
        data_rel - ForwardSolver::stack_measurements(solver.solve_reference_patterns().voltages);
    const Eigen::MatrixXd prior = squared_exponential_covariance(
        setup.mesh.nodes, config.prior.std_dev, config.prior.length_scale);
    GaussianPosterior post = gaussian_posterior(bundle.sigma_jacobian(), prior, eta, y);
    art.nodal = post.mean;
    art.dump.node_indices.resize(setup.mesh.n_nodes());
    for (int i = 0; i < setup.mesh.n_nodes(); ++i) art.dump.node_indices[i] = i;
    art.dump.mean = std::move(post.mean);
    art.dump.covariance = std::move(post.covariance);
    return art;
  }
  TvOptions options = config.tv;
  options.want_covariance = true;
  TvResult result = tv_reconstruct(setup.mesh, setup.geometry, setup.surface, setup.profile,
                                   layout_rel, setup.sigma0, zeta_rel, data_rel, eta, options);
  art.nodal = result.kappa_full;
  art.trace = std::move(result.trace);
  art.dump.node_indices.assign(result.interior_nodes.begin(), result.interior_nodes.end());
  art.dump.mean.resize(static_cast<long>(result.interior_nodes.size()));
  for (std::size_t i = 0; i < result.interior_nodes.size(); ++i)
    art.dump.mean[static_cast<long>(i)] = result.kappa_full[result.interior_nodes[i]];
  art.dump.covariance = std::move(result.covariance);
  return art;
}

// Embeds an interior-node covariance dump into a full nodal prior; nodes the
// dump does not cover get zero prior variance and so never attract sensors.
Eigen::MatrixXd embed_prior(const DensityDump& dump, int n_nodes) {
  const long k = static_cast<long>(dump.node_indices.size());
  Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  std::vector<char> seen(static_cast<std::size_t>(n_nodes), 0);
  for (long i = 0; i < k; ++i) {
    const std::int64_t idx = dump.node_indices[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= n_nodes)
      throw ConfigError("prior covariance dump indexes node " + std::to_string(idx) +
                        " outside this mesh (wrong mesh?)");
    if (seen[static_cast<std::size_t>(idx)])
      throw ConfigError("prior covariance dump repeats node " + std::to_string(idx));
    seen[static_cast<std::size_t>(idx)] = 1;
  }
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < k; ++j)
      prior(dump.node_indices[static_cast<std::size_t>(i)],
            dump.node_indices[static_cast<std::size_t>(j)]) = dump.covariance(i, j);
  return prior;
}

Eigen::SparseMatrix<double> roi_weight(const ExperimentSetup& setup) {
  if (setup.roi_count == 0)
    throw ConfigError("roi.halfspaces: the region of interest selects no mesh nodes");
  const std::vector<char>& mask = setup.roi_node;
  return mass_matrix(setup.mesh, [&mask](int node) { return mask[node] != 0; });
}

std::vector<DesignTraceRow> optimize_core(const ExperimentSetup& setup,
                                          const ExperimentConfig& config,
                                          const Eigen::MatrixXd& start_layout,
                                          const Eigen::MatrixXd& prior, double eta,
                                          bool skip_preflight) {
  DesignProblem problem;
  problem.mesh = &setup.mesh;
  problem.geometry = &setup.geometry;
  problem.surface = setup.surface;
  problem.profile = setup.profile;
  problem.sigma = setup.sigma0;
  problem.zeta = zeta_for_layout(config, static_cast<int>(start_layout.rows()));
  problem.prior = prior;
  problem.weight = roi_weight(setup);
  problem.noise_std = eta;
  problem.feeding_electrode = config.feeding;
  problem.min_chord_separation = config.min_separation;
  OedOptions options = config.optimizer;
  if (skip_preflight) options.gradient_preflight = false;
  return optimize_design(problem, start_layout, options);
}

void require_positive_noise(const ExperimentConfig& config, const char* verb) {
  if (!(config.omega > 0.0))
    throw ConfigError(std::string("noise.omega: ") + verb +
                      " requires a positive noise level (omega > 0)");
}

// ---------------------------------------------------------------------------
// Commands.

void summarize_trace(const std::vector<DesignTraceRow>& trace) {
  const DesignTraceRow& first = trace.front();
  const DesignTraceRow& last = trace.back();
  int accepted = 0;
  for (const DesignTraceRow& row : trace) accepted += row.accepted ? 1 : 0;
  std::cout << "optimize: psi_a " << format_double(first.value) << " -> "
            << format_double(last.value) << " over " << (trace.size() - 1) << " iterations ("
            << accepted << " accepted steps)\n";
  if (first.value_sqrt > 0.0)
    std::cout << "optimize: psi_a_sqrt reduction "
              << format_double(100.0 * (1.0 - last.value_sqrt / first.value_sqrt)) << "%\n";
}

void cmd_simulate(const ExperimentConfig& config, const std::string& out_dir) {
  const ExperimentSetup setup = build_setup(config);
  const NoiseState state = ensure_noise_state(config, setup, out_dir);
  const Eigen::VectorXd sigma_true = phantom_sigma(setup, config);
  const Eigen::VectorXd values =
      noisy_measurements(setup, config, config.layout, sigma_true, state.eta, config.seed);
  const std::string path = join_path(out_dir, "measurements.csv");
  write_measurements(path, values, config.layout, config.config_hash, config.seed);
  std::cout << "simulate: wrote " << path << " (eta " << format_double(state.eta) << ")\n";
}

void check_measurement_provenance(const MeasurementFile& file, const ExperimentConfig& config,
                                  const std::string& path) {
  if (file.config_hash.empty())
    throw ConfigError(path + ": measurement file carries no config_hash provenance; refusing " +
                      "to combine it with config " + config.config_hash);
  if (file.config_hash != config.config_hash)
    throw ConfigError(path + ": measurement file belongs to config " + file.config_hash +
                      " but the current config is " + config.config_hash +
                      "; refusing to mix artifacts");
}

void write_recon_artifacts(const ExperimentSetup& setup, const ExperimentConfig& config,
                           const ReconArtifacts& art, const std::string& out_dir, int round) {
  const std::string recon_path = join_path(out_dir, round_name("reconstruction", ".csv", round));
  write_nodal_field(recon_path, setup.mesh, art.nodal, config.config_hash);
  const std::string cov_path = join_path(out_dir, round_name("covariance", ".bin", round));
  write_density_dump(cov_path, art.dump);
  if (config.mode == ExperimentMode::kTvAdaptive) {
    const std::string trace_path = join_path(out_dir, round_name("tv_trace", ".csv", round));
    write_tv_trace(trace_path, art.trace, config.config_hash);
  }
  std::cout << "reconstruct: wrote " << recon_path << " and " << cov_path << "\n";
}

void cmd_reconstruct(const ExperimentConfig& config, const std::string& out_dir,
                     const std::string& meas_path) {
  require_positive_noise(config, "reconstruction");
  const ExperimentSetup setup = build_setup(config);
  const MeasurementFile file = read_measurements(meas_path);
  check_measurement_provenance(file, config, meas_path);
  const Eigen::MatrixXd layout = file.layout.rows() > 0 ? file.layout : config.layout;
  const NoiseState state = ensure_noise_state(config, setup, out_dir);
  const ReconArtifacts art = reconstruct_core(setup, config, layout, file.values, state.eta);
  write_recon_artifacts(setup, config, art, out_dir, 0);
}

void write_design_artifacts(const ExperimentConfig& config, const ExperimentSetup& setup,
                            const std::vector<DesignTraceRow>& trace, const std::string& out_dir,
                            int round) {
  const std::string trace_path = join_path(out_dir, round_name("design_trace", ".csv", round));
  write_design_trace(trace_path, trace, config.config_hash);
  const std::string layout_path = join_path(out_dir, round_name("layout", ".json", round));
  write_layout_json(layout_path, trace.back().angles, config.feeding, setup.surface.radius(),
                    config.contact_radius, config.contact_tau, config.config_hash);
}

// One reconstruct-then-reoptimize round; returns the re-optimized layout.
Eigen::MatrixXd adaptive_round(const ExperimentSetup& setup, const ExperimentConfig& config,
                               const Eigen::MatrixXd& layout, const NoiseState& state,
                               const std::string& out_dir, int round, bool skip_preflight) {
  const Eigen::VectorXd sigma_true = phantom_sigma(setup, config);
  const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(round - 1);
  const Eigen::VectorXd values =
      noisy_measurements(setup, config, layout, sigma_true, state.eta, seed);
  const std::string meas_path = join_path(out_dir, round_name("measurements", ".csv", round));
  write_measurements(meas_path, values, layout, config.config_hash, seed);
  std::cout << "round " << round << ": wrote " << meas_path << "\n";

  const ReconArtifacts art = reconstruct_core(setup, config, layout, values, state.eta);
  write_recon_artifacts(setup, config, art, out_dir, round);

  const Eigen::MatrixXd prior = embed_prior(art.dump, setup.mesh.n_nodes());
  const std::vector<DesignTraceRow> trace =
      optimize_core(setup, config, layout, prior, state.eta, skip_preflight);
  write_design_artifacts(config, setup, trace, out_dir, round);
  summarize_trace(trace);
  return trace.back().angles;
}

void run_adaptive(const ExperimentConfig& config, const std::string& out_dir, int rounds,
                  bool skip_preflight) {
  if (config.mode != ExperimentMode::kTvAdaptive)
    throw ConfigError("mode: the adaptive loop requires mode 'tv-adaptive'");
  require_positive_noise(config, "the adaptive loop");
  const ExperimentSetup setup = build_setup(config);
  const NoiseState state = ensure_noise_state(config, setup, out_dir);
  Eigen::MatrixXd layout = config.layout;
  for (int r = 1; r <= rounds; ++r)
    layout = adaptive_round(setup, config, layout, state, out_dir, r, skip_preflight);
  write_layout_json(join_path(out_dir, "layout.json"), layout, config.feeding,
                    setup.surface.radius(), config.contact_radius, config.contact_tau,
                    config.config_hash);
  std::cout << "pipeline: final layout written after " << rounds << " round(s)\n";
}

void cmd_optimize(const ExperimentConfig& config, const std::string& out_dir,
                  const std::string& prior_cov_path, int adaptive_rounds, bool skip_preflight) {
  if (adaptive_rounds > 0) {
    run_adaptive(config, out_dir, adaptive_rounds, skip_preflight);
    return;
  }
  require_positive_noise(config, "design optimization");
  const ExperimentSetup setup = build_setup(config);
  const NoiseState state = ensure_noise_state(config, setup, out_dir);
  Eigen::MatrixXd prior;
  if (!prior_cov_path.empty()) {
    const DensityDump dump = read_density_dump(prior_cov_path);
    if (dump.config_hash != config.config_hash)
      throw ConfigError(prior_cov_path + ": prior covariance belongs to config " +
                        dump.config_hash + " but the current config is " + config.config_hash);
    prior = embed_prior(dump, setup.mesh.n_nodes());
  } else {
    prior = squared_exponential_covariance(setup.mesh.nodes, config.prior.std_dev,
                                           config.prior.length_scale);
  }
  const std::vector<DesignTraceRow> trace =
      optimize_core(setup, config, config.layout, prior, state.eta, skip_preflight);
  write_design_artifacts(config, setup, trace, out_dir, 0);
  summarize_trace(trace);
}

void cmd_pipeline(const ExperimentConfig& config, const std::string& out_dir, int adaptive_rounds,
                  bool skip_preflight) {
  if (config.mode == ExperimentMode::kTvAdaptive) {
    run_adaptive(config, out_dir, std::max(adaptive_rounds, 1), skip_preflight);
    return;
  }
  if (adaptive_rounds > 0)
    throw ConfigError("mode: the adaptive loop requires mode 'tv-adaptive'");
  // Gaussian chain: simulate, reconstruct, optimize with the configured prior.
  require_positive_noise(config, "the pipeline");
  cmd_simulate(config, out_dir);
  cmd_reconstruct(config, out_dir, join_path(out_dir, "measurements.csv"));
  cmd_optimize(config, out_dir, "", 0, skip_preflight);
}

}  // namespace

// ---------------------------------------------------------------------------
// Setup shared by all commands.

ExperimentSetup build_setup(const ExperimentConfig& config) {
  ExperimentSetup setup;
  if (config.mesh.from_file()) {
    setup.mesh = load_mesh(config.mesh.file);
    if (setup.mesh.dim != 3)
      throw ConfigError("mesh.file: the experiment pipeline needs a 3-D mesh");
    setup.surface = SphericalSurface::fit(setup.mesh);
  } else {
    setup.mesh = build_layered_ball_mesh(config.mesh.outer_radius, config.mesh.inner_radius,
                                         config.mesh.mid_radius, config.mesh.edge_length,
                                         config.mesh.flat_bottom_height);
    setup.surface = SphericalSurface(config.mesh.outer_radius);
  }
  setup.geometry = element_geometry(setup.mesh);
  setup.profile = ContactProfile(config.contact_radius, config.contact_tau);

  // A node adopts the innermost region among its elements, so layer
  // interfaces resolve deterministically (brain over skull over skin).
  const SimplicialMesh& mesh = setup.mesh;
  std::vector<int> node_region(static_cast<std::size_t>(mesh.n_nodes()), kSkin);
  for (int k = 0; k < mesh.n_simplices(); ++k)
    for (int v = 0; v <= mesh.dim; ++v) {
      int& slot = node_region[static_cast<std::size_t>(mesh.simplices(k, v))];
      slot = std::max(slot, static_cast<int>(mesh.region[k]));
    }
  const double level[3] = {config.sigma_skin, config.sigma_skull, config.sigma_brain};
  setup.sigma0.resize(mesh.n_nodes());
  setup.roi_node.assign(static_cast<std::size_t>(mesh.n_nodes()), 0);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    setup.sigma0[i] = level[node_region[static_cast<std::size_t>(i)]];
    bool inside = node_region[static_cast<std::size_t>(i)] == kBrain;
    for (const HalfSpace& hs : config.roi_halfspaces) {
      if (!inside) break;
      inside = hs.normal.dot(mesh.nodes.row(i).transpose()) > hs.offset;
    }
    if (inside) {
      setup.roi_node[static_cast<std::size_t>(i)] = 1;
      ++setup.roi_count;
    }
  }

  // The boundary must resolve the contact footprint: the mean longest facet
  // edge may not exceed the contact radius.
  double edge_sum = 0.0;
  for (int fct = 0; fct < mesh.n_boundary_facets(); ++fct) {
    double longest = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        longest = std::max(longest, (mesh.nodes.row(mesh.boundary(fct, a)) -
                                     mesh.nodes.row(mesh.boundary(fct, b)))
                                        .norm());
    edge_sum += longest;
  }
  setup.mean_longest_boundary_edge = edge_sum / std::max(mesh.n_boundary_facets(), 1);
  if (setup.mean_longest_boundary_edge > config.contact_radius)
    throw ConfigError("electrodes.radius: boundary facets (mean longest edge " +
                      format_double(setup.mean_longest_boundary_edge) +
                      " m) are too coarse to resolve the contact radius " +
                      format_double(config.contact_radius) + " m");

  if (!design_feasible(config.layout, setup.surface.radius(), config.min_separation))
    throw ConfigError(
        "layout: electrode placement is infeasible (polar angle outside (0, pi/2) or "
        "centers closer than electrodes.min_separation)");
  return setup;
}

Eigen::VectorXd phantom_sigma(const ExperimentSetup& setup, const ExperimentConfig& config) {
  Eigen::VectorXd sigma = setup.sigma0;
  if (config.inclusion.present) {
    for (int i = 0; i < setup.mesh.n_nodes(); ++i)
      if ((setup.mesh.nodes.row(i).transpose() - config.inclusion.center).norm() <
          config.inclusion.radius)
        sigma[i] += config.inclusion.amplitude;
    if (!(sigma.minCoeff() > 0.0))
      throw ConfigError("inclusion.amplitude: the phantom conductivity must stay positive");
  }
  return sigma;
}

Eigen::VectorXd forward_measurements(const ExperimentSetup& setup, const ExperimentConfig& config,
                                     const Eigen::MatrixXd& layout,
                                     const Eigen::VectorXd& sigma) {
  const int m = static_cast<int>(layout.rows());
  if (config.feeding >= m)
    throw ConfigError("electrodes.feeding: index " + std::to_string(config.feeding) +
                      " is outside a layout of " + std::to_string(m) + " electrodes");
  const FeedOrder f = feed_order(m, config.feeding);
  const Eigen::MatrixXd layout_rel = rows_in_feed_order(layout, f);
  const Eigen::VectorXd zeta_rel = entries_in_feed_order(zeta_for_layout(config, m), f);
  const std::vector<ElectrodePatch> patches =
      build_electrode_patches(setup.mesh, setup.surface, setup.profile, layout_rel);
  const ForwardSolver solver(setup.mesh, setup.geometry, patches, sigma, zeta_rel);
  const Eigen::VectorXd rel =
      ForwardSolver::stack_measurements(solver.solve_reference_patterns().voltages);
  return stacked_to_config_order(rel, f);
}

Eigen::VectorXd background_measurements(const ExperimentSetup& setup,
                                        const ExperimentConfig& config) {
  return forward_measurements(setup, config, config.layout, setup.sigma0);
}

NoiseState ensure_noise_state(const ExperimentConfig& config, const ExperimentSetup& setup,
                              const std::string& out_dir) {
  const std::string path = join_path(out_dir, "noise_state.json");
  if (auto existing = read_noise_state(path)) {
    if (existing->config_hash != config.config_hash)
      throw ConfigError(path + ": noise state belongs to config " + existing->config_hash +
                        " but the current config is " + config.config_hash +
                        "; refusing to mix artifacts");
    return *existing;
  }
  NoiseState state;
  state.config_hash = config.config_hash;
  state.omega = config.omega;
  if (config.omega > 0.0) {
    // The noise level comes from the symmetric reference layout's background
    // measurement on this mesh and stays frozen for the experiment's life.
    ExperimentConfig reference = config;
    reference.layout = preset_layout("symmetric12");
    reference.layout_preset = "symmetric12";
    reference.feeding = 0;
    const Eigen::VectorXd values =
        forward_measurements(setup, reference, reference.layout, setup.sigma0);
    const double spread = values.maxCoeff() - values.minCoeff();
    if (!(spread > 0.0))
      throw NumericalError(
          "noise level degenerate: the reference background measurement is constant");
    state.eta = config.omega * spread;
  }
  ensure_out_dir(out_dir);
  write_noise_state(path, state);
  return state;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("eitoed");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());

  CLI::App app{"EIT electrode-placement design: simulate, reconstruct, optimize, pipeline"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir = ".", meas_path, prior_cov_path;
  std::uint64_t seed = 0;
  int adaptive = 0;
  bool skip_preflight = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON file");
    cmd->add_option("--preset", preset,
                    "built-in experiment (gaussian-fullbrain, gaussian-quadrant, tv-adaptive)");
    cmd->add_option("--seed", seed, "noise seed override");
    cmd->add_option("--out", out_dir, "output directory (default .)");
  };
  CLI::App* sim = app.add_subcommand("simulate", "simulate noisy phantom measurements");
  add_common(sim);
  CLI::App* rec = app.add_subcommand("reconstruct", "invert a measurement file");
  add_common(rec);
  rec->add_option("--meas", meas_path, "measurement CSV (default <out>/measurements.csv)");
  CLI::App* opt = app.add_subcommand("optimize", "optimize the electrode placement");
  add_common(opt);
  opt->add_option("--prior-cov", prior_cov_path, "posterior covariance dump to use as prior");
  opt->add_option("--adaptive", adaptive, "run N simulate/reconstruct/optimize rounds");
  opt->add_flag("--skip-gradient-preflight", skip_preflight,
                "skip the finite-difference gradient check");
  CLI::App* pipe = app.add_subcommand("pipeline", "simulate, reconstruct and optimize in one run");
  add_common(pipe);
  pipe->add_option("--adaptive", adaptive, "number of adaptive rounds (default 1)");
  pipe->add_flag("--skip-gradient-preflight", skip_preflight,
                 "skip the finite-difference gradient check");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help / --version exit with 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // command-line errors are config errors
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (config_path.empty() == preset.empty())
      throw ConfigError("give exactly one of --config <path> or --preset <name>");
    ExperimentConfig config =
        config_path.empty() ? preset_config(preset) : load_config_file(config_path);
    if (sub->count("--seed") > 0) config.seed = seed;
    const bool adaptive_given = sub->get_option_no_throw("--adaptive") != nullptr &&
                                sub->count("--adaptive") > 0;
    if (adaptive_given && adaptive < 1)
      throw ConfigError("--adaptive: the number of rounds must be at least 1");
    ensure_out_dir(out_dir);

    if (sub == sim) {
      cmd_simulate(config, out_dir);
    } else if (sub == rec) {
      const std::string path =
          meas_path.empty() ? join_path(out_dir, "measurements.csv") : meas_path;
      cmd_reconstruct(config, out_dir, path);
    } else if (sub == opt) {
      cmd_optimize(config, out_dir, prior_cov_path, adaptive_given ? adaptive : 0,
                   skip_preflight);
    } else {
      cmd_pipeline(config, out_dir, adaptive_given ? adaptive : 0, skip_preflight);
    }
    return 0;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace eit
