#ifndef EIT_OED_HPP
#define EIT_OED_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "eit/contact.hpp"
#include "eit/jacobians.hpp"
#include "eit/mesh.hpp"

namespace eit {

// Expected weighted posterior variance tr(W C_post) of the linearized
// Gaussian experiment y = J kappa + noise, computed through the data-space
// matrix S = J P J^T + eta^2 I so the posterior covariance is never formed:
//   value = tr(W P) - tr(S^{-1} (J P) W (J P)^T).
// Smaller is better; the value can never exceed tr(W P).
double a_optimal_value(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& prior,
                       const Eigen::SparseMatrix<double>& weight, double noise_std);

// Matrix G with d(value) = -2 <G, dJ>_F, the sensitivity of the target above
// to the measurement Jacobian. Every intermediate stays measurement-by-node
// sized: G = S^{-1} (J P) W (P - (J P)^T S^{-1} (J P)).
Eigen::MatrixXd a_optimal_jacobian_sensitivity(const Eigen::MatrixXd& jacobian,
                                               const Eigen::MatrixXd& prior,
                                               const Eigen::SparseMatrix<double>& weight,
                                               double noise_std);

// One electrode-placement optimization problem: fixed mesh, contact shape,
// background conductivity and contact levels, Gaussian prior and ROI weight,
// measurement noise level, and the index of the current-feeding electrode.
struct DesignProblem {
  const SimplicialMesh* mesh = nullptr;
  const ElementGeometry* geometry = nullptr;
  SphericalSurface surface{1.0};
  ContactProfile profile{0.1, 0.4};
  Eigen::VectorXd sigma;                // background nodal conductivity
  Eigen::VectorXd zeta;                 // contact level per electrode
  Eigen::MatrixXd prior;                // n x n prior covariance
  Eigen::SparseMatrix<double> weight;   // n x n ROI mass matrix
  double noise_std = 0.0;
  int feeding_electrode = 0;
  double min_chord_separation = 0.0;    // straight-line center distance floor
};

// True when every polar angle is strictly inside (0, pi/2) and all pairwise
// electrode-center distances exceed the separation floor.
bool design_feasible(const Eigen::MatrixXd& angles, double surface_radius,
                     double min_chord_separation);

// angles + scale * direction, with direction laid out as the design vector
// (theta_0..theta_{M-1}, phi_0..phi_{M-1}). Electrodes whose polar angle is
// below pole_threshold take the azimuthal component as a displacement in the
// local tangent plane instead, so near-pole electrodes translate across the
// pole rather than spinning in azimuth.
Eigen::MatrixXd apply_design_step(const Eigen::MatrixXd& angles,
                                  const Eigen::VectorXd& direction, double scale,
                                  double pole_threshold);

// A-optimality of one electrode layout: assembles the measurement Jacobian at
// the background conductivity and applies a_optimal_value.
double design_value(const DesignProblem& problem, const Eigen::MatrixXd& angles);

struct DesignObjective {
  double value = 0.0;
  Eigen::VectorXd gradient;  // d(value)/d(design vector), length 2M
};

// Value plus its design gradient: component k is -2 <G, dJ/dd_k>_F with the
// Jacobian's angle derivatives taken through the moving contact fields.
DesignObjective design_objective(const DesignProblem& problem, const Eigen::MatrixXd& angles);

struct ArmijoResult {
  double lambda = 0.0;   // accepted step, or lambda_init * backoff^max_trials
  int trials = 0;        // number of evaluated trial steps
  bool accepted = false; // sufficient decrease held at `lambda`
  double value = 0.0;    // trial value at `lambda` when accepted
};

// Backtracking line search: tries lambda = lambda_init * backoff^l for
// l = 0..max_trials-1 and accepts the first trial with
//   trial_value(lambda) - current_value < lambda * slope_fraction * directional_slope.
// When every trial fails the returned (unevaluated) step is
// lambda_init * backoff^max_trials. Trials may return +infinity to signal an
// infeasible design; they count as rejections.
ArmijoResult armijo_search(const std::function<double(double)>& trial_value,
                           double current_value, double directional_slope,
                           double lambda_init, double slope_fraction, double backoff,
                           int max_trials);

struct OedOptions {
  double epsilon = 0.0;          // stop when the gradient norm drops to this
  int max_iterations = 40;
  double lambda_init = 0.5;
  double slope_fraction = 0.5;   // Armijo sufficient-decrease fraction
  double backoff = 5.0 / 6.0;    // step shrink per rejected trial
  int max_armijo_trials = 30;
  double pole_threshold = 0.2;   // radians; tangent-plane handling below this
  bool gradient_preflight = true;
  double preflight_step = 1e-4;      // central-difference angle step
  double preflight_tolerance = 1e-2; // componentwise relative mismatch bound
};

struct DesignTraceRow {
  int iteration = 0;          // 0 is the initial design
  Eigen::MatrixXd angles;     // M x 2 layout after this iteration
  double value = 0.0;         // A-optimality target
  double value_sqrt = 0.0;    // square root of the target
  double gradient_norm = 0.0; // at `angles`
  double lambda = 0.0;        // step size actually applied (0 = no move)
  int armijo_trials = 0;
  bool accepted = false;      // the applied step passed sufficient decrease
};

// Objective bundle for the descent driver; `value` is only called on designs
// that passed `feasible`.
struct DesignFunctional {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<DesignObjective(const Eigen::MatrixXd&)> objective;
  std::function<bool(const Eigen::MatrixXd&)> feasible;
};

// Normalized-gradient descent with Armijo backtracking. Runs while the
// gradient norm exceeds epsilon and fewer than max_iterations steps were
// taken. An exhausted line search still applies its final step when the
// resulting design is feasible; otherwise the iteration records a null step.
// The preflight compares the analytic gradient of the initial design against
// central differences and throws NumericalError on mismatch.
std::vector<DesignTraceRow> optimize_design(const DesignFunctional& functional,
                                            const Eigen::MatrixXd& initial_angles,
                                            const OedOptions& options = {});
std::vector<DesignTraceRow> optimize_design(const DesignProblem& problem,
                                            const Eigen::MatrixXd& initial_angles,
                                            const OedOptions& options = {});

}  // namespace eit

#endif  // EIT_OED_HPP
