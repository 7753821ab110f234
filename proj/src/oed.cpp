#include "eit/oed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "eit/forward.hpp"

namespace eit {

namespace {

struct AOptimalWork {
  double value = 0.0;
  Eigen::MatrixXd sensitivity;
};

// Shared core for the target and its Jacobian sensitivity; both need the
// data-space factorization and the measurement-by-node products, so computing
// them together avoids a second pass during gradient assembly.
AOptimalWork a_optimal_work(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& prior,
                            const Eigen::SparseMatrix<double>& weight, double noise_std,
                            bool want_sensitivity) {
  const int n = static_cast<int>(jacobian.cols());
  if (jacobian.rows() < 1 || n < 1) throw ParameterError("measurement Jacobian is empty");
  if (prior.rows() != n || prior.cols() != n)
    throw ParameterError("prior covariance does not match the Jacobian columns");
  if (weight.rows() != n || weight.cols() != n)
    throw ParameterError("weight matrix does not match the Jacobian columns");
  if (!(noise_std > 0.0)) throw ParameterError("noise level must be positive");

  const Eigen::MatrixXd t = jacobian * prior;
  Eigen::MatrixXd s = t * jacobian.transpose();
  s.diagonal().array() += noise_std * noise_std;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("data-space covariance is not positive definite");

  double prior_term = 0.0;
  for (int col = 0; col < weight.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(weight, col); it; ++it)
      prior_term += it.value() * prior(col, it.row());

  const Eigen::MatrixXd tw = t * weight;
  const Eigen::MatrixXd core = tw * t.transpose();

  AOptimalWork out;
  out.value = prior_term - llt.solve(core).trace();
  if (want_sensitivity) out.sensitivity = llt.solve(tw * prior - core * llt.solve(t));
  return out;
}

struct RelabeledDesign {
  Eigen::MatrixXd angles;
  Eigen::VectorXd zeta;
  std::vector<int> order;  // order[i] = original electrode index at slot i
};

// The reference current patterns always feed through the first electrode, so
// a different feeder is realized by rotating it into slot zero. Isotropic
// noise makes the relabeled experiment's target identical to the original's.
RelabeledDesign feed_first(const DesignProblem& problem, const Eigen::MatrixXd& angles) {
  const int m = static_cast<int>(angles.rows());
  if (problem.feeding_electrode < 0 || problem.feeding_electrode >= m)
    throw ParameterError("feeding electrode index out of range");
  RelabeledDesign out;
  out.order.reserve(m);
  out.order.push_back(problem.feeding_electrode);
  for (int i = 0; i < m; ++i)
    if (i != problem.feeding_electrode) out.order.push_back(i);
  out.angles.resize(m, 2);
  out.zeta.resize(m);
  for (int i = 0; i < m; ++i) {
    out.angles.row(i) = angles.row(out.order[i]);
    out.zeta[i] = problem.zeta[out.order[i]];
  }
  return out;
}

void check_problem(const DesignProblem& problem, const Eigen::MatrixXd& angles) {
  if (problem.mesh == nullptr || problem.geometry == nullptr)
    throw ParameterError("design problem needs a mesh and its element geometry");
  if (angles.cols() != 2 || angles.rows() < 2)
    throw ParameterError("electrode layout must be M x 2 with at least two electrodes");
  const int n = problem.mesh->n_nodes();
  if (problem.sigma.size() != n)
    throw ParameterError("background conductivity size does not match the mesh");
  if (problem.zeta.size() != angles.rows())
    throw ParameterError("one contact level per electrode is required");
  if (problem.prior.rows() != n || problem.prior.cols() != n)
    throw ParameterError("prior covariance must cover every mesh node");
  if (problem.weight.rows() != n || problem.weight.cols() != n)
    throw ParameterError("ROI weight must cover every mesh node");
  if (!(problem.noise_std > 0.0)) throw ParameterError("noise level must be positive");
}

void preflight_gradient(const DesignFunctional& functional, const Eigen::MatrixXd& angles,
                        const Eigen::VectorXd& gradient, const OedOptions& options) {
  const int m = static_cast<int>(angles.rows());
  Eigen::VectorXd fd(2 * m);
  for (int k = 0; k < 2 * m; ++k) {
    Eigen::MatrixXd plus = angles, minus = angles;
    const int row = k % m, col = k < m ? 0 : 1;
    plus(row, col) += options.preflight_step;
    minus(row, col) -= options.preflight_step;
    if (!functional.feasible(plus) || !functional.feasible(minus))
      throw ParameterError("initial design too close to the feasibility boundary for the gradient preflight");
    fd[k] = (functional.value(plus) - functional.value(minus)) / (2.0 * options.preflight_step);
  }
  // Componentwise relative mismatch with a floor so near-zero components
  // (e.g. symmetry-cancelled ones) are judged against the gradient scale.
  const double scale = fd.cwiseAbs().maxCoeff();
  for (int k = 0; k < 2 * m; ++k) {
    const double allowance =
        options.preflight_tolerance * std::max(std::abs(fd[k]), 1e-3 * scale) + 1e-14;
    if (!(std::abs(gradient[k] - fd[k]) <= allowance))
      throw NumericalError("design gradient disagrees with finite differences in component " +
                           std::to_string(k));
  }
}

}  // namespace

double a_optimal_value(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& prior,
                       const Eigen::SparseMatrix<double>& weight, double noise_std) {
  return a_optimal_work(jacobian, prior, weight, noise_std, false).value;
}

Eigen::MatrixXd a_optimal_jacobian_sensitivity(const Eigen::MatrixXd& jacobian,
                                               const Eigen::MatrixXd& prior,
                                               const Eigen::SparseMatrix<double>& weight,
                                               double noise_std) {
  return a_optimal_work(jacobian, prior, weight, noise_std, true).sensitivity;
}

bool design_feasible(const Eigen::MatrixXd& angles, double surface_radius,
                     double min_chord_separation) {
  if (angles.cols() != 2) throw ParameterError("electrode layout must be M x 2");
  const int m = static_cast<int>(angles.rows());
  const double limit = std::numbers::pi / 2.0;
  for (int e = 0; e < m; ++e) {
    const double theta = angles(e, 0);
    if (!(theta > 0.0) || !(theta < limit)) return false;
    if (!std::isfinite(angles(e, 1))) return false;
  }
  Eigen::MatrixXd centers(m, 3);
  for (int e = 0; e < m; ++e) {
    const double theta = angles(e, 0), phi = angles(e, 1);
    centers.row(e) = surface_radius *
                     Eigen::RowVector3d(std::sin(theta) * std::cos(phi),
                                        std::sin(theta) * std::sin(phi), std::cos(theta));
  }
  const double floor2 = min_chord_separation * min_chord_separation;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (!((centers.row(a) - centers.row(b)).squaredNorm() > floor2)) return false;
  return true;
}

Eigen::MatrixXd apply_design_step(const Eigen::MatrixXd& angles,
                                  const Eigen::VectorXd& direction, double scale,
                                  double pole_threshold) {
  if (angles.cols() != 2) throw ParameterError("electrode layout must be M x 2");
  const int m = static_cast<int>(angles.rows());
  if (direction.size() != 2 * m)
    throw ParameterError("design direction length must be twice the electrode count");
  Eigen::MatrixXd out(m, 2);
  for (int e = 0; e < m; ++e) {
    const double theta = angles(e, 0), phi = angles(e, 1);
    const double step_theta = scale * direction[e];
    const double step_phi = scale * direction[m + e];
    if (theta >= pole_threshold) {
      out(e, 0) = theta + step_theta;
      out(e, 1) = phi + step_phi;
    } else {
      // Near the pole a plain azimuth increment is an arbitrarily large
      // rotation; move in the local tangent plane instead and read the new
      // angles off the displaced point, which also crosses the pole cleanly.
      const double c = std::cos(phi), s = std::sin(phi);
      const double px = (theta + step_theta) * c - step_phi * s;
      const double py = (theta + step_theta) * s + step_phi * c;
      out(e, 0) = std::hypot(px, py);
      out(e, 1) = std::atan2(py, px);
    }
  }
  return out;
}

double design_value(const DesignProblem& problem, const Eigen::MatrixXd& angles) {
  check_problem(problem, angles);
  const RelabeledDesign relabeled = feed_first(problem, angles);
  const auto patches =
      build_electrode_patches(*problem.mesh, problem.surface, problem.profile, relabeled.angles);
  const ForwardSolver solver(*problem.mesh, *problem.geometry, patches, problem.sigma,
                             relabeled.zeta);
  const SensitivityBundle bundle(solver);
  return a_optimal_work(bundle.sigma_jacobian(), problem.prior, problem.weight,
                        problem.noise_std, false)
      .value;
}

DesignObjective design_objective(const DesignProblem& problem, const Eigen::MatrixXd& angles) {
  check_problem(problem, angles);
  const RelabeledDesign relabeled = feed_first(problem, angles);
  const auto patches =
      build_electrode_patches(*problem.mesh, problem.surface, problem.profile, relabeled.angles);
  const ForwardSolver solver(*problem.mesh, *problem.geometry, patches, problem.sigma,
                             relabeled.zeta);
  const SensitivityBundle bundle(solver);
  const AOptimalWork work = a_optimal_work(bundle.sigma_jacobian(), problem.prior,
                                           problem.weight, problem.noise_std, true);
  const int m = static_cast<int>(angles.rows());
  DesignObjective out;
  out.value = work.value;
  out.gradient.resize(2 * m);
  for (int k = 0; k < 2 * m; ++k) {
    const Eigen::MatrixXd dj = bundle.shape_sigma_jacobian_derivative(k);
    const double component = -2.0 * work.sensitivity.cwiseProduct(dj).sum();
    const int electrode = relabeled.order[k % m];  // undo the feeder rotation
    out.gradient[k < m ? electrode : m + electrode] = component;
  }
  return out;
}

ArmijoResult armijo_search(const std::function<double(double)>& trial_value,
                           double current_value, double directional_slope,
                           double lambda_init, double slope_fraction, double backoff,
                           int max_trials) {
  if (!trial_value) throw ParameterError("line search needs a trial functional");
  if (!(lambda_init > 0.0)) throw ParameterError("initial step must be positive");
  if (!(slope_fraction > 0.0) || !(slope_fraction < 1.0))
    throw ParameterError("sufficient-decrease fraction must lie in (0, 1)");
  if (!(backoff > 0.0) || !(backoff < 1.0))
    throw ParameterError("backoff factor must lie in (0, 1)");
  if (max_trials < 1) throw ParameterError("at least one line-search trial is required");

  ArmijoResult out;
  double lambda = lambda_init;
  for (int trial = 0; trial < max_trials; ++trial) {
    const double value = trial_value(lambda);
    ++out.trials;
    if (value - current_value < lambda * slope_fraction * directional_slope) {
      out.lambda = lambda;
      out.accepted = true;
      out.value = value;
      return out;
    }
    lambda *= backoff;
  }
  out.lambda = lambda;  // lambda_init * backoff^max_trials, never evaluated
  out.value = std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::vector<DesignTraceRow> optimize_design(const DesignFunctional& functional,
                                            const Eigen::MatrixXd& initial_angles,
                                            const OedOptions& options) {
  if (!functional.value || !functional.objective || !functional.feasible)
    throw ParameterError("design functional must provide value, objective, and feasibility");
  if (options.max_iterations < 0) throw ParameterError("iteration budget must be nonnegative");
  if (!functional.feasible(initial_angles))
    throw ParameterError("initial electrode layout is infeasible");

  Eigen::MatrixXd angles = initial_angles;
  DesignObjective state = functional.objective(angles);
  if (options.gradient_preflight)
    preflight_gradient(functional, angles, state.gradient, options);

  std::vector<DesignTraceRow> trace;
  trace.reserve(static_cast<std::size_t>(options.max_iterations) + 1);
  const auto record = [&](int iteration, double lambda, int trials, bool accepted) {
    DesignTraceRow row;
    row.iteration = iteration;
    row.angles = angles;
    row.value = state.value;
    row.value_sqrt = std::sqrt(std::max(state.value, 0.0));
    row.gradient_norm = state.gradient.norm();
    row.lambda = lambda;
    row.armijo_trials = trials;
    row.accepted = accepted;
    trace.push_back(std::move(row));
  };
  record(0, 0.0, 0, false);

  for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
    const double gradient_norm = state.gradient.norm();
    if (!(gradient_norm > options.epsilon)) break;
    const Eigen::VectorXd direction = -state.gradient / gradient_norm;

    const auto trial = [&](double lambda) {
      const Eigen::MatrixXd moved =
          apply_design_step(angles, direction, lambda, options.pole_threshold);
      if (!functional.feasible(moved)) return std::numeric_limits<double>::infinity();
      return functional.value(moved);
    };
    const ArmijoResult search =
        armijo_search(trial, state.value, -gradient_norm, options.lambda_init,
                      options.slope_fraction, options.backoff, options.max_armijo_trials);

    double applied = 0.0;
    if (search.accepted) {
      angles = apply_design_step(angles, direction, search.lambda, options.pole_threshold);
      state = functional.objective(angles);
      applied = search.lambda;
    } else {
      // Exhausted search: still move by the residual step when that design is
      // feasible; otherwise hold position and let the next iteration retry.
      const Eigen::MatrixXd moved =
          apply_design_step(angles, direction, search.lambda, options.pole_threshold);
      if (functional.feasible(moved)) {
        angles = moved;
        state = functional.objective(angles);
        applied = search.lambda;
      }
    }
    record(iteration, applied, search.trials, search.accepted);
  }
  return trace;
}

std::vector<DesignTraceRow> optimize_design(const DesignProblem& problem,
                                            const Eigen::MatrixXd& initial_angles,
                                            const OedOptions& options) {
  DesignFunctional functional;
  functional.value = [&problem](const Eigen::MatrixXd& a) { return design_value(problem, a); };
  functional.objective = [&problem](const Eigen::MatrixXd& a) {
    return design_objective(problem, a);
  };
  functional.feasible = [&problem](const Eigen::MatrixXd& a) {
    return design_feasible(a, problem.surface.radius(), problem.min_chord_separation);
  };
  return optimize_design(functional, initial_angles, options);
}

}  // namespace eit
