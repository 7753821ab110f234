#include <doctest.h>

#include <cmath>
#include <limits>

#include "eit/gaussian.hpp"
#include "eit/oed.hpp"

using namespace eit;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  NormalSampler rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.next();
  return m;
}

Eigen::SparseMatrix<double> random_psd_weight(int n, std::uint64_t seed) {
  const Eigen::MatrixXd b = random_matrix(n, 5, seed);
  return Eigen::MatrixXd(b * b.transpose()).sparseView();
}

double weighted_trace(const Eigen::SparseMatrix<double>& weight, const Eigen::MatrixXd& cov) {
  return (Eigen::MatrixXd(weight) * cov).trace();
}

}  // namespace

TEST_CASE("a-optimality matches the scalar hand computation") {
  const Eigen::MatrixXd j = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 1.0);
  Eigen::SparseMatrix<double> w(1, 1);
  w.insert(0, 0) = 1.0;
  CHECK(a_optimal_value(j, p, w, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  // d(value)/dJ at J = 1 is -1/2, reported through the -2<G, dJ> convention.
  const Eigen::MatrixXd g = a_optimal_jacobian_sensitivity(j, p, w, 1.0);
  CHECK(-2.0 * g(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("a zero jacobian keeps exactly the prior variance") {
  const int n = 17;
  const Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, n);
  const Eigen::MatrixXd base = random_matrix(n, n, 7);
  const Eigen::MatrixXd prior =
      base * base.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::SparseMatrix<double> weight = random_psd_weight(n, 8);
  CHECK(a_optimal_value(j, prior, weight, 0.5) ==
        doctest::Approx(weighted_trace(weight, prior)).epsilon(1e-14));
  // The data term is exactly zero, so the noise level cannot matter at all.
  CHECK(a_optimal_value(j, prior, weight, 0.5) == a_optimal_value(j, prior, weight, 123.0));
}

TEST_CASE("a-optimality equals the weighted trace of the dense posterior") {
  const int n = 40, m = 12;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::MatrixXd jac = random_matrix(m, n, 100 + seed);
    const Eigen::MatrixXd base = 0.3 * random_matrix(n, n, 200 + seed);
    const Eigen::MatrixXd prior =
        base * base.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::SparseMatrix<double> weight = random_psd_weight(n, 300 + seed);
    const double eta = 0.7;

    const double value = a_optimal_value(jac, prior, weight, eta);
    const GaussianPosterior oracle =
        gaussian_posterior(jac, prior, eta, Eigen::VectorXd::Zero(m));
    CHECK(value == doctest::Approx(weighted_trace(weight, oracle.covariance)).epsilon(1e-10));
    // Observations can only reduce the expected weighted variance.
    CHECK(value <= weighted_trace(weight, prior) + 1e-10 * weighted_trace(weight, prior));
  }
}

TEST_CASE("jacobian sensitivity matches finite differences of the target") {
  const int n = 15, m = 6;
  const Eigen::MatrixXd jac = random_matrix(m, n, 51);
  const Eigen::MatrixXd base = 0.4 * random_matrix(n, n, 52);
  const Eigen::MatrixXd prior =
      base * base.transpose() + 0.3 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::SparseMatrix<double> weight = random_psd_weight(n, 53);
  const double eta = 0.4;

  const Eigen::MatrixXd g = a_optimal_jacobian_sensitivity(jac, prior, weight, eta);
  const double h = 1e-6;
  for (int i : {0, 3, 5})
    for (int j : {0, 7, 14}) {
      Eigen::MatrixXd plus = jac, minus = jac;
      plus(i, j) += h;
      minus(i, j) -= h;
      const double fd = (a_optimal_value(plus, prior, weight, eta) -
                         a_optimal_value(minus, prior, weight, eta)) /
                        (2.0 * h);
      CHECK(-2.0 * g(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

namespace {

struct OedRig {
  SimplicialMesh mesh;
  ElementGeometry geo;
  Eigen::MatrixXd angles;
  DesignProblem problem;

  OedRig() {
    mesh = build_layered_ball_mesh(0.09, 0.03, 0.055, 0.045);
    geo = element_geometry(mesh);
    angles.resize(4, 2);
    angles << 0.4, 0.0, 1.2, 0.0, 1.2, 2.0943951023931953, 1.2, 4.1887902047863905;

    problem.mesh = &mesh;
    problem.geometry = &geo;
    problem.surface = SphericalSurface(0.09);
    problem.profile = ContactProfile(0.035, 0.4);
    problem.sigma.resize(mesh.n_nodes());
    for (int i = 0; i < mesh.n_nodes(); ++i) {
      const double r = mesh.nodes.row(i).norm();
      problem.sigma[i] = (r < 0.03) ? 0.2 : (r < 0.055 ? 0.06 : 0.2);
    }
    problem.zeta = Eigen::VectorXd::Constant(4, 1e3);
    problem.prior = squared_exponential_covariance(mesh.nodes, 0.2, 0.05);
    problem.weight =
        mass_matrix(mesh, [this](int i) { return mesh.nodes.row(i).norm() < 0.03; });
    problem.feeding_electrode = 0;
    problem.min_chord_separation = 0.06;

    const auto patches = build_electrode_patches(mesh, problem.surface, problem.profile, angles);
    const ForwardSolver solver(mesh, geo, patches, problem.sigma, problem.zeta);
    const Eigen::VectorXd reference =
        ForwardSolver::stack_measurements(solver.solve_reference_patterns().voltages);
    problem.noise_std = 1e-3 * (reference.maxCoeff() - reference.minCoeff());
  }
};

OedRig& oed_rig() {
  static OedRig r;
  return r;
}

}  // namespace

TEST_CASE("design gradient matches finite differences in every angle") {
  auto& r = oed_rig();
  const DesignObjective obj = design_objective(r.problem, r.angles);
  CHECK(obj.value == design_value(r.problem, r.angles));

  const double h = 1e-4;
  Eigen::VectorXd fd(8);
  for (int k = 0; k < 8; ++k) {
    Eigen::MatrixXd plus = r.angles, minus = r.angles;
    const int row = k % 4, col = k < 4 ? 0 : 1;
    plus(row, col) += h;
    minus(row, col) -= h;
    fd[k] = (design_value(r.problem, plus) - design_value(r.problem, minus)) / (2.0 * h);
  }
  const double scale = fd.cwiseAbs().maxCoeff();
  REQUIRE(scale > 0.0);
  for (int k = 0; k < 8; ++k)
    CHECK(std::abs(obj.gradient[k] - fd[k]) <= 1e-2 * std::max(std::abs(fd[k]), 1e-3 * scale));
}

TEST_CASE("gradient is mirror-antisymmetric for a mirror-symmetric setup") {
  auto& r = oed_rig();
  DesignProblem problem = r.problem;
  Eigen::MatrixXd angles(5, 2);
  angles << 0.5, 0.0, 1.2, 1.0, 1.2, -1.0, 0.9, 2.4, 0.9, -2.4;
  problem.zeta = Eigen::VectorXd::Constant(5, 1e3);

  const Eigen::VectorXd g = design_objective(problem, angles).gradient;
  const Eigen::VectorXd unit = g / g.norm();
  // Reflection across the y = 0 plane swaps electrodes 1<->2 and 3<->4 and
  // flips azimuths, so polar components pair up and azimuthal ones cancel.
  CHECK(std::abs(unit[1] - unit[2]) <= 1e-6);
  CHECK(std::abs(unit[3] - unit[4]) <= 1e-6);
  CHECK(std::abs(unit[5]) <= 1e-6);
  CHECK(std::abs(unit[6] + unit[7]) <= 1e-6);
  CHECK(std::abs(unit[8] + unit[9]) <= 1e-6);
}

TEST_CASE("the feeding electrode is a relabeling of the reference patterns") {
  auto& r = oed_rig();
  DesignProblem fed = r.problem;
  fed.feeding_electrode = 2;

  DesignProblem rotated = r.problem;  // feeder 0 on the pre-rotated layout
  Eigen::MatrixXd rotated_angles(4, 2);
  rotated_angles << r.angles.row(2), r.angles.row(0), r.angles.row(1), r.angles.row(3);

  CHECK(design_value(fed, r.angles) == design_value(rotated, rotated_angles));

  const Eigen::VectorXd ga = design_objective(fed, r.angles).gradient;
  const Eigen::VectorXd gb = design_objective(rotated, rotated_angles).gradient;
  const int to_rotated[4] = {1, 2, 0, 3};  // original electrode -> rotated slot
  for (int e = 0; e < 4; ++e) {
    CHECK(ga[e] == gb[to_rotated[e]]);
    CHECK(ga[4 + e] == gb[4 + to_rotated[e]]);
  }
}

TEST_CASE("line search accepts the first trial on the quadratic toy") {
  // psi(d) = |d|^2 from d = (1, 0), direction -d: trial value (1 - lambda)^2.
  const auto trial = [](double lambda) { return (1.0 - lambda) * (1.0 - lambda); };
  const ArmijoResult r = armijo_search(trial, 1.0, -2.0, 0.5, 0.5, 5.0 / 6.0, 30);
  CHECK(r.accepted);
  CHECK(r.lambda == 0.5);
  CHECK(r.trials == 1);
  CHECK(r.value == 0.25);
}

TEST_CASE("line search backs off exactly one factor past a blocked trial") {
  const auto trial = [](double lambda) {
    if (lambda > 0.45) return std::numeric_limits<double>::infinity();
    return (1.0 - lambda) * (1.0 - lambda);
  };
  const ArmijoResult r = armijo_search(trial, 1.0, -2.0, 0.5, 0.5, 5.0 / 6.0, 30);
  CHECK(r.accepted);
  CHECK(r.lambda == 5.0 / 12.0);
  CHECK(r.trials == 2);
}

TEST_CASE("line search exhausts the budget on an ascent direction") {
  const auto trial = [](double lambda) { return (1.0 + lambda) * (1.0 + lambda); };
  const ArmijoResult r = armijo_search(trial, 1.0, 2.0, 0.5, 0.5, 5.0 / 6.0, 30);
  CHECK_FALSE(r.accepted);
  CHECK(r.trials == 30);
  double reference = 0.5;
  for (int l = 0; l < 30; ++l) reference *= 5.0 / 6.0;
  CHECK(r.lambda == reference);
}

TEST_CASE("line search validates its parameters") {
  const auto trial = [](double) { return 0.0; };
  CHECK_THROWS_AS(armijo_search(trial, 1.0, -1.0, 0.0, 0.5, 0.5, 10), ParameterError);
  CHECK_THROWS_AS(armijo_search(trial, 1.0, -1.0, 0.5, 1.0, 0.5, 10), ParameterError);
  CHECK_THROWS_AS(armijo_search(trial, 1.0, -1.0, 0.5, 0.5, 1.0, 10), ParameterError);
  CHECK_THROWS_AS(armijo_search(trial, 1.0, -1.0, 0.5, 0.5, 0.5, 0), ParameterError);
}

TEST_CASE("design steps move near-pole electrodes through the tangent plane") {
  Eigen::MatrixXd angles(2, 2);
  angles << 0.9, 0.7, 0.05, 0.0;

  // Above the threshold: plain coordinate update. Layout of the direction is
  // the design vector: (theta_0, theta_1, phi_0, phi_1).
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(4);
  direction << 0.1, -0.2, -0.4, 0.0;
  Eigen::MatrixXd moved = apply_design_step(angles, direction, 0.5, 0.2);
  CHECK(moved(0, 0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(moved(0, 1) == doctest::Approx(0.5).epsilon(1e-13));

  // Below it: a pure polar push through the pole flips the azimuth instead
  // of going to a negative polar angle.
  CHECK(moved(1, 0) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(std::abs(moved(1, 1)) == doctest::Approx(3.14159265358979324).epsilon(1e-12));

  // An azimuthal component acts as arc length, not as a raw angle change.
  Eigen::VectorXd swing = Eigen::VectorXd::Zero(4);
  swing << 0.0, 0.0, 0.0, 0.05;
  moved = apply_design_step(angles, swing, 1.0, 0.2);
  CHECK(moved(1, 0) == doctest::Approx(std::hypot(0.05, 0.05)).epsilon(1e-12));
  CHECK(moved(1, 1) == doctest::Approx(0.7853981633974483).epsilon(1e-12));

  CHECK_THROWS_AS(apply_design_step(angles, Eigen::VectorXd::Zero(3), 1.0, 0.2),
                  ParameterError);
}

TEST_CASE("feasibility screens polar bounds and electrode separation") {
  Eigen::MatrixXd good(2, 2);
  good << 0.5, 0.0, 1.2, 3.0;
  CHECK(design_feasible(good, 0.09, 0.06));

  Eigen::MatrixXd at_pole = good;
  at_pole(0, 0) = 0.0;
  CHECK_FALSE(design_feasible(at_pole, 0.09, 0.06));

  Eigen::MatrixXd at_equator = good;
  at_equator(1, 0) = 1.5707963267948966;
  CHECK_FALSE(design_feasible(at_equator, 0.09, 0.06));

  Eigen::MatrixXd crowded(2, 2);
  crowded << 0.8, 0.1, 0.8, 0.2;
  CHECK_FALSE(design_feasible(crowded, 0.09, 0.06));
  CHECK(design_feasible(crowded, 0.09, 0.0));

  Eigen::MatrixXd broken = good;
  broken(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(design_feasible(broken, 0.09, 0.06));

  CHECK_THROWS_AS(design_feasible(Eigen::MatrixXd::Zero(2, 3), 0.09, 0.06), ParameterError);
}

namespace {

// Quadratic toy over the design coordinates, laid out like the optimizer's
// design vector (theta block first, then phi block).
struct QuadraticSurrogate {
  Eigen::VectorXd target;
  double curvature = 1e-4;

  Eigen::VectorXd flatten(const Eigen::MatrixXd& angles) const {
    const int m = static_cast<int>(angles.rows());
    Eigen::VectorXd d(2 * m);
    d.head(m) = angles.col(0);
    d.tail(m) = angles.col(1);
    return d;
  }
  DesignFunctional functional() const {
    DesignFunctional f;
    f.value = [this](const Eigen::MatrixXd& a) {
      return curvature * (flatten(a) - target).squaredNorm();
    };
    f.objective = [this](const Eigen::MatrixXd& a) {
      DesignObjective obj;
      obj.value = curvature * (flatten(a) - target).squaredNorm();
      obj.gradient = 2.0 * curvature * (flatten(a) - target);
      return obj;
    };
    f.feasible = [](const Eigen::MatrixXd&) { return true; };
    return f;
  }
};

}  // namespace

TEST_CASE("descent from a near-stationary start makes no accepted step") {
  QuadraticSurrogate toy;
  toy.target.resize(4);
  toy.target << 0.7, 0.9, 0.3, 2.0;

  Eigen::MatrixXd initial(2, 2);
  initial << 0.7 + 1e-9, 0.3, 0.9, 2.0;

  OedOptions options;
  options.gradient_preflight = false;
  const auto trace = optimize_design(toy.functional(), initial, options);

  REQUIRE(trace.size() == 41);
  const double initial_value = trace.front().value;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK_FALSE(trace[i].accepted);
    CHECK(trace[i].armijo_trials == 30);
    CHECK(std::abs(trace[i].value - initial_value) <= 1e-8);
  }
  // The exhausted-step drift never leaves the immediate neighbourhood.
  CHECK((trace.back().angles - initial).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("a zero iteration budget reports only the initial design") {
  QuadraticSurrogate toy;
  toy.target = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd initial(2, 2);
  initial << 0.4, 0.1, 1.0, 2.0;

  OedOptions options;
  options.gradient_preflight = false;
  options.max_iterations = 0;
  const auto trace = optimize_design(toy.functional(), initial, options);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].iteration == 0);
  CHECK(trace[0].lambda == 0.0);
}

TEST_CASE("descent improves a real electrode layout") {
  auto& r = oed_rig();
  OedOptions options;
  options.max_iterations = 3;
  const auto trace = optimize_design(r.problem, r.angles, options);

  REQUIRE(trace.size() >= 2);
  REQUIRE(trace.size() <= 4);
  const double prior_trace =
      (Eigen::MatrixXd(r.problem.weight) * r.problem.prior).trace();

  bool any_accepted = false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& row = trace[i];
    CHECK(row.value <= prior_trace * (1.0 + 1e-10));
    CHECK(row.value_sqrt == std::sqrt(row.value));
    if (i > 0 && row.accepted) {
      any_accepted = true;
      // The sufficient-decrease inequality, restated from the trace.
      const auto& prev = trace[i - 1];
      CHECK(row.value - prev.value <
            row.lambda * options.slope_fraction * (-prev.gradient_norm) +
                1e-14 * std::abs(prev.value));
      CHECK(row.value < prev.value);
    }
  }
  CHECK(any_accepted);
}

TEST_CASE("the gradient preflight rejects a lying objective") {
  QuadraticSurrogate toy;
  toy.target = Eigen::VectorXd::Zero(4);
  toy.curvature = 1.0;
  DesignFunctional lying = toy.functional();
  lying.objective = [&toy](const Eigen::MatrixXd& a) {
    DesignObjective obj;
    obj.value = toy.curvature * (toy.flatten(a) - toy.target).squaredNorm();
    obj.gradient = Eigen::VectorXd::Constant(4, 7.0);
    return obj;
  };
  Eigen::MatrixXd initial(2, 2);
  initial << 0.4, 0.1, 1.0, 2.0;
  CHECK_THROWS_AS(optimize_design(lying, initial, OedOptions{}), NumericalError);

  // The honest functional passes the same preflight.
  const auto trace = optimize_design(toy.functional(), initial, OedOptions{});
  CHECK(trace.size() >= 2);
}

TEST_CASE("the preflight refuses stencils that leave the feasible set") {
  QuadraticSurrogate toy;
  toy.target = Eigen::VectorXd::Zero(4);
  DesignFunctional f = toy.functional();
  f.feasible = [](const Eigen::MatrixXd& a) { return a(0, 0) < 0.4 + 1e-5; };
  Eigen::MatrixXd initial(2, 2);
  initial << 0.4, 0.1, 1.0, 2.0;
  CHECK_THROWS_AS(optimize_design(f, initial, OedOptions{}), ParameterError);
}

TEST_CASE("design evaluation rejects inconsistent problems") {
  auto& r = oed_rig();

  DesignProblem bad = r.problem;
  bad.zeta = Eigen::VectorXd::Constant(3, 1e3);
  CHECK_THROWS_AS(design_value(bad, r.angles), ParameterError);

  bad = r.problem;
  bad.feeding_electrode = 4;
  CHECK_THROWS_AS(design_value(bad, r.angles), ParameterError);

  bad = r.problem;
  bad.noise_std = 0.0;
  CHECK_THROWS_AS(design_value(bad, r.angles), ParameterError);

  bad = r.problem;
  bad.prior = Eigen::MatrixXd::Identity(10, 10);
  CHECK_THROWS_AS(design_value(bad, r.angles), ParameterError);

  DesignProblem empty;
  CHECK_THROWS_AS(design_value(empty, r.angles), ParameterError);

  // Infeasible initial layouts are a caller error, not a null run.
  Eigen::MatrixXd touching = r.angles;
  touching.row(1) = touching.row(2);
  CHECK_THROWS_AS(optimize_design(r.problem, touching, OedOptions{}), ParameterError);
}
