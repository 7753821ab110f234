#ifndef EIT_JACOBIANS_HPP
#define EIT_JACOBIANS_HPP

#include <Eigen/Dense>

#include "eit/forward.hpp"

namespace eit {

// Measurement sensitivities at one electrode layout. Solves one adjoint
// problem per electrode against the forward factorisation; the reference
// current patterns are differences of those adjoints, so every sensitivity
// below reuses the same M solutions. Row indexing of all Jacobians matches
// the stacked measurement vector: row j*M + a is pattern j, electrode a.
class SensitivityBundle {
 public:
  explicit SensitivityBundle(const ForwardSolver& solver);

  int n_measurements() const { return m_ * (m_ - 1); }
  // Design coordinates: (theta_0..theta_{M-1}, phi_0..phi_{M-1}).
  int n_design() const { return 2 * m_; }

  const Eigen::VectorXd& measurements() const { return measurements_; }
  // d(measurements)/d(nodal conductivity), M(M-1) x n.
  const Eigen::MatrixXd& sigma_jacobian() const { return jac_sigma_; }
  // d(measurements)/d(contact level), M(M-1) x M.
  Eigen::MatrixXd zeta_jacobian() const;
  // d(measurements)/d(design coordinate k), M(M-1).
  Eigen::VectorXd shape_measurement_derivative(int direction) const;
  // d(sigma_jacobian)/d(design coordinate k), M(M-1) x n.
  Eigen::MatrixXd shape_sigma_jacobian_derivative(int direction) const;

  const ForwardSolver& solver() const { return solver_; }

 private:
  // Splits a design coordinate into (electrode, theta-or-phi).
  std::pair<int, int> design_axis(int direction) const;
  // K'(direction) applied to the columns of [potentials; voltages].
  Eigen::MatrixXd apply_shape_derivative(int direction, const Eigen::MatrixXd& potentials,
                                         const Eigen::MatrixXd& voltages) const;
  // Assembles sum_K (V_K/4) * scatter(grad(left)^T grad(right)) rows into a
  // measurement-indexed matrix; both terms of the product rule pass through.
  Eigen::MatrixXd assemble_gradient_products(const Eigen::MatrixXd& left_potentials,
                                             const Eigen::MatrixXd& right_potentials) const;

  const ForwardSolver& solver_;
  int n_ = 0, m_ = 0;
  Eigen::MatrixXd adj_potentials_;  // n x M
  Eigen::MatrixXd adj_voltages_;    // M x M
  Eigen::MatrixXd pat_potentials_;  // n x (M-1)
  Eigen::MatrixXd pat_voltages_;    // M x (M-1)
  Eigen::VectorXd measurements_;    // M(M-1)
  Eigen::MatrixXd jac_sigma_;       // M(M-1) x n
};

}  // namespace eit

#endif  // EIT_JACOBIANS_HPP
