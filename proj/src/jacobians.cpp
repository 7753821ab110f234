#include "eit/jacobians.hpp"

namespace eit {

SensitivityBundle::SensitivityBundle(const ForwardSolver& solver)
    : solver_(solver), n_(solver.n_nodes()), m_(solver.n_electrodes()) {
  adj_potentials_.resize(n_, m_);
  adj_voltages_.resize(m_, m_);

  // One adjoint per electrode: the system solved against the reduced
  // indicator of that electrode. Reference pattern j (feed 0, sink j+1) is
  // the difference of two adjoints because the right-hand side map is linear.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ + m_ - 1);
  for (int a = 0; a < m_; ++a) {
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(m_);
    indicator[a] = 1.0;
    rhs.tail(m_ - 1) = solver_.reduce_electrode_vector(indicator);
    const Eigen::VectorXd x = solver_.solve_raw(rhs);
    adj_potentials_.col(a) = x.head(n_);
    adj_voltages_.col(a) = solver_.expand_voltages(x.tail(m_ - 1));
  }

  pat_potentials_.resize(n_, m_ - 1);
  pat_voltages_.resize(m_, m_ - 1);
  for (int j = 0; j < m_ - 1; ++j) {
    pat_potentials_.col(j) = adj_potentials_.col(0) - adj_potentials_.col(j + 1);
    pat_voltages_.col(j) = adj_voltages_.col(0) - adj_voltages_.col(j + 1);
  }
  measurements_ = ForwardSolver::stack_measurements(pat_voltages_);

  jac_sigma_ = assemble_gradient_products(adj_potentials_, pat_potentials_);
}

Eigen::MatrixXd SensitivityBundle::assemble_gradient_products(
    const Eigen::MatrixXd& left_potentials, const Eigen::MatrixXd& right_potentials) const {
  const SimplicialMesh& mesh = solver_.mesh();
  const ElementGeometry& geo = solver_.geometry();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m_ * (m_ - 1), n_);

  Eigen::Matrix<double, 3, 4> grads;
  Eigen::Matrix<double, 4, Eigen::Dynamic> lvals(4, left_potentials.cols());
  Eigen::Matrix<double, 4, Eigen::Dynamic> rvals(4, right_potentials.cols());
  for (int k = 0; k < mesh.n_simplices(); ++k) {
    for (int v = 0; v < 4; ++v) {
      grads.col(v) = geo.grad.block<1, 3>(k, 3 * v).transpose();
      lvals.row(v) = left_potentials.row(mesh.simplices(k, v));
      rvals.row(v) = right_potentials.row(mesh.simplices(k, v));
    }
    // Element-constant gradients of every column, then all pairwise products.
    const Eigen::MatrixXd lg = grads * lvals;
    const Eigen::MatrixXd rg = grads * rvals;
    const Eigen::MatrixXd s = lg.transpose() * rg;  // M x (M-1)
    const double scale = 0.25 * geo.volume[k];
    for (int v = 0; v < 4; ++v) {
      const int node = mesh.simplices(k, v);
      for (int j = 0; j < m_ - 1; ++j)
        for (int a = 0; a < m_; ++a) out(j * m_ + a, node) -= scale * s(a, j);
    }
  }
  return out;
}

namespace {

// w^T K' x sandwich for a contact perturbation of electrode m whose boundary
// integrals are (P, phi, area): entry (a, j) pairs adjoint a with pattern j.
Eigen::MatrixXd contact_sandwich(const Eigen::SparseMatrix<double>& p, const Eigen::VectorXd& phi,
                                 double area, int m, const Eigen::MatrixXd& adj_potentials,
                                 const Eigen::MatrixXd& adj_voltages,
                                 const Eigen::MatrixXd& pat_potentials,
                                 const Eigen::MatrixXd& pat_voltages) {
  Eigen::MatrixXd t = adj_potentials.transpose() * (p * pat_potentials);
  const Eigen::VectorXd pw = adj_potentials.transpose() * phi;
  const Eigen::VectorXd px = pat_potentials.transpose() * phi;
  t.noalias() -= pw * pat_voltages.row(m);
  t.noalias() -= adj_voltages.row(m).transpose() * px.transpose();
  t.noalias() += area * adj_voltages.row(m).transpose() * pat_voltages.row(m);
  return t;
}

Eigen::VectorXd stack_pattern_major(const Eigen::MatrixXd& t) {
  const int m = static_cast<int>(t.rows());
  Eigen::VectorXd out(m * t.cols());
  for (int j = 0; j < t.cols(); ++j) out.segment(j * m, m) = t.col(j);
  return out;
}

}  // namespace

Eigen::MatrixXd SensitivityBundle::zeta_jacobian() const {
  Eigen::MatrixXd jac(m_ * (m_ - 1), m_);
  for (int m = 0; m < m_; ++m) {
    const ElectrodePatch& patch = solver_.patches()[m];
    const Eigen::MatrixXd t =
        contact_sandwich(patch.phi_phi, patch.phi, patch.area, m, adj_potentials_, adj_voltages_,
                         pat_potentials_, pat_voltages_);
    jac.col(m) = -stack_pattern_major(t);
  }
  return jac;
}

std::pair<int, int> SensitivityBundle::design_axis(int direction) const {
  if (direction < 0 || direction >= 2 * m_)
    throw ParameterError("design direction out of range");
  return direction < m_ ? std::make_pair(direction, 0) : std::make_pair(direction - m_, 1);
}

Eigen::VectorXd SensitivityBundle::shape_measurement_derivative(int direction) const {
  const auto [m, axis] = design_axis(direction);
  const ElectrodePatch& patch = solver_.patches()[m];
  const Eigen::MatrixXd t =
      contact_sandwich(patch.dphi_phi[axis], patch.dphi[axis], patch.darea[axis], m,
                       adj_potentials_, adj_voltages_, pat_potentials_, pat_voltages_);
  return -solver_.zeta()[m] * stack_pattern_major(t);
}

Eigen::MatrixXd SensitivityBundle::apply_shape_derivative(int direction,
                                                          const Eigen::MatrixXd& potentials,
                                                          const Eigen::MatrixXd& voltages) const {
  const auto [m, axis] = design_axis(direction);
  const ElectrodePatch& patch = solver_.patches()[m];
  const double zeta = solver_.zeta()[m];
  const int cols = static_cast<int>(potentials.cols());

  Eigen::MatrixXd out(n_ + m_ - 1, cols);
  out.topRows(n_) = zeta * (patch.dphi_phi[axis] * potentials -
                            patch.dphi[axis] * voltages.row(m));
  const Eigen::RowVectorXd electrode_row =
      zeta * (-(patch.dphi[axis].transpose() * potentials) +
              patch.darea[axis] * voltages.row(m));
  Eigen::VectorXd indicator = Eigen::VectorXd::Zero(m_);
  indicator[m] = 1.0;
  const Eigen::VectorXd reduced = solver_.reduce_electrode_vector(indicator);
  out.bottomRows(m_ - 1) = reduced * electrode_row;
  return out;
}

Eigen::MatrixXd SensitivityBundle::shape_sigma_jacobian_derivative(int direction) const {
  // Product rule through both solution families: K w' = -K' w for the
  // adjoints, and the patterns inherit their derivatives as differences.
  const Eigen::MatrixXd rhs = apply_shape_derivative(direction, adj_potentials_, adj_voltages_);
  Eigen::MatrixXd adj_dot(n_, m_);
  for (int a = 0; a < m_; ++a) adj_dot.col(a) = -solver_.solve_raw(rhs.col(a)).head(n_);

  Eigen::MatrixXd pat_dot(n_, m_ - 1);
  for (int j = 0; j < m_ - 1; ++j) pat_dot.col(j) = adj_dot.col(0) - adj_dot.col(j + 1);

  return assemble_gradient_products(adj_dot, pat_potentials_) +
         assemble_gradient_products(adj_potentials_, pat_dot);
}

}  // namespace eit
