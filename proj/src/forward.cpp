#include "eit/forward.hpp"

#include <cmath>

namespace eit {

Eigen::SparseMatrix<double> stiffness_matrix(const SimplicialMesh& mesh,
                                             const ElementGeometry& geo,
                                             const Eigen::VectorXd& sigma_nodes) {
  if (sigma_nodes.size() != mesh.n_nodes())
    throw ParameterError("stiffness: conductivity must be nodal");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.n_simplices()) * 16);
  for (int k = 0; k < mesh.n_simplices(); ++k) {
    double sigma_bar = 0.0;
    for (int v = 0; v < 4; ++v) sigma_bar += sigma_nodes[mesh.simplices(k, v)];
    sigma_bar *= 0.25;
    const double scale = sigma_bar * geo.volume[k];
    for (int a = 0; a < 4; ++a) {
      const Eigen::Vector3d ga = geo.grad.block<1, 3>(k, 3 * a).transpose();
      for (int b = 0; b < 4; ++b) {
        const Eigen::Vector3d gb = geo.grad.block<1, 3>(k, 3 * b).transpose();
        trips.emplace_back(mesh.simplices(k, a), mesh.simplices(k, b), scale * ga.dot(gb));
      }
    }
  }
  Eigen::SparseMatrix<double> a(mesh.n_nodes(), mesh.n_nodes());
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

ForwardSolver::ForwardSolver(const SimplicialMesh& mesh, const ElementGeometry& geo,
                             const std::vector<ElectrodePatch>& patches,
                             const Eigen::VectorXd& sigma_nodes, const Eigen::VectorXd& zeta)
    : mesh_(mesh),
      geo_(geo),
      patches_(patches),
      sigma_(sigma_nodes),
      zeta_(zeta),
      n_(mesh.n_nodes()),
      m_(static_cast<int>(patches.size())) {
  if (m_ < 2) throw ParameterError("forward solver needs at least two electrodes");
  if (zeta_.size() != m_) throw ParameterError("one contact level per electrode required");
  if (sigma_.size() != n_) throw ParameterError("conductivity must be nodal");

  // K = [ A + B   C ]   restricted to voltages with zero sum via the basis
  //     [ C^T     D ]   Z whose columns are e_l - e_{M-1}.
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double> top = stiffness_matrix(mesh_, geo_, sigma_);
  for (int m = 0; m < m_; ++m) top += zeta_[m] * patches_[m].phi_phi;
  const int size = n_ + m_ - 1;
  trips.reserve(top.nonZeros() + 2 * static_cast<std::size_t>(n_) * (m_ - 1) + m_ * m_);
  for (int col = 0; col < top.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(top, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), col, it.value());

  // Coupling columns C Z with C_{:,m} = -zeta_m * phi_m.
  for (int l = 0; l < m_ - 1; ++l) {
    for (int i = 0; i < n_; ++i) {
      const double v = -zeta_[l] * patches_[l].phi[i] + zeta_[m_ - 1] * patches_[m_ - 1].phi[i];
      if (v == 0.0) continue;
      trips.emplace_back(i, n_ + l, v);
      trips.emplace_back(n_ + l, i, v);
    }
  }
  // Z^T D Z with D = diag(zeta_m * area_m).
  const double last = zeta_[m_ - 1] * patches_[m_ - 1].area;
  for (int l = 0; l < m_ - 1; ++l)
    for (int k = 0; k < m_ - 1; ++k)
      trips.emplace_back(n_ + l, n_ + k, (l == k ? zeta_[l] * patches_[l].area : 0.0) + last);

  system_.resize(size, size);
  system_.setFromTriplets(trips.begin(), trips.end());

  factorization_.compute(system_);
  if (factorization_.info() != Eigen::Success)
    throw NumericalError("forward system factorisation failed");
  const Eigen::VectorXd d = factorization_.vectorD();
  if (!(d.minCoeff() > 1e-14 * d.maxCoeff()))
    throw NumericalError(
        "forward system is numerically singular; check conductivity and contact levels");
}

Eigen::VectorXd ForwardSolver::solve_raw(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_ + m_ - 1) throw ParameterError("right-hand side has the wrong size");
  Eigen::VectorXd x = factorization_.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0) {
    const double residual = (system_ * x - rhs).norm();
    if (!(residual <= 1e-10 * rhs_norm))
      throw NumericalError("forward solve residual exceeded tolerance");
  }
  return x;
}

Eigen::VectorXd ForwardSolver::expand_voltages(const Eigen::VectorXd& reduced) const {
  if (reduced.size() != m_ - 1) throw ParameterError("reduced voltages have the wrong size");
  Eigen::VectorXd full(m_);
  full.head(m_ - 1) = reduced;
  full[m_ - 1] = -reduced.sum();
  return full;
}

Eigen::VectorXd ForwardSolver::reduce_electrode_vector(const Eigen::VectorXd& full) const {
  if (full.size() != m_) throw ParameterError("electrode vector has the wrong size");
  return (full.head(m_ - 1).array() - full[m_ - 1]).matrix();
}

ForwardSolver::Solution ForwardSolver::solve(const Eigen::VectorXd& currents) const {
  if (currents.size() != m_) throw ParameterError("one current per electrode required");
  const double scale = currents.cwiseAbs().maxCoeff();
  if (scale > 0.0 && std::abs(currents.sum()) > 1e-10 * scale)
    throw ParameterError("electrode currents must sum to zero");

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ + m_ - 1);
  rhs.tail(m_ - 1) = reduce_electrode_vector(currents);
  const Eigen::VectorXd x = solve_raw(rhs);

  Solution sol;
  sol.potential = x.head(n_);
  sol.voltages = expand_voltages(x.tail(m_ - 1));
  return sol;
}

ForwardSolver::PatternSolutions ForwardSolver::solve_reference_patterns() const {
  PatternSolutions out;
  out.potentials.resize(n_, m_ - 1);
  out.voltages.resize(m_, m_ - 1);
  Eigen::VectorXd currents = Eigen::VectorXd::Zero(m_);
  for (int j = 0; j < m_ - 1; ++j) {
    currents.setZero();
    currents[0] = 1.0;
    currents[j + 1] = -1.0;
    const Solution sol = solve(currents);
    out.potentials.col(j) = sol.potential;
    out.voltages.col(j) = sol.voltages;
  }
  return out;
}

Eigen::VectorXd ForwardSolver::stack_measurements(const Eigen::MatrixXd& voltages) {
  const int m = static_cast<int>(voltages.rows());
  const int patterns = static_cast<int>(voltages.cols());
  Eigen::VectorXd stacked(m * patterns);
  for (int j = 0; j < patterns; ++j) stacked.segment(j * m, m) = voltages.col(j);
  return stacked;
}

}  // namespace eit
