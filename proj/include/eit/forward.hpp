#ifndef EIT_FORWARD_HPP
#define EIT_FORWARD_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "eit/contact.hpp"
#include "eit/mesh.hpp"

namespace eit {

// P1 stiffness matrix for a nodal isotropic conductivity; each element uses
// the mean of its vertex values.
Eigen::SparseMatrix<double> stiffness_matrix(const SimplicialMesh& mesh,
                                             const ElementGeometry& geo,
                                             const Eigen::VectorXd& sigma_nodes);

// Complete-electrode forward problem with smooth contact weights: interior
// potential u coupled to electrode voltages U through the contact integrals,
// reduced to the zero-sum voltage subspace (columns e_l - e_{M-1}) so the
// system is symmetric positive definite and the voltage gauge sum(U) = 0 is
// built in. One factorisation serves every current pattern and any auxiliary
// right-hand side, which the derivative assembly relies on.
class ForwardSolver {
 public:
  ForwardSolver(const SimplicialMesh& mesh, const ElementGeometry& geo,
                const std::vector<ElectrodePatch>& patches, const Eigen::VectorXd& sigma_nodes,
                const Eigen::VectorXd& zeta);

  int n_nodes() const { return n_; }
  int n_electrodes() const { return m_; }
  int n_patterns() const { return m_ - 1; }

  struct Solution {
    Eigen::VectorXd potential;  // nodal values, size n
    Eigen::VectorXd voltages;   // electrode values, size M, summing to zero
  };
  // currents must have size M and sum to zero.
  Solution solve(const Eigen::VectorXd& currents) const;

  struct PatternSolutions {
    Eigen::MatrixXd potentials;  // n x (M-1)
    Eigen::MatrixXd voltages;    // M x (M-1)
  };
  // All reference current patterns e_0 - e_{j+1}, j = 0..M-2.
  PatternSolutions solve_reference_patterns() const;

  // Stacked measurement vector of all reference patterns, pattern-major and
  // electrode-minor: entry j*M + m is pattern j's voltage on electrode m.
  static Eigen::VectorXd stack_measurements(const Eigen::MatrixXd& voltages);

  // Solve the reduced system for an arbitrary right-hand side of size
  // n + (M-1); used by the derivative assembly.
  Eigen::VectorXd solve_raw(const Eigen::VectorXd& rhs) const;

  // Map reduced electrode coefficients (size M-1) to voltages (size M).
  Eigen::VectorXd expand_voltages(const Eigen::VectorXd& reduced) const;
  // Adjoint of expand_voltages composed with current injection: reduced
  // representation of a full-size electrode vector.
  Eigen::VectorXd reduce_electrode_vector(const Eigen::VectorXd& full) const;

  const SimplicialMesh& mesh() const { return mesh_; }
  const ElementGeometry& geometry() const { return geo_; }
  const std::vector<ElectrodePatch>& patches() const { return patches_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& zeta() const { return zeta_; }
  const Eigen::SparseMatrix<double>& system() const { return system_; }

 private:
  const SimplicialMesh& mesh_;
  const ElementGeometry& geo_;
  const std::vector<ElectrodePatch>& patches_;
  Eigen::VectorXd sigma_, zeta_;
  int n_ = 0, m_ = 0;
  Eigen::SparseMatrix<double> system_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factorization_;
};

}  // namespace eit

#endif  // EIT_FORWARD_HPP
