#ifndef EIT_TV_HPP
#define EIT_TV_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "eit/jacobians.hpp"

namespace eit {

// Nodal weights that grow steeply near the boundary so reconstructed
// variation is pushed into the interior: 1 / (0.5 (1 + tanh(c (dist - b)))).
Eigen::VectorXd variation_weights(const SimplicialMesh& mesh, double steepness, double offset);

// Smoothed total variation sum_K V_K wbar_K sqrt(|grad kappa|^2 + T^2) of a
// perturbation that vanishes on the boundary, together with its lagged
// diffusivity matrix. The same element weight wbar_K (vertex mean) enters
// both, which makes each diffusivity solve a true majorize-minimize step.
class TotalVariation {
 public:
  TotalVariation(const SimplicialMesh& mesh, const ElementGeometry& geo,
                 Eigen::VectorXd nodal_weights, double smoothing);

  int n_interior() const { return static_cast<int>(interior_.size()); }
  const std::vector<int>& interior_nodes() const { return interior_; }

  Eigen::VectorXd to_full(const Eigen::VectorXd& interior_values) const;
  Eigen::VectorXd to_interior(const Eigen::VectorXd& full_values) const;

  double value(const Eigen::VectorXd& kappa_interior) const;
  // Interior-by-interior matrix whose quadratic form majorizes the
  // functional up to constants; its gradient identity is
  // d(value)/d(kappa) = matrix(kappa) * kappa.
  Eigen::SparseMatrix<double> matrix(const Eigen::VectorXd& kappa_interior) const;

 private:
  const SimplicialMesh& mesh_;
  const ElementGeometry& geo_;
  Eigen::VectorXd weights_;         // nodal
  Eigen::VectorXd element_weight_;  // vertex mean per element
  double smoothing_;
  std::vector<int> interior_;
  std::vector<int> interior_index_;  // node -> interior position or -1
};

struct TvStepResult {
  Eigen::VectorXd kappa;  // interior-sized
  double tikhonov = 0.0;  // 0.5 |A kappa - b|^2 + gamma * value(kappa)
};

// One lagged-diffusivity step from kappa_prev:
// (A^T A + gamma Theta(kappa_prev)) kappa = A^T b, solved in measurement
// space so only small dense systems and sparse Theta solves appear.
TvStepResult lagged_diffusivity_step(const TotalVariation& tv, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b, double gamma,
                                     const Eigen::VectorXd& kappa_prev);

// Covariance of the Laplace approximation at kappa for the same linear
// problem: (A^T A + gamma Theta(kappa))^{-1}, interior-by-interior.
Eigen::MatrixXd tv_posterior_covariance(const TotalVariation& tv, const Eigen::MatrixXd& a,
                                        double gamma, const Eigen::VectorXd& kappa);

// Floors sigma0 + kappa at floor_fraction * min(sigma0). Returns the adjusted
// perturbation and throws NumericalError if more than limit_fraction of the
// nodes needed flooring.
Eigen::VectorXd clamp_perturbation(const Eigen::VectorXd& sigma0,
                                   const Eigen::VectorXd& kappa_full, double floor_fraction,
                                   double limit_fraction);

struct TvOptions {
  int linearizations = 5;
  int inner_steps = 5;
  double gamma = 1e5;
  double smoothing = 1e-6;
  double weight_steepness = 300.0;
  double weight_offset = 0.01;
  bool contacts_known = true;
  double floor_fraction = 1e-3;
  double clamp_limit_fraction = 0.2;
  bool want_covariance = false;
};

struct TvTraceRow {
  int linearization = 0;  // 1-based
  int inner_step = 0;     // 1-based
  double tikhonov = 0.0;
};

struct TvResult {
  Eigen::VectorXd kappa_full;  // nodal conductivity perturbation, zero on the boundary
  Eigen::VectorXd xi;          // contact-level perturbation, zero when contacts are known
  std::vector<TvTraceRow> trace;
  Eigen::MatrixXd covariance;        // interior x interior, when requested
  std::vector<int> interior_nodes;   // row/column labels of the covariance
};

// Outer loop: relinearize the forward map around the running estimate, run
// inner diffusivity steps on the whitened (and, for unknown contact levels,
// contact-projected) linear problem, and carry the estimate forward.
TvResult tv_reconstruct(const SimplicialMesh& mesh, const ElementGeometry& geo,
                        const SphericalSurface& surface, const ContactProfile& profile,
                        const Eigen::MatrixXd& angles, const Eigen::VectorXd& sigma0,
                        const Eigen::VectorXd& zeta0, const Eigen::VectorXd& measured,
                        double eta, const TvOptions& options);

}  // namespace eit

#endif  // EIT_TV_HPP
