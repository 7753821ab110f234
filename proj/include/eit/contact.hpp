#ifndef EIT_CONTACT_HPP
#define EIT_CONTACT_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "eit/mesh.hpp"

namespace eit {

// Radial contact-strength profile of a circular electrode: equal to one at
// the centre, exactly zero outside the electrode radius, and infinitely
// smooth at the rim. tau controls how sharply the profile falls off.
struct ContactProfile {
  double radius;
  double tau;

  ContactProfile(double radius_, double tau_);

  double value(double r) const;
  // d(value)/dr divided by r; smooth through r = 0, which avoids the 1/r
  // factor when differentiating value(r(x)) by the chain rule via r^2.
  double slope_over_r(double r) const;
};

// One boundary-quadrature sample lying inside an electrode's support.
struct ContactSample {
  int facet;             // boundary facet index
  Eigen::Vector3d bary;  // barycentric weights of the facet's three nodes
  double weight;         // quadrature weight times facet area
  double zhat;           // profile value at the sample point
  double dzhat[2];       // profile change per unit theta / phi electrode motion
};

// Quadrature decomposition of one electrode patch plus the assembled
// boundary integrals every solver stage needs. Blocks are unscaled by the
// per-electrode contact level, which multiplies linearly on top.
struct ElectrodePatch {
  std::vector<ContactSample> samples;
  Eigen::SparseMatrix<double> phi_phi;  // ∫ zhat φ_i φ_j over the boundary
  Eigen::VectorXd phi;                  // ∫ zhat φ_i
  double area = 0.0;                    // ∫ zhat
  Eigen::SparseMatrix<double> dphi_phi[2];  // same integrals with d zhat / d angle
  Eigen::VectorXd dphi[2];
  double darea[2] = {0.0, 0.0};
};

// Builds every electrode's patch on the mesh boundary. angles is M x 2 with
// columns (theta, phi). Throws ParameterError if an electrode's support
// captures no boundary quadrature weight (mesh too coarse for the radius) or
// if a placement leaves the allowed surface region.
std::vector<ElectrodePatch> build_electrode_patches(const SimplicialMesh& mesh,
                                                    const SphericalSurface& surface,
                                                    const ContactProfile& profile,
                                                    const Eigen::MatrixXd& angles);

}  // namespace eit

#endif  // EIT_CONTACT_HPP
