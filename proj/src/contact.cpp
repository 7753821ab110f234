#include "eit/contact.hpp"

#include <array>
#include <cmath>

namespace eit {

ContactProfile::ContactProfile(double radius_, double tau_) : radius(radius_), tau(tau_) {
  if (!(radius > 0.0)) throw ParameterError("contact profile: radius must be positive");
  if (!(tau >= 0.0)) throw ParameterError("contact profile: tau must be non-negative");
}

double ContactProfile::value(double r) const {
  if (!(r < radius)) return 0.0;
  const double r2 = radius * radius;
  return std::exp(tau - tau * r2 / (r2 - r * r));
}

double ContactProfile::slope_over_r(double r) const {
  if (!(r < radius)) return 0.0;
  const double r2 = radius * radius;
  const double gap = r2 - r * r;
  return -2.0 * tau * r2 * value(r) / (gap * gap);
}

namespace {

struct TriRulePoint {
  double b0, b1, b2, w;
};

// Seven-point degree-5 rule on the reference triangle (weights sum to one).
std::array<TriRulePoint, 7> triangle_rule() {
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 + s15) / 21.0, w1 = (155.0 + s15) / 1200.0;
  const double a2 = (6.0 - s15) / 21.0, w2 = (155.0 - s15) / 1200.0;
  const double b1 = 1.0 - 2.0 * a1, b2 = 1.0 - 2.0 * a2;
  return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0},
           {b1, a1, a1, w1},
           {a1, b1, a1, w1},
           {a1, a1, b1, w1},
           {b2, a2, a2, w2},
           {a2, b2, a2, w2},
           {a2, a2, b2, w2}}};
}

}  // namespace

std::vector<ElectrodePatch> build_electrode_patches(const SimplicialMesh& mesh,
                                                    const SphericalSurface& surface,
                                                    const ContactProfile& profile,
                                                    const Eigen::MatrixXd& angles) {
  if (mesh.dim != 3) throw ParameterError("electrode patches require a 3-D mesh");
  if (angles.cols() != 2 || angles.rows() < 1)
    throw ParameterError("electrode angles must be an M x 2 (theta, phi) array");

  const auto rule = triangle_rule();
  const int n_electrodes = static_cast<int>(angles.rows());
  const double surface_radius = surface.radius();

  std::vector<ElectrodePatch> patches(n_electrodes);
  for (int m = 0; m < n_electrodes; ++m) {
    const SurfaceFrame frame = surface.frame(angles(m, 0), angles(m, 1));
    ElectrodePatch& patch = patches[m];

    for (int f = 0; f < mesh.n_boundary_facets(); ++f) {
      Eigen::Vector3d corner[3];
      for (int v = 0; v < 3; ++v) corner[v] = mesh.nodes.row(mesh.boundary(f, v));
      const double area = mesh.facet_measure(f);

      for (const TriRulePoint& rp : rule) {
        const Eigen::Vector3d x = rp.b0 * corner[0] + rp.b1 * corner[1] + rp.b2 * corner[2];
        // Only the patch around the electrode itself: the cylinder distance
        // below would otherwise also pick up the antipodal surface patch.
        if (x.dot(frame.normal) <= 0.0) continue;

        const Eigen::Vector3d p = x - frame.point;
        const double s = p.dot(frame.normal);
        const double r2 = std::max(p.squaredNorm() - s * s, 0.0);
        const double r = std::sqrt(r2);
        const double zhat = profile.value(r);
        if (zhat == 0.0) continue;

        const double q = profile.slope_over_r(r);
        const double shift = 1.0 + s / surface_radius;
        ContactSample sample;
        sample.facet = f;
        sample.bary = Eigen::Vector3d(rp.b0, rp.b1, rp.b2);
        sample.weight = rp.w * area;
        sample.zhat = zhat;
        // d zhat / d angle = q * d(r^2)/d angle / 2 with the electrode frame
        // moving rigidly along its tangent directions.
        sample.dzhat[0] = q * -(p.dot(frame.t_theta)) * shift;
        sample.dzhat[1] = q * -(p.dot(frame.t_phi)) * shift;
        patch.samples.push_back(sample);
      }
    }

    const int n = mesh.n_nodes();
    patch.phi = Eigen::VectorXd::Zero(n);
    patch.dphi[0] = Eigen::VectorXd::Zero(n);
    patch.dphi[1] = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> trips, dtrips[2];
    for (const ContactSample& sample : patch.samples) {
      int node[3];
      for (int v = 0; v < 3; ++v) node[v] = mesh.boundary(sample.facet, v);
      patch.area += sample.weight * sample.zhat;
      for (int d = 0; d < 2; ++d) patch.darea[d] += sample.weight * sample.dzhat[d];
      for (int a = 0; a < 3; ++a) {
        const double wa = sample.weight * sample.bary[a];
        patch.phi[node[a]] += wa * sample.zhat;
        for (int d = 0; d < 2; ++d) patch.dphi[d][node[a]] += wa * sample.dzhat[d];
        for (int b = 0; b < 3; ++b) {
          // Grouped so the (a,b) and (b,a) entries round identically and the
          // assembled matrix is bitwise symmetric.
          const double wab = sample.weight * (sample.bary[a] * sample.bary[b]);
          trips.emplace_back(node[a], node[b], wab * sample.zhat);
          for (int d = 0; d < 2; ++d)
            dtrips[d].emplace_back(node[a], node[b], wab * sample.dzhat[d]);
        }
      }
    }
    patch.phi_phi.resize(n, n);
    patch.phi_phi.setFromTriplets(trips.begin(), trips.end());
    for (int d = 0; d < 2; ++d) {
      patch.dphi_phi[d].resize(n, n);
      patch.dphi_phi[d].setFromTriplets(dtrips[d].begin(), dtrips[d].end());
    }

    if (!(patch.area > 0.0))
      throw ParameterError("electrode " + std::to_string(m) +
                           " captures no boundary quadrature weight; refine the mesh or "
                           "enlarge the electrode radius");
  }
  return patches;
}

}  // namespace eit
