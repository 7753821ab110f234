#ifndef EIT_MESH_HPP
#define EIT_MESH_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

#include "eit/common.hpp"

namespace eit {

// Conductivity region labels, ordered from the outermost layer inward.
enum Region : int { kSkin = 0, kSkull = 1, kBrain = 2 };

// Piecewise-linear simplicial mesh (tetrahedra in 3-D, triangles in 2-D) with
// per-simplex region labels and an explicit outward-oriented boundary list.
struct SimplicialMesh {
  int dim = 3;
  Eigen::MatrixXd nodes;      // n_nodes x dim
  Eigen::MatrixXi simplices;  // n_simplices x (dim+1)
  Eigen::VectorXi region;     // n_simplices
  Eigen::MatrixXi boundary;   // n_boundary_facets x dim

  // Derived by finalize().
  std::vector<char> on_boundary;
  std::vector<int> interior_nodes;

  int n_nodes() const { return static_cast<int>(nodes.rows()); }
  int n_simplices() const { return static_cast<int>(simplices.rows()); }
  int n_boundary_facets() const { return static_cast<int>(boundary.rows()); }

  double simplex_measure(int k) const;
  double facet_measure(int f) const;
  Eigen::Vector3d simplex_centroid(int k) const;

  void finalize();
  // Throws ValidationError naming the first violated structural invariant.
  void validate() const;
};

// Three-layer head phantom: a ball of the given outer radius with concentric
// brain (r < r_in) and skull (r_in <= r < r_out) layers, meshed by splitting a
// cube grid into tetrahedra and mapping it radially onto the ball. The grid
// resolution is ceil(2*outer_radius / target_edge_length), rounded up to an
// even count so the mesh is mirror-symmetric about every coordinate plane.
// flat_bottom_height > 0 compresses the lower hemisphere, raising the south
// pole by that amount while keeping the equator and upper hemisphere fixed.
SimplicialMesh build_layered_ball_mesh(double outer_radius, double r_in, double r_out,
                                       double target_edge_length,
                                       double flat_bottom_height = 0.0);

SimplicialMesh load_mesh(const std::string& path);
void save_mesh(const SimplicialMesh& mesh, const std::string& path);

// Point and orthogonal frame on the electrode-carrying surface at spherical
// angles (theta from the +z pole, phi around the axis).
struct SurfaceFrame {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;   // unit outward
  Eigen::Vector3d t_theta;  // d point / d theta
  Eigen::Vector3d t_phi;    // d point / d phi
};

class SphericalSurface {
 public:
  explicit SphericalSurface(double radius);
  double radius() const { return radius_; }
  // Valid placements keep electrodes strictly on the upper open hemisphere.
  SurfaceFrame frame(double theta, double phi) const;
  static SphericalSurface fit(const SimplicialMesh& mesh);

 private:
  double radius_;
};

// Exact distance from every node to the nearest boundary facet.
Eigen::VectorXd boundary_distance(const SimplicialMesh& mesh);

// P1 mass matrix restricted to nodes selected by the predicate: rows/columns
// of unselected nodes are zero. Full-size sparse matrix either way.
Eigen::SparseMatrix<double> mass_matrix(const SimplicialMesh& mesh,
                                        const std::function<bool(int)>& roi);
Eigen::SparseMatrix<double> mass_matrix(const SimplicialMesh& mesh);

// Precomputed P1 data for 3-D meshes: constant basis-function gradients
// (local vertex v occupies columns 3v..3v+2) and element volumes.
struct ElementGeometry {
  Eigen::MatrixXd grad;    // n_simplices x 12
  Eigen::VectorXd volume;  // n_simplices
};
ElementGeometry element_geometry(const SimplicialMesh& mesh);

}  // namespace eit

#endif  // EIT_MESH_HPP
