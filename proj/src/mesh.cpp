#include "eit/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace eit {

namespace {

Eigen::Vector3d row_point(const Eigen::MatrixXd& nodes, int i) {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int d = 0; d < nodes.cols(); ++d) p[d] = nodes(i, d);
  return p;
}

double signed_measure(const SimplicialMesh& m, int k) {
  if (m.dim == 3) {
    const Eigen::Vector3d a = row_point(m.nodes, m.simplices(k, 0));
    const Eigen::Vector3d b = row_point(m.nodes, m.simplices(k, 1));
    const Eigen::Vector3d c = row_point(m.nodes, m.simplices(k, 2));
    const Eigen::Vector3d d = row_point(m.nodes, m.simplices(k, 3));
    return (b - a).cross(c - a).dot(d - a) / 6.0;
  }
  const Eigen::Vector2d a = m.nodes.row(m.simplices(k, 0)).head<2>();
  const Eigen::Vector2d b = m.nodes.row(m.simplices(k, 1)).head<2>();
  const Eigen::Vector2d c = m.nodes.row(m.simplices(k, 2)).head<2>();
  const Eigen::Vector2d u = b - a, v = c - a;
  return 0.5 * (u.x() * v.y() - u.y() * v.x());
}

// Faces of one simplex, each paired with the opposite vertex.
template <typename Fn>
void for_each_face(const SimplicialMesh& m, int k, Fn&& fn) {
  const int nv = m.dim + 1;
  for (int skip = 0; skip < nv; ++skip) {
    std::array<int, 3> face{-1, -1, -1};
    int idx = 0;
    for (int v = 0; v < nv; ++v)
      if (v != skip) face[idx++] = m.simplices(k, v);
    fn(face, m.simplices(k, skip));
  }
}

std::array<int, 3> sorted_key(std::array<int, 3> f) {
  std::sort(f.begin(), f.end());
  return f;
}

struct FaceInfo {
  int count = 0;
  int owner = -1;
  int opposite = -1;
};

std::map<std::array<int, 3>, FaceInfo> build_face_map(const SimplicialMesh& m) {
  std::map<std::array<int, 3>, FaceInfo> faces;
  for (int k = 0; k < m.n_simplices(); ++k) {
    for_each_face(m, k, [&](const std::array<int, 3>& f, int opp) {
      FaceInfo& info = faces[sorted_key(f)];
      ++info.count;
      info.owner = k;
      info.opposite = opp;
    });
  }
  return faces;
}

bool facet_points_outward(const SimplicialMesh& m, const int* facet, int opposite) {
  if (m.dim == 3) {
    const Eigen::Vector3d a = row_point(m.nodes, facet[0]);
    const Eigen::Vector3d b = row_point(m.nodes, facet[1]);
    const Eigen::Vector3d c = row_point(m.nodes, facet[2]);
    const Eigen::Vector3d o = row_point(m.nodes, opposite);
    return (b - a).cross(c - a).dot(a - o) > 0.0;
  }
  const Eigen::Vector2d a = m.nodes.row(facet[0]).head<2>();
  const Eigen::Vector2d b = m.nodes.row(facet[1]).head<2>();
  const Eigen::Vector2d o = m.nodes.row(opposite).head<2>();
  const Eigen::Vector2d edge = b - a;
  const Eigen::Vector2d normal(edge.y(), -edge.x());
  return normal.dot(a - o) > 0.0;
}

[[noreturn]] void invariant_failure(const std::string& what) {
  throw ValidationError("mesh invariant violated: " + what);
}

}  // namespace

double SimplicialMesh::simplex_measure(int k) const { return std::abs(signed_measure(*this, k)); }

double SimplicialMesh::facet_measure(int f) const {
  if (dim == 3) {
    const Eigen::Vector3d a = row_point(nodes, boundary(f, 0));
    const Eigen::Vector3d b = row_point(nodes, boundary(f, 1));
    const Eigen::Vector3d c = row_point(nodes, boundary(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
  }
  const Eigen::Vector2d a = nodes.row(boundary(f, 0)).head<2>();
  const Eigen::Vector2d b = nodes.row(boundary(f, 1)).head<2>();
  return (b - a).norm();
}

Eigen::Vector3d SimplicialMesh::simplex_centroid(int k) const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int v = 0; v <= dim; ++v) c += row_point(nodes, simplices(k, v));
  return c / (dim + 1);
}

void SimplicialMesh::finalize() {
  on_boundary.assign(n_nodes(), 0);
  for (int f = 0; f < n_boundary_facets(); ++f)
    for (int v = 0; v < dim; ++v) on_boundary[boundary(f, v)] = 1;
  interior_nodes.clear();
  for (int i = 0; i < n_nodes(); ++i)
    if (!on_boundary[i]) interior_nodes.push_back(i);
}

void SimplicialMesh::validate() const {
  if (dim != 2 && dim != 3) invariant_failure("dimension must be 2 or 3");
  if (nodes.cols() != dim) invariant_failure("node coordinate count must match dimension");
  if (simplices.cols() != dim + 1) invariant_failure("simplices must have dim+1 nodes");
  if (boundary.cols() != dim) invariant_failure("boundary facets must have dim nodes");
  if (!nodes.allFinite()) invariant_failure("node coordinates must be finite");
  if (region.size() != n_simplices()) invariant_failure("region labels must cover all simplices");

  const int nn = n_nodes();
  for (int k = 0; k < n_simplices(); ++k)
    for (int v = 0; v <= dim; ++v)
      if (simplices(k, v) < 0 || simplices(k, v) >= nn)
        invariant_failure("simplex node indices must be in range");
  for (int f = 0; f < n_boundary_facets(); ++f)
    for (int v = 0; v < dim; ++v)
      if (boundary(f, v) < 0 || boundary(f, v) >= nn)
        invariant_failure("boundary facet node indices must be in range");

  for (int k = 0; k < n_simplices(); ++k)
    if (!(signed_measure(*this, k) > 0.0))
      invariant_failure("simplices must be positively oriented (simplex " + std::to_string(k) + ")");

  for (int k = 0; k < n_simplices(); ++k)
    if (region[k] < kSkin || region[k] > kBrain)
      invariant_failure("region labels must be one of skin/skull/brain");

  // Watertightness: boundary facets are exactly the faces owned by a single
  // simplex, and each stored facet must be one of them.
  auto faces = build_face_map(*this);
  std::size_t once = 0;
  for (const auto& [key, info] : faces) {
    if (info.count > 2) invariant_failure("a face is shared by more than two simplices");
    if (info.count == 1) ++once;
  }
  if (once != static_cast<std::size_t>(n_boundary_facets()))
    invariant_failure("boundary facets must exactly tile the topological boundary");
  for (int f = 0; f < n_boundary_facets(); ++f) {
    std::array<int, 3> key{-1, -1, -1};
    for (int v = 0; v < dim; ++v) key[v] = boundary(f, v);
    auto it = faces.find(sorted_key(key));
    if (it == faces.end() || it->second.count != 1)
      invariant_failure("each boundary facet must be a face of exactly one simplex");
    int facet_nodes[3] = {boundary(f, 0), boundary(f, 1), dim == 3 ? boundary(f, 2) : -1};
    if (!facet_points_outward(*this, facet_nodes, it->second.opposite))
      invariant_failure("boundary facets must be outward-oriented");
  }

  std::vector<char> bnode(nn, 0);
  for (int f = 0; f < n_boundary_facets(); ++f)
    for (int v = 0; v < dim; ++v) bnode[boundary(f, v)] = 1;
  for (int k = 0; k < n_simplices(); ++k) {
    if (region[k] != kBrain) continue;
    for (int v = 0; v <= dim; ++v)
      if (bnode[simplices(k, v)])
        invariant_failure("brain simplices must not touch the boundary");
  }

  if (n_boundary_facets() == 0) invariant_failure("mesh must have a boundary");
}

SimplicialMesh build_layered_ball_mesh(double outer_radius, double r_in, double r_out,
                                       double target_edge_length, double flat_bottom_height) {
  if (!(outer_radius > 0.0))
    throw ParameterError("layered ball: outer_radius must be positive");
  if (!(r_in > 0.0 && r_in < r_out && r_out < outer_radius))
    throw ParameterError("layered ball: radii must satisfy 0 < r_in < r_out < outer_radius");
  if (!(target_edge_length > 0.0))
    throw ParameterError("layered ball: target_edge_length must be positive");
  if (!(flat_bottom_height >= 0.0 && flat_bottom_height < 0.5 * outer_radius))
    throw ParameterError(
        "layered ball: flat_bottom_height must lie in [0, outer_radius/2) to keep the "
        "bottom compression orientation-preserving");

  const double R = outer_radius;
  int n = static_cast<int>(std::ceil(2.0 * R / target_edge_length));
  n = std::max(n, 4);
  if (n % 2) ++n;  // even grid keeps the mesh mirror-symmetric about all axes

  const int side = n + 1;
  auto node_id = [side](int i, int j, int k) { return (i * side + j) * side + k; };

  SimplicialMesh mesh;
  mesh.dim = 3;
  mesh.nodes.resize(side * side * side, 3);

  // Cube grid mapped radially onto the ball: q = p * |p|_inf / |p|_2. Cube
  // surface nodes land exactly on the sphere; coordinates are exactly
  // antisymmetric under i <-> n-i.
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      for (int k = 0; k < side; ++k) {
        Eigen::Vector3d p(R * ((2.0 * i - n) / n), R * ((2.0 * j - n) / n),
                          R * ((2.0 * k - n) / n));
        const double linf = p.cwiseAbs().maxCoeff();
        Eigen::Vector3d q = Eigen::Vector3d::Zero();
        if (linf > 0.0) q = p * (linf / p.norm());
        mesh.nodes.row(node_id(i, j, k)) = q;
      }
    }
  }

  // Five tetrahedra per cell, corner set alternating with cell parity so that
  // face diagonals agree across neighbours and under reflection.
  mesh.simplices.resize(5 * n * n * n, 4);
  int t = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        int v[2][2][2];
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) v[a][b][c] = node_id(i + a, j + b, k + c);
        if ((i + j + k) % 2 == 0) {
          const int tets[5][4] = {{v[0][0][0], v[1][1][0], v[1][0][1], v[0][1][1]},
                                  {v[1][0][0], v[0][0][0], v[1][1][0], v[1][0][1]},
                                  {v[0][1][0], v[0][0][0], v[1][1][0], v[0][1][1]},
                                  {v[0][0][1], v[0][0][0], v[1][0][1], v[0][1][1]},
                                  {v[1][1][1], v[1][1][0], v[1][0][1], v[0][1][1]}};
          for (const auto& tet : tets) {
            for (int w = 0; w < 4; ++w) mesh.simplices(t, w) = tet[w];
            ++t;
          }
        } else {
          const int tets[5][4] = {{v[1][0][0], v[0][1][0], v[0][0][1], v[1][1][1]},
                                  {v[0][0][0], v[1][0][0], v[0][1][0], v[0][0][1]},
                                  {v[1][1][0], v[1][0][0], v[0][1][0], v[1][1][1]},
                                  {v[1][0][1], v[1][0][0], v[0][0][1], v[1][1][1]},
                                  {v[0][1][1], v[0][1][0], v[0][0][1], v[1][1][1]}};
          for (const auto& tet : tets) {
            for (int w = 0; w < 4; ++w) mesh.simplices(t, w) = tet[w];
            ++t;
          }
        }
      }
    }
  }

  // Region labels from the spherical centroid radius, assigned before the
  // bottom compression so the layers stay concentric in the compressed frame.
  mesh.region.resize(mesh.n_simplices());
  for (int s = 0; s < mesh.n_simplices(); ++s) {
    const double r = mesh.simplex_centroid(s).norm();
    mesh.region[s] = (r < r_in) ? kBrain : (r < r_out ? kSkull : kSkin);
  }

  if (flat_bottom_height > 0.0) {
    for (int i = 0; i < mesh.n_nodes(); ++i) {
      const double z = mesh.nodes(i, 2);
      if (z < 0.0) mesh.nodes(i, 2) = z + flat_bottom_height * (z / R) * (z / R);
    }
  }

  for (int s = 0; s < mesh.n_simplices(); ++s) {
    if (signed_measure(mesh, s) < 0.0) std::swap(mesh.simplices(s, 2), mesh.simplices(s, 3));
  }

  // Boundary = faces owned by exactly one tetrahedron, outward-oriented,
  // emitted in sorted-key order for reproducibility.
  auto faces = build_face_map(mesh);
  std::vector<std::array<int, 3>> facets;
  for (const auto& [key, info] : faces) {
    if (info.count != 1) continue;
    std::array<int, 3> f = key;
    int fv[3] = {f[0], f[1], f[2]};
    if (!facet_points_outward(mesh, fv, info.opposite)) std::swap(f[1], f[2]);
    facets.push_back(f);
  }
  mesh.boundary.resize(static_cast<int>(facets.size()), 3);
  for (std::size_t f = 0; f < facets.size(); ++f)
    for (int v = 0; v < 3; ++v) mesh.boundary(static_cast<int>(f), v) = facets[f][v];

  mesh.finalize();

  int counts[3] = {0, 0, 0};
  for (int s = 0; s < mesh.n_simplices(); ++s) ++counts[mesh.region[s]];
  if (!counts[kSkin] || !counts[kSkull] || !counts[kBrain])
    throw ParameterError(
        "layered ball: target_edge_length too coarse to resolve all three regions");
  for (int s = 0; s < mesh.n_simplices(); ++s) {
    if (mesh.region[s] != kBrain) continue;
    for (int v = 0; v < 4; ++v)
      if (mesh.on_boundary[mesh.simplices(s, v)])
        throw ParameterError(
            "layered ball: target_edge_length too coarse to keep the innermost layer away "
            "from the boundary");
  }

  mesh.validate();
  return mesh;
}

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  std::istringstream next(const char* expectation) {
    std::string line;
    if (!std::getline(in_, line))
      throw IoError(path_ + ":" + std::to_string(line_no_ + 1) +
                    ": unexpected end of file, expected " + expectation);
    ++line_no_;
    return std::istringstream(line);
  }

  [[noreturn]] void fail(const char* expectation) {
    throw IoError(path_ + ":" + std::to_string(line_no_) + ": expected " + expectation);
  }

 private:
  std::istream& in_;
  std::string path_;
  int line_no_ = 0;
};

int read_count(LineReader& reader, const char* keyword, const char* what) {
  auto line = reader.next(what);
  std::string label;
  long long count = -1;
  if (!(line >> label >> count) || label != keyword || count < 0) reader.fail(what);
  return static_cast<int>(count);
}

}  // namespace

SimplicialMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  LineReader reader(in, path);

  SimplicialMesh mesh;
  {
    auto line = reader.next("mesh header");
    std::string magic;
    int version = 0;
    if (!(line >> magic >> version) || version != 1 ||
        (magic != "eitmesh" && magic != "eitmesh2"))
      reader.fail("header 'eitmesh 1' or 'eitmesh2 1'");
    mesh.dim = (magic == "eitmesh") ? 3 : 2;
  }

  const int nn = read_count(reader, "nodes", "node count line 'nodes <N>'");
  mesh.nodes.resize(nn, mesh.dim);
  for (int i = 0; i < nn; ++i) {
    auto line = reader.next("node coordinates");
    for (int d = 0; d < mesh.dim; ++d)
      if (!(line >> mesh.nodes(i, d))) reader.fail("node coordinates");
  }

  const int ns = read_count(reader, "simplices", "simplex count line 'simplices <K>'");
  mesh.simplices.resize(ns, mesh.dim + 1);
  mesh.region.resize(ns);
  for (int k = 0; k < ns; ++k) {
    auto line = reader.next("simplex node indices and region");
    for (int v = 0; v <= mesh.dim; ++v)
      if (!(line >> mesh.simplices(k, v))) reader.fail("simplex node indices and region");
    if (!(line >> mesh.region[k])) reader.fail("simplex node indices and region");
  }

  const int nf = read_count(reader, "boundary", "facet count line 'boundary <F>'");
  mesh.boundary.resize(nf, mesh.dim);
  for (int f = 0; f < nf; ++f) {
    auto line = reader.next("boundary facet node indices");
    for (int v = 0; v < mesh.dim; ++v)
      if (!(line >> mesh.boundary(f, v))) reader.fail("boundary facet node indices");
  }

  mesh.finalize();
  mesh.validate();
  return mesh;
}

void save_mesh(const SimplicialMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file: " + path);
  out << (mesh.dim == 3 ? "eitmesh 1\n" : "eitmesh2 1\n");
  out << "nodes " << mesh.n_nodes() << "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    for (int d = 0; d < mesh.dim; ++d)
      out << (d ? " " : "") << format_double(mesh.nodes(i, d));
    out << "\n";
  }
  out << "simplices " << mesh.n_simplices() << "\n";
  for (int k = 0; k < mesh.n_simplices(); ++k) {
    for (int v = 0; v <= mesh.dim; ++v) out << mesh.simplices(k, v) << " ";
    out << mesh.region[k] << "\n";
  }
  out << "boundary " << mesh.n_boundary_facets() << "\n";
  for (int f = 0; f < mesh.n_boundary_facets(); ++f) {
    for (int v = 0; v < mesh.dim; ++v) out << (v ? " " : "") << mesh.boundary(f, v);
    out << "\n";
  }
  if (!out) throw IoError("failed while writing mesh file: " + path);
}

SphericalSurface::SphericalSurface(double radius) : radius_(radius) {
  if (!(radius > 0.0)) throw ParameterError("surface radius must be positive");
}

SurfaceFrame SphericalSurface::frame(double theta, double phi) const {
  if (!(theta > 0.0 && theta < 1.5707963267948966))
    throw ParameterError("surface frame: theta must lie in (0, pi/2)");
  const double st = std::sin(theta), ct = std::cos(theta);
  const double sp = std::sin(phi), cp = std::cos(phi);
  SurfaceFrame f;
  f.point = radius_ * Eigen::Vector3d(st * cp, st * sp, ct);
  f.normal = f.point / radius_;
  f.t_theta = radius_ * Eigen::Vector3d(ct * cp, ct * sp, -st);
  f.t_phi = radius_ * Eigen::Vector3d(-st * sp, st * cp, 0.0);
  return f;
}

SphericalSurface SphericalSurface::fit(const SimplicialMesh& mesh) {
  if (mesh.dim != 3) throw ParameterError("spherical surface requires a 3-D mesh");
  double r = 0.0;
  for (int i = 0; i < mesh.n_nodes(); ++i) r = std::max(r, mesh.nodes.row(i).norm());
  return SphericalSurface(r);
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Closest-point distance to a triangle via Voronoi-region classification.
double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.norm();

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.norm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.norm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

}  // namespace

Eigen::VectorXd boundary_distance(const SimplicialMesh& mesh) {
  if (mesh.n_boundary_facets() == 0) throw ParameterError("boundary distance needs a boundary");
  Eigen::VectorXd dist(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    if (mesh.dim == 3) {
      const Eigen::Vector3d p = row_point(mesh.nodes, i);
      for (int f = 0; f < mesh.n_boundary_facets(); ++f) {
        best = std::min(best, point_triangle_distance(p, row_point(mesh.nodes, mesh.boundary(f, 0)),
                                                      row_point(mesh.nodes, mesh.boundary(f, 1)),
                                                      row_point(mesh.nodes, mesh.boundary(f, 2))));
      }
    } else {
      const Eigen::Vector2d p = mesh.nodes.row(i).head<2>();
      for (int f = 0; f < mesh.n_boundary_facets(); ++f) {
        best = std::min(best,
                        point_segment_distance(p, mesh.nodes.row(mesh.boundary(f, 0)).head<2>(),
                                               mesh.nodes.row(mesh.boundary(f, 1)).head<2>()));
      }
    }
    dist[i] = best;
  }
  return dist;
}

Eigen::SparseMatrix<double> mass_matrix(const SimplicialMesh& mesh,
                                        const std::function<bool(int)>& roi) {
  std::vector<char> keep(mesh.n_nodes(), 0);
  int selected = 0;
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    keep[i] = roi(i) ? 1 : 0;
    selected += keep[i];
  }
  if (!selected) throw ParameterError("mass matrix: region of interest selects no nodes");

  const double diag = (mesh.dim == 3) ? 1.0 / 10.0 : 1.0 / 6.0;
  const double off = (mesh.dim == 3) ? 1.0 / 20.0 : 1.0 / 12.0;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.n_simplices()) * (mesh.dim + 1) * (mesh.dim + 1));
  for (int k = 0; k < mesh.n_simplices(); ++k) {
    const double vol = mesh.simplex_measure(k);
    for (int a = 0; a <= mesh.dim; ++a) {
      const int i = mesh.simplices(k, a);
      if (!keep[i]) continue;
      for (int b = 0; b <= mesh.dim; ++b) {
        const int j = mesh.simplices(k, b);
        if (!keep[j]) continue;
        trips.emplace_back(i, j, vol * (a == b ? diag : off));
      }
    }
  }
  Eigen::SparseMatrix<double> m(mesh.n_nodes(), mesh.n_nodes());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Eigen::SparseMatrix<double> mass_matrix(const SimplicialMesh& mesh) {
  return mass_matrix(mesh, [](int) { return true; });
}

ElementGeometry element_geometry(const SimplicialMesh& mesh) {
  if (mesh.dim != 3) throw ParameterError("element geometry requires a 3-D mesh");
  ElementGeometry geo;
  geo.grad.resize(mesh.n_simplices(), 12);
  geo.volume.resize(mesh.n_simplices());
  for (int k = 0; k < mesh.n_simplices(); ++k) {
    const Eigen::Vector3d a = row_point(mesh.nodes, mesh.simplices(k, 0));
    Eigen::Matrix3d edges;
    for (int v = 0; v < 3; ++v)
      edges.col(v) = row_point(mesh.nodes, mesh.simplices(k, v + 1)) - a;
    const double det = edges.determinant();
    if (!(std::abs(det) > 0.0))
      throw NumericalError("degenerate simplex " + std::to_string(k));
    // Rows of edges^{-1} are the gradients of the barycentric coordinates of
    // vertices 1..3; vertex 0 carries the negated sum.
    const Eigen::Matrix3d inv = edges.inverse();
    Eigen::Vector3d g0 = Eigen::Vector3d::Zero();
    for (int v = 0; v < 3; ++v) {
      const Eigen::Vector3d gv = inv.row(v);
      geo.grad.block<1, 3>(k, 3 * (v + 1)) = gv.transpose();
      g0 -= gv;
    }
    geo.grad.block<1, 3>(k, 0) = g0.transpose();
    geo.volume[k] = det / 6.0;
  }
  return geo;
}

}  // namespace eit
