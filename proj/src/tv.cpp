#include "eit/tv.hpp"

#include <cmath>

#include "eit/forward.hpp"

namespace eit {

Eigen::VectorXd variation_weights(const SimplicialMesh& mesh, double steepness, double offset) {
  if (!(steepness > 0.0)) throw ParameterError("variation weights: steepness must be positive");
  const Eigen::VectorXd dist = boundary_distance(mesh);
  Eigen::VectorXd w(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i)
    w[i] = 1.0 / (0.5 * (1.0 + std::tanh(steepness * (dist[i] - offset))));
  return w;
}

TotalVariation::TotalVariation(const SimplicialMesh& mesh, const ElementGeometry& geo,
                               Eigen::VectorXd nodal_weights, double smoothing)
    : mesh_(mesh), geo_(geo), weights_(std::move(nodal_weights)), smoothing_(smoothing) {
  if (weights_.size() != mesh.n_nodes())
    throw ParameterError("total variation: weights must be nodal");
  if (!(smoothing_ > 0.0)) throw ParameterError("total variation: smoothing must be positive");
  if (mesh_.on_boundary.empty())
    throw ParameterError("total variation: mesh must be finalized");

  interior_index_.assign(mesh_.n_nodes(), -1);
  for (int i = 0; i < mesh_.n_nodes(); ++i) {
    if (mesh_.on_boundary[i]) continue;
    interior_index_[i] = static_cast<int>(interior_.size());
    interior_.push_back(i);
  }
  if (interior_.empty())
    throw ParameterError("total variation: mesh has no interior nodes to reconstruct on");

  element_weight_.resize(mesh_.n_simplices());
  for (int k = 0; k < mesh_.n_simplices(); ++k) {
    double acc = 0.0;
    for (int v = 0; v < 4; ++v) acc += weights_[mesh_.simplices(k, v)];
    element_weight_[k] = 0.25 * acc;
  }
}

Eigen::VectorXd TotalVariation::to_full(const Eigen::VectorXd& interior_values) const {
  if (interior_values.size() != n_interior())
    throw ParameterError("total variation: interior vector has the wrong size");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(mesh_.n_nodes());
  for (int i = 0; i < n_interior(); ++i) full[interior_[i]] = interior_values[i];
  return full;
}

Eigen::VectorXd TotalVariation::to_interior(const Eigen::VectorXd& full_values) const {
  if (full_values.size() != mesh_.n_nodes())
    throw ParameterError("total variation: nodal vector has the wrong size");
  Eigen::VectorXd interior(n_interior());
  for (int i = 0; i < n_interior(); ++i) interior[i] = full_values[interior_[i]];
  return interior;
}

double TotalVariation::value(const Eigen::VectorXd& kappa_interior) const {
  const Eigen::VectorXd full = to_full(kappa_interior);
  double acc = 0.0;
  for (int k = 0; k < mesh_.n_simplices(); ++k) {
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (int v = 0; v < 4; ++v)
      grad += full[mesh_.simplices(k, v)] * geo_.grad.block<1, 3>(k, 3 * v).transpose();
    acc += geo_.volume[k] * element_weight_[k] *
           std::sqrt(grad.squaredNorm() + smoothing_ * smoothing_);
  }
  return acc;
}

Eigen::SparseMatrix<double> TotalVariation::matrix(const Eigen::VectorXd& kappa_interior) const {
  const Eigen::VectorXd full = to_full(kappa_interior);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh_.n_simplices()) * 16);
  for (int k = 0; k < mesh_.n_simplices(); ++k) {
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (int v = 0; v < 4; ++v)
      grad += full[mesh_.simplices(k, v)] * geo_.grad.block<1, 3>(k, 3 * v).transpose();
    const double scale = geo_.volume[k] * element_weight_[k] /
                         std::sqrt(grad.squaredNorm() + smoothing_ * smoothing_);
    for (int a = 0; a < 4; ++a) {
      const int ia = interior_index_[mesh_.simplices(k, a)];
      if (ia < 0) continue;
      const Eigen::Vector3d ga = geo_.grad.block<1, 3>(k, 3 * a).transpose();
      for (int b = 0; b < 4; ++b) {
        const int ib = interior_index_[mesh_.simplices(k, b)];
        if (ib < 0) continue;
        const Eigen::Vector3d gb = geo_.grad.block<1, 3>(k, 3 * b).transpose();
        trips.emplace_back(ia, ib, scale * ga.dot(gb));
      }
    }
  }
  Eigen::SparseMatrix<double> theta(n_interior(), n_interior());
  theta.setFromTriplets(trips.begin(), trips.end());
  return theta;
}

namespace {

struct DiffusivitySolve {
  Eigen::VectorXd kappa;
  Eigen::MatrixXd x;                    // Theta^{-1} A^T
  Eigen::LLT<Eigen::MatrixXd> inner;    // gamma I + A X
};

DiffusivitySolve solve_diffusivity(const TotalVariation& tv, const Eigen::MatrixXd& a,
                                   const Eigen::VectorXd& b, double gamma,
                                   const Eigen::VectorXd& kappa_prev) {
  if (a.cols() != tv.n_interior())
    throw ParameterError("diffusivity step: matrix columns must cover the interior nodes");
  if (b.size() != a.rows()) throw ParameterError("diffusivity step: data size mismatch");
  if (!(gamma > 0.0)) throw ParameterError("diffusivity step: gamma must be positive");

  const Eigen::SparseMatrix<double> theta = tv.matrix(kappa_prev);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(theta);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("diffusivity matrix factorisation failed");

  DiffusivitySolve out;
  out.x = ldlt.solve(a.transpose());
  Eigen::MatrixXd small = a * out.x;
  small.diagonal().array() += gamma;
  out.inner.compute(small);
  if (out.inner.info() != Eigen::Success)
    throw NumericalError("diffusivity inner system is not positive definite");
  out.kappa = out.x * out.inner.solve(b);
  return out;
}

}  // namespace

TvStepResult lagged_diffusivity_step(const TotalVariation& tv, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b, double gamma,
                                     const Eigen::VectorXd& kappa_prev) {
  const DiffusivitySolve solve = solve_diffusivity(tv, a, b, gamma, kappa_prev);
  TvStepResult out;
  out.kappa = solve.kappa;
  out.tikhonov = 0.5 * (a * out.kappa - b).squaredNorm() + gamma * tv.value(out.kappa);
  return out;
}

Eigen::MatrixXd tv_posterior_covariance(const TotalVariation& tv, const Eigen::MatrixXd& a,
                                        double gamma, const Eigen::VectorXd& kappa) {
  if (a.cols() != tv.n_interior())
    throw ParameterError("posterior covariance: matrix columns must cover the interior nodes");
  if (!(gamma > 0.0)) throw ParameterError("posterior covariance: gamma must be positive");

  const Eigen::SparseMatrix<double> theta = tv.matrix(kappa);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(theta);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("diffusivity matrix factorisation failed");

  const int n = tv.n_interior();
  const Eigen::MatrixXd theta_inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd x = ldlt.solve(a.transpose());
  Eigen::MatrixXd small = a * x;
  small.diagonal().array() += gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(small);
  if (llt.info() != Eigen::Success)
    throw NumericalError("diffusivity inner system is not positive definite");

  Eigen::MatrixXd cov = (theta_inv - x * llt.solve(x.transpose())) / gamma;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

Eigen::VectorXd clamp_perturbation(const Eigen::VectorXd& sigma0,
                                   const Eigen::VectorXd& kappa_full, double floor_fraction,
                                   double limit_fraction) {
  if (sigma0.size() != kappa_full.size())
    throw ParameterError("clamp: background and perturbation sizes differ");
  const double floor = floor_fraction * sigma0.minCoeff();
  Eigen::VectorXd out = kappa_full;
  int clamped = 0;
  for (int i = 0; i < out.size(); ++i) {
    if (sigma0[i] + out[i] < floor) {
      out[i] = floor - sigma0[i];
      ++clamped;
    }
  }
  if (clamped > limit_fraction * out.size())
    throw NumericalError("conductivity update clamped on " + std::to_string(clamped) +
                         " nodes; the linearised step left the trust region");
  return out;
}

TvResult tv_reconstruct(const SimplicialMesh& mesh, const ElementGeometry& geo,
                        const SphericalSurface& surface, const ContactProfile& profile,
                        const Eigen::MatrixXd& angles, const Eigen::VectorXd& sigma0,
                        const Eigen::VectorXd& zeta0, const Eigen::VectorXd& measured,
                        double eta, const TvOptions& options) {
  if (!(eta > 0.0)) throw ParameterError("reconstruction requires a positive noise level");
  if (options.linearizations < 1 || options.inner_steps < 1)
    throw ParameterError("reconstruction needs at least one linearization and inner step");

  const auto patches = build_electrode_patches(mesh, surface, profile, angles);
  const int m_total = static_cast<int>(patches.size()) * (static_cast<int>(patches.size()) - 1);
  if (measured.size() != m_total)
    throw ParameterError("measurement vector does not match the electrode count");

  const TotalVariation tv(mesh, geo,
                          variation_weights(mesh, options.weight_steepness, options.weight_offset),
                          options.smoothing);

  TvResult result;
  result.interior_nodes = tv.interior_nodes();
  result.xi = Eigen::VectorXd::Zero(zeta0.size());
  Eigen::VectorXd kappa = Eigen::VectorXd::Zero(tv.n_interior());

  const double zeta_floor = 1e-3 * zeta0.minCoeff();
  Eigen::MatrixXd a;           // kept for the covariance of the last linearization
  Eigen::VectorXd kappa_full;  // nodal representation of the running estimate

  for (int lin = 1; lin <= options.linearizations; ++lin) {
    kappa_full = clamp_perturbation(sigma0, tv.to_full(kappa), options.floor_fraction,
                                    options.clamp_limit_fraction);
    kappa = tv.to_interior(kappa_full);
    const Eigen::VectorXd sigma_k = sigma0 + kappa_full;
    const Eigen::VectorXd zeta_k =
        options.contacts_known ? zeta0 : (zeta0 + result.xi).cwiseMax(zeta_floor);

    const ForwardSolver solver(mesh, geo, patches, sigma_k, zeta_k);
    const SensitivityBundle bundle(solver);

    // Whitened linear model around the current point; the running estimate
    // is folded into the data so kappa/xi remain absolute perturbations.
    const Eigen::MatrixXd b_sigma = bundle.sigma_jacobian()(Eigen::all, tv.interior_nodes()) / eta;
    Eigen::VectorXd y_w =
        (measured - bundle.measurements()) / eta + b_sigma * kappa;

    Eigen::MatrixXd a_lin;
    Eigen::MatrixXd b_zeta;                       // whitened contact jacobian
    Eigen::LLT<Eigen::MatrixXd> gram;             // of b_zeta^T b_zeta
    if (options.contacts_known) {
      a_lin = b_sigma;
    } else {
      b_zeta = bundle.zeta_jacobian() / eta;
      y_w += b_zeta * result.xi;
      gram.compute(b_zeta.transpose() * b_zeta);
      if (gram.info() != Eigen::Success)
        throw NumericalError("contact-level directions are numerically dependent");
      // Project the contact directions out; they are re-fit afterwards.
      a_lin = b_sigma - b_zeta * gram.solve(b_zeta.transpose() * b_sigma);
    }
    const Eigen::VectorXd b_lin =
        options.contacts_known
            ? y_w
            : (y_w - b_zeta * gram.solve(b_zeta.transpose() * y_w)).eval();

    for (int inner = 1; inner <= options.inner_steps; ++inner) {
      const TvStepResult step = lagged_diffusivity_step(tv, a_lin, b_lin, options.gamma, kappa);
      kappa = step.kappa;
      result.trace.push_back({lin, inner, step.tikhonov});
    }

    if (!options.contacts_known)
      result.xi = gram.solve(b_zeta.transpose() * (y_w - b_sigma * kappa));
    a = a_lin;
  }

  result.kappa_full = clamp_perturbation(sigma0, tv.to_full(kappa), options.floor_fraction,
                                         options.clamp_limit_fraction);
  if (options.want_covariance)
    result.covariance = tv_posterior_covariance(tv, a, options.gamma,
                                                tv.to_interior(result.kappa_full));
  return result;
}

}  // namespace eit
