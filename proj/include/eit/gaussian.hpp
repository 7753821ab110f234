#ifndef EIT_GAUSSIAN_HPP
#define EIT_GAUSSIAN_HPP

#include <Eigen/Dense>

#include "eit/common.hpp"

namespace eit {

// Squared-exponential covariance over a point cloud (rows are points), with
// a small relative jitter on the diagonal to keep factorisations stable.
Eigen::MatrixXd squared_exponential_covariance(const Eigen::MatrixXd& points, double std_dev,
                                               double length_scale, double jitter_rel = 1e-10);

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Linear-Gaussian update for y = J kappa + noise with kappa ~ N(0, prior)
// and iid N(0, eta^2) noise, computed in measurement space so only an
// m x m system is factorised: S = J P J^T + eta^2 I, mean = P J^T S^{-1} y,
// cov = P - P J^T S^{-1} J P.
GaussianPosterior gaussian_posterior(const Eigen::MatrixXd& jacobian,
                                     const Eigen::MatrixXd& prior, double eta,
                                     const Eigen::VectorXd& data);

}  // namespace eit

#endif  // EIT_GAUSSIAN_HPP
