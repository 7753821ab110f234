#include "eit/gaussian.hpp"

#include <cmath>

namespace eit {

Eigen::MatrixXd squared_exponential_covariance(const Eigen::MatrixXd& points, double std_dev,
                                               double length_scale, double jitter_rel) {
  if (!(std_dev > 0.0) || !(length_scale > 0.0) || !(jitter_rel >= 0.0))
    throw ParameterError("squared-exponential covariance needs positive scales");
  const int n = static_cast<int>(points.rows());
  const double var = std_dev * std_dev;
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    cov(i, i) = var * (1.0 + jitter_rel);
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (points.row(i) - points.row(j)).squaredNorm();
      const double v = var * std::exp(-d2 * inv);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

GaussianPosterior gaussian_posterior(const Eigen::MatrixXd& jacobian,
                                     const Eigen::MatrixXd& prior, double eta,
                                     const Eigen::VectorXd& data) {
  const int m = static_cast<int>(jacobian.rows());
  const int n = static_cast<int>(jacobian.cols());
  if (prior.rows() != n || prior.cols() != n)
    throw ParameterError("prior covariance must match the jacobian's parameter count");
  if (data.size() != m) throw ParameterError("data must match the jacobian's row count");
  if (!(eta > 0.0)) throw ParameterError("noise level must be positive");

  const Eigen::MatrixXd t = prior * jacobian.transpose();  // n x m
  Eigen::MatrixXd s = jacobian * t;
  s.diagonal().array() += eta * eta;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("measurement-space system is not positive definite");

  GaussianPosterior post;
  post.mean = t * llt.solve(data);
  post.covariance = prior - t * llt.solve(t.transpose());
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  return post;
}

}  // namespace eit
