#include <doctest.h>

#include <cmath>

#include "eit/common.hpp"
#include "eit/gaussian.hpp"

using namespace eit;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  NormalSampler rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.next();
  return m;
}

Eigen::MatrixXd random_spd(int n, std::uint64_t seed) {
  const Eigen::MatrixXd a = random_matrix(n, n, seed);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("squared-exponential covariance matches its closed form") {
  Eigen::MatrixXd pts(3, 3);
  pts << 0, 0, 0, 0.05, 0, 0, 0, 0.12, 0;
  const double sd = 0.2, ell = 0.05;
  const Eigen::MatrixXd cov = squared_exponential_covariance(pts, sd, ell);

  CHECK(cov(0, 0) == doctest::Approx(sd * sd * (1 + 1e-10)).epsilon(1e-14));
  CHECK(cov(0, 1) ==
        doctest::Approx(sd * sd * std::exp(-0.05 * 0.05 / (2 * ell * ell))).epsilon(1e-14));
  CHECK(cov(0, 2) ==
        doctest::Approx(sd * sd * std::exp(-0.12 * 0.12 / (2 * ell * ell))).epsilon(1e-14));
  CHECK((cov - cov.transpose()).norm() == 0.0);

  // Jitter keeps a denser cloud factorable.
  const Eigen::MatrixXd close = 1e-4 * random_matrix(40, 3, 3);
  const Eigen::MatrixXd c2 = squared_exponential_covariance(close, sd, ell);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(c2).info() == Eigen::Success);

  CHECK_THROWS_AS(squared_exponential_covariance(pts, 0.0, ell), ParameterError);
  CHECK_THROWS_AS(squared_exponential_covariance(pts, sd, -1.0), ParameterError);
}

TEST_CASE("measurement-space posterior equals the information-form oracle") {
  // Independent route: cov = (J^T J / eta^2 + P^{-1})^{-1}, mean = cov J^T y / eta^2.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int m = 12, n = 50;
    const Eigen::MatrixXd j = random_matrix(m, n, 100 + seed);
    const Eigen::MatrixXd prior = random_spd(n, 200 + seed);
    const Eigen::VectorXd y = random_matrix(m, 1, 300 + seed);
    const double eta = 0.3;

    const auto post = gaussian_posterior(j, prior, eta, y);

    const Eigen::MatrixXd info =
        j.transpose() * j / (eta * eta) + prior.llt().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd cov_oracle = info.llt().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::VectorXd mean_oracle = cov_oracle * j.transpose() * y / (eta * eta);

    CHECK((post.covariance - cov_oracle).norm() <= 1e-8 * cov_oracle.norm());
    CHECK((post.mean - mean_oracle).norm() <= 1e-8 * (mean_oracle.norm() + 1.0));
  }
}

TEST_CASE("posterior covariance never exceeds the prior") {
  const Eigen::MatrixXd j = random_matrix(8, 30, 7);
  const Eigen::MatrixXd prior = random_spd(30, 8);
  const Eigen::VectorXd y = random_matrix(8, 1, 9);
  const auto post = gaussian_posterior(j, prior, 0.5, y);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prior - post.covariance);
  CHECK(es.eigenvalues().minCoeff() > -1e-10 * prior.norm());
  CHECK((post.covariance - post.covariance.transpose()).norm() == 0.0);
}

TEST_CASE("noise limits push the posterior to the expected extremes") {
  const int n = 20;
  const Eigen::MatrixXd j = random_matrix(n, n, 21) + 5.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd prior = random_spd(n, 22);
  const Eigen::VectorXd y = random_matrix(n, 1, 23);

  // Nearly noiseless and square: the mean solves the data equation.
  const auto sharp = gaussian_posterior(j, prior, 1e-7, y);
  CHECK((j * sharp.mean - y).norm() <= 1e-6 * y.norm());

  // Overwhelming noise: the prior is returned and the mean collapses.
  const auto vague = gaussian_posterior(j, prior, 1e9, y);
  CHECK((vague.covariance - prior).norm() <= 1e-10 * prior.norm());
  CHECK(vague.mean.norm() <= 1e-10);
}

TEST_CASE("posterior mean is linear in the data and zero without data") {
  const Eigen::MatrixXd j = random_matrix(6, 15, 31);
  const Eigen::MatrixXd prior = random_spd(15, 32);
  const Eigen::VectorXd y = random_matrix(6, 1, 33);

  const auto zero = gaussian_posterior(j, prior, 0.4, Eigen::VectorXd::Zero(6));
  CHECK(zero.mean.norm() == 0.0);
  const auto one = gaussian_posterior(j, prior, 0.4, y);
  const auto two = gaussian_posterior(j, prior, 0.4, (2.0 * y).eval());
  CHECK((two.mean - 2.0 * one.mean).norm() <= 1e-12 * one.mean.norm());
  CHECK((two.covariance - one.covariance).norm() == 0.0);
}

TEST_CASE("posterior rejects malformed inputs") {
  const Eigen::MatrixXd j = random_matrix(6, 15, 41);
  const Eigen::MatrixXd prior = random_spd(15, 42);
  const Eigen::VectorXd y = random_matrix(6, 1, 43);

  CHECK_THROWS_AS(gaussian_posterior(j, random_spd(14, 44), 0.4, y), ParameterError);
  CHECK_THROWS_AS(gaussian_posterior(j, prior, 0.4, Eigen::VectorXd::Zero(5)), ParameterError);
  CHECK_THROWS_AS(gaussian_posterior(j, prior, 0.0, y), ParameterError);
  CHECK_THROWS_AS(gaussian_posterior(j, prior, -1.0, y), ParameterError);
}
