#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nowcast/error.hpp"
#include "nowcast/estimate.hpp"

namespace nowcast {
namespace {

CarStructure rook(int rows, int cols) {
  std::vector<Point> pts;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) pts.push_back({double(c), double(r)});
  }
  return build_weights(Neighborhood(pts, 1.2), pts, WeightFunction::Binary);
}

Eigen::MatrixXd random_design(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Eigen::MatrixXd f(n, p);
  for (int i = 0; i < f.size(); ++i) f.data()[i] = z(rng);
  return f;
}

Eigen::VectorXd car_draw(const CarStructure& car, double rho, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  Eigen::VectorXd e(car.size());
  for (auto& v : e) v = z(rng);
  PrecisionFactor f(car);
  EXPECT_TRUE(f.factorize(rho));
  return sigma * f.inverse_root(e);
}

TEST(Fgls, NoiselessDataRecoversGamma) {
  const auto car = rook(5, 5);
  const Eigen::MatrixXd f = random_design(25, 3, 1);
  const Eigen::Vector3d gamma(1.5, -2.0, 0.25);
  const Eigen::VectorXd g = f * gamma;
  EXPECT_LT((fgls_gamma(g, f, car.precision(0.4), 0.0) - gamma).norm(), 1e-10);
  EXPECT_LT((ols_gamma(g, f, 0.0) - gamma).norm(), 1e-10);
}

TEST(Fgls, ScaledIdentityPrecisionEqualsOls) {
  const Eigen::MatrixXd f = random_design(30, 4, 2);
  const Eigen::VectorXd g = random_design(30, 1, 3).col(0);
  SparseMatrix p(30, 30);
  p.setIdentity();
  p *= 7.0;
  const Eigen::VectorXd oracle = f.colPivHouseholderQr().solve(g);
  EXPECT_LT((fgls_gamma(g, f, p, 0.0) - oracle).norm(), 1e-10);
  EXPECT_LT((ols_gamma(g, f, 0.0) - oracle).norm(), 1e-10);
}

TEST(Fgls, DiagonalCovarianceIsWeightedLeastSquares) {
  // Five points, straight-line fit with weights 1/var.
  Eigen::MatrixXd f(5, 2);
  f << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd g(5);
  g << 1.0, 2.5, 2.9, 4.2, 5.1;
  Eigen::VectorXd var(5);
  var << 1.0, 2.0, 0.5, 1.0, 4.0;
  // Hand normal equations for y = a + b x.
  double sw = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (int i = 0; i < 5; ++i) {
    const double w = 1.0 / var[i];
    const double x = f(i, 1);
    sw += w;
    sx += w * x;
    sxx += w * x * x;
    sy += w * g[i];
    sxy += w * x * g[i];
  }
  const double det = sw * sxx - sx * sx;
  const double a = (sxx * sy - sx * sxy) / det;
  const double b = (sw * sxy - sx * sy) / det;
  const Eigen::VectorXd est = fgls_gamma_dense(g, f, Eigen::MatrixXd(var.asDiagonal()), 0.0);
  EXPECT_NEAR(est[0], a, 1e-12);
  EXPECT_NEAR(est[1], b, 1e-12);
}

TEST(Fgls, SparseAndDenseFormsAgree) {
  const auto car = rook(4, 6);
  const Eigen::MatrixXd f = random_design(24, 3, 5);
  const Eigen::VectorXd g = random_design(24, 1, 6).col(0);
  const Eigen::MatrixXd cov = car_covariance(car, {0.7, 2.0});
  EXPECT_LT((fgls_gamma(g, f, car.precision(0.7), 1e-8) - fgls_gamma_dense(g, f, cov, 1e-8)).norm(), 1e-9);
}

TEST(Profile, ZeroRhoSigmaClosedForm) {
  const auto car = rook(4, 4);
  const Eigen::VectorXd y = random_design(16, 1, 7).col(0);
  const auto p = profile_at(y, car, 0.0);
  const double expected = std::sqrt(y.dot(car.row_sums.cwiseProduct(y)) / 16.0);
  EXPECT_NEAR(p.sigma, expected, 1e-13);
}

TEST(Profile, ZeroResidualsAreDegenerate) {
  const auto car = rook(3, 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(9);
  EXPECT_THROW(profile_at(y, car, 0.2), NumericalError);
  EXPECT_THROW(profile_mle_rho_sigma(y, car, EstimationConfig{}), NumericalError);
}

TEST(Profile, LoglikMatchesDenseGaussianDensity) {
  const auto car = rook(3, 4);
  const Eigen::VectorXd y = random_design(12, 1, 8).col(0);
  const CarParams params{-0.3, 1.4};
  const Eigen::MatrixXd cov = car_covariance(car, params);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double quad = y.dot(llt.solve(y));
  const double oracle = -0.5 * (12 * std::log(2 * std::numbers::pi) + logdet + quad);
  EXPECT_NEAR(car_loglik(y, car, params), oracle, 1e-10);

  const auto p = profile_at(y, car, params.rho);
  EXPECT_NEAR(p.loglik, car_loglik(y, car, {params.rho, p.sigma}), 1e-10);
  // Profiled sigma maximizes over sigma.
  EXPECT_GT(p.loglik, car_loglik(y, car, {params.rho, 1.01 * p.sigma}));
  EXPECT_GT(p.loglik, car_loglik(y, car, {params.rho, 0.99 * p.sigma}));
}

TEST(Profile, ObjectiveInfiniteOutsideBounds) {
  const auto car = rook(4, 4);
  const Eigen::VectorXd y = random_design(16, 1, 9).col(0);
  PrecisionFactor f(car);
  const auto b = rho_bounds(car);
  EXPECT_TRUE(std::isinf(profile_objective(y, f, 1.01 * b.upper)));
  EXPECT_TRUE(std::isfinite(profile_objective(y, f, 0.5 * b.upper)));
}

TEST(Profile, MaximizerMatchesGridSearch) {
  const auto car = rook(12, 12);
  const Eigen::VectorXd y = car_draw(car, 0.6, 1.5, 10);
  const auto b = rho_bounds(car);
  const auto best = profile_mle_rho_sigma(y, car, EstimationConfig{});
  double grid_rho = 0, grid_ll = -std::numeric_limits<double>::infinity();
  for (int k = 1; k < 20000; ++k) {
    const double rho = b.lower + b.width() * k / 20000.0;
    const double ll = profile_at(y, car, rho).loglik;
    if (ll > grid_ll) {
      grid_ll = ll;
      grid_rho = rho;
    }
  }
  EXPECT_NEAR(best.rho, grid_rho, 2.0 * b.width() / 20000.0);
  EXPECT_GE(best.loglik, grid_ll - 1e-9);
  EXPECT_TRUE(b.contains(best.rho));
}

TEST(Irwgls, NoiselessGrowthConvergesImmediately) {
  const auto car = rook(5, 5);
  const Eigen::MatrixXd f = random_design(25, 3, 11);
  const Eigen::VectorXd g = f * Eigen::Vector3d(0.5, 1.0, -1.0);
  const auto res = irwgls(g, f, car, EstimationConfig{});
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.iterations, 2);
  EXPECT_EQ(res.rho, 0.0);
  EXPECT_LT((res.gamma - Eigen::Vector3d(0.5, 1.0, -1.0)).norm(), 1e-6);
  EXPECT_LT(res.sigma, 1e-6);
}

TEST(Irwgls, FirstIterateIsOls) {
  const auto car = rook(8, 8);
  const Eigen::MatrixXd f = random_design(64, 3, 12);
  const Eigen::VectorXd g = f * Eigen::Vector3d(1, 2, 3) + car_draw(car, 0.5, 1.0, 13);
  EstimationConfig cfg;
  cfg.tolerance = std::numeric_limits<double>::infinity();
  const auto one = irwgls(g, f, car, cfg);
  EXPECT_EQ(one.iterations, 1);
  EXPECT_TRUE(one.converged);
  EXPECT_LT((one.gamma - ols_gamma(g, f, cfg.ridge)).norm(), 1e-14);

  const auto full = irwgls(g, f, car, EstimationConfig{});
  EXPECT_LT((full.first_gamma - ols_gamma(g, f, cfg.ridge)).norm(), 1e-14);
  EXPECT_GT(full.iterations, 1);
  EXPECT_TRUE(full.converged);
  // The final gamma is the FGLS solution at the final rho.
  EXPECT_LT((full.gamma - fgls_gamma(g, f, car.precision(full.rho), cfg.ridge)).norm(), 1e-3 * full.gamma.norm());
}

TEST(Irwgls, IterationCapReportsNonConvergence) {
  const auto car = rook(8, 8);
  const Eigen::MatrixXd f = random_design(64, 3, 14);
  const Eigen::VectorXd g = f * Eigen::Vector3d(1, 2, 3) + car_draw(car, 0.8, 1.0, 15);
  EstimationConfig cfg;
  cfg.max_iterations = 1;
  cfg.tolerance = 1e-12;
  const auto res = irwgls(g, f, car, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 1);
}

std::vector<TimeFit> temporal_series(const CarStructure& car, const std::vector<double>& r, int times,
                                     std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  std::vector<TimeFit> fits(times);
  for (int t = 0; t < times; ++t) {
    fits[t].car = car;
    fits[t].sigma = 1.0;
    Eigen::VectorXd g(car.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      double v = noise * z(rng);
      for (std::size_t j = 1; j <= r.size(); ++j) {
        if (t >= int(j)) v += r[j - 1] * fits[t - j].growth[i];
      }
      if (t < int(r.size())) v = z(rng);
      g[i] = v;
    }
    fits[t].growth = g;
  }
  return fits;
}

TEST(Temporal, ExactAutoregressionIsRecovered) {
  const auto car = rook(4, 4);
  const auto fits = temporal_series(car, {0.5}, 4, 16, 0.0);
  const auto r = wls_temporal(fits, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 0.5, 1e-12);
}

TEST(Temporal, NoisyAutoregressionIsRecovered) {
  const auto car = rook(20, 20);
  const auto fits = temporal_series(car, {0.9, -0.3}, 12, 17, 1.0);
  const auto r = wls_temporal(fits, 2);
  EXPECT_NEAR(r[0], 0.9, 0.05);
  EXPECT_NEAR(r[1], -0.3, 0.05);
  EXPECT_EQ(r, wls_temporal(fits, 2));
}

TEST(Temporal, RejectsShortOrDegenerateHistory) {
  const auto car = rook(3, 3);
  auto fits = temporal_series(car, {0.5}, 2, 18, 0.0);
  EXPECT_THROW(wls_temporal(fits, 2), DataError);
  for (auto& tf : fits) tf.growth.setZero();
  EXPECT_THROW(wls_temporal(fits, 1), NumericalError);
  EXPECT_THROW(wls_temporal(fits, 0), ConfigError);
}

TEST(EstimationConfig, Validation) {
  EstimationConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.multistarts = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace nowcast
