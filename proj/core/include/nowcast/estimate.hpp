#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nowcast/stcar.hpp"

namespace nowcast {

struct EstimationConfig {
  int max_iterations = 20;
  double tolerance = 1e-4;      // relative change of (gamma, rho, sigma)
  double rho_tolerance = 1e-8;  // golden-section bracket width
  int multistarts = 5;
  double ridge = 1e-8;          // times trace(F' P F) / p
  int q = 2;

  void validate() const;
};

/// gamma = (F' P F + eps I)^{-1} F' P g, where P is the precision (inverse
/// covariance) up to a positive scale.
Eigen::VectorXd fgls_gamma(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const SparseMatrix& precision,
                           double ridge);
/// Same estimator from a dense covariance matrix.
Eigen::VectorXd fgls_gamma_dense(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const Eigen::MatrixXd& covariance,
                                 double ridge);
/// Ordinary least squares (identity covariance).
Eigen::VectorXd ols_gamma(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, double ridge);

struct ProfileResult {
  double rho = 0.0;
  double sigma = 0.0;
  double loglik = 0.0;
  double objective = 0.0;
  int evaluations = 0;
};

/// (n/2) log(y' Q y / n) - (1/2) log|Q| with Q = W_D - rho W; +inf when Q is
/// not positive definite.
double profile_objective(const Eigen::VectorXd& y, PrecisionFactor& factor, double rho);

/// Gaussian log-likelihood of y ~ N(0, sigma^2 Q^{-1}).
double car_loglik(const Eigen::VectorXd& y, const CarStructure& car, const CarParams& params);

/// sigma and log-likelihood at a fixed rho.
ProfileResult profile_at(const Eigen::VectorXd& y, const CarStructure& car, double rho);

/// Minimizes the profile objective over the open admissible interval with
/// golden-section searches on equispaced sub-brackets.
ProfileResult profile_mle_rho_sigma(const Eigen::VectorXd& y, const CarStructure& car, const EstimationConfig& cfg);
ProfileResult profile_mle_rho_sigma(const Eigen::VectorXd& y, const CarStructure& car, const RhoInterval& bounds,
                                    const EstimationConfig& cfg);

struct IrwglsResult {
  Eigen::VectorXd gamma;
  Eigen::VectorXd first_gamma;  // OLS iterate
  Eigen::VectorXd residual;
  double rho = 0.0;
  double sigma = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

IrwglsResult irwgls(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const CarStructure& car,
                    const EstimationConfig& cfg);
IrwglsResult irwgls(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const CarStructure& car,
                    const RhoInterval& bounds, const EstimationConfig& cfg);

/// Temporal coefficients r from consecutive per-time fits (oldest first):
/// weighted regression of G_t on (G_{t-1}, ..., G_{t-q}) with weights
/// w_{i+}(t) / sigma_t^2.
std::vector<double> wls_temporal(std::span<const TimeFit> fits, int q);

}  // namespace nowcast
