#include "nowcast/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd solve_normal(Eigen::MatrixXd a, const Eigen::VectorXd& b, double ridge) {
  const auto p = a.rows();
  const double scale = a.trace() / static_cast<double>(p);
  if (!(scale > 0.0) || !std::isfinite(scale)) throw NumericalError("GLS normal equations are degenerate");
  a.diagonal().array() += ridge * scale;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("GLS normal equations are rank deficient beyond ridge repair");
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-14 * d.maxCoeff()) {
    throw NumericalError("GLS normal equations are rank deficient beyond ridge repair");
  }
  Eigen::VectorXd x = ldlt.solve(b);
  if (!x.allFinite()) throw NumericalError("GLS solve produced non-finite coefficients");
  return x;
}

void check_shapes(const Eigen::VectorXd& g, const Eigen::MatrixXd& f) {
  if (g.size() != f.rows()) throw DataError("design rows do not match growth length");
  if (f.cols() == 0) throw DataError("empty design matrix");
  if (!g.allFinite()) throw DataError("growth vector has non-finite entries");
}

double relative_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(before), 1e-6);
}

}  // namespace

void EstimationConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (!(rho_tolerance > 0.0) || !std::isfinite(rho_tolerance)) throw ConfigError("rho_tolerance must be > 0");
  if (multistarts < 1) throw ConfigError("multistarts must be >= 1");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be >= 0");
  if (q < 1) throw ConfigError("q must be >= 1");
}

Eigen::VectorXd fgls_gamma(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const SparseMatrix& precision,
                           double ridge) {
  check_shapes(g, f);
  if (precision.rows() != f.rows() || precision.cols() != f.rows()) throw DataError("precision size mismatch");
  const Eigen::MatrixXd pf = precision * f;
  return solve_normal(f.transpose() * pf, pf.transpose() * g, ridge);
}

Eigen::VectorXd fgls_gamma_dense(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const Eigen::MatrixXd& covariance,
                                 double ridge) {
  check_shapes(g, f);
  if (covariance.rows() != f.rows() || covariance.cols() != f.rows()) throw DataError("covariance size mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::MatrixXd sf = llt.solve(f);
  return solve_normal(f.transpose() * sf, sf.transpose() * g, ridge);
}

Eigen::VectorXd ols_gamma(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, double ridge) {
  check_shapes(g, f);
  return solve_normal(f.transpose() * f, f.transpose() * g, ridge);
}

double profile_objective(const Eigen::VectorXd& y, PrecisionFactor& factor, double rho) {
  if (!factor.factorize(rho)) return kInf;
  const SparseMatrix q = factor.car().precision(rho);
  const double quad = y.dot(q * y);
  if (!(quad > 0.0)) return kInf;
  const double n = static_cast<double>(y.size());
  const double value = 0.5 * n * std::log(quad / n) - 0.5 * factor.log_determinant();
  return std::isfinite(value) ? value : kInf;
}

double car_loglik(const Eigen::VectorXd& y, const CarStructure& car, const CarParams& params) {
  if (!(params.sigma > 0.0)) throw NumericalError("degenerate likelihood: sigma must be > 0");
  PrecisionFactor f(car);
  if (!f.factorize(params.rho)) throw NumericalError("precision not positive definite at rho");
  const double quad = y.dot(car.precision(params.rho) * y);
  const double n = static_cast<double>(y.size());
  const double s2 = params.sigma * params.sigma;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) + 0.5 * f.log_determinant() - quad / (2.0 * s2);
}

ProfileResult profile_at(const Eigen::VectorXd& y, const CarStructure& car, double rho) {
  if (static_cast<std::size_t>(y.size()) != car.size()) throw DataError("residual length does not match structure");
  PrecisionFactor f(car);
  if (!f.factorize(rho)) throw NumericalError("precision not positive definite at rho");
  const double n = static_cast<double>(y.size());
  const double quad = y.dot(car.precision(rho) * y);
  if (!(quad > 0.0)) throw NumericalError("degenerate likelihood: zero residuals");
  ProfileResult out;
  out.rho = rho;
  out.sigma = std::sqrt(quad / n);
  out.objective = 0.5 * n * std::log(quad / n) - 0.5 * f.log_determinant();
  out.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi) + 1.0) - out.objective;
  out.evaluations = 1;
  return out;
}

ProfileResult profile_mle_rho_sigma(const Eigen::VectorXd& y, const CarStructure& car, const EstimationConfig& cfg) {
  return profile_mle_rho_sigma(y, car, rho_bounds(car), cfg);
}

ProfileResult profile_mle_rho_sigma(const Eigen::VectorXd& y, const CarStructure& car, const RhoInterval& bounds,
                                    const EstimationConfig& cfg) {
  if (static_cast<std::size_t>(y.size()) != car.size()) throw DataError("residual length does not match structure");
  if (!y.allFinite()) throw DataError("residual vector has non-finite entries");
  if (!(y.squaredNorm() > 0.0)) throw NumericalError("degenerate likelihood: zero residuals");
  const double delta = 1e-6 * bounds.width();
  const double lo = bounds.lower + delta;
  const double hi = bounds.upper - delta;
  if (!(hi > lo)) throw NumericalError("empty rho search interval");

  PrecisionFactor factor(car);
  int evaluations = 0;
  auto objective = [&](double rho) {
    ++evaluations;
    return profile_objective(y, factor, rho);
  };

  constexpr double kInvPhi = 0.6180339887498949;
  double best_rho = 0.0;
  double best_value = kInf;
  const int starts = std::max(cfg.multistarts, 1);
  const double step = (hi - lo) / starts;
  for (int s = 0; s < starts; ++s) {
    double a = lo + s * step;
    double b = s + 1 == starts ? hi : lo + (s + 1) * step;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    while (b - a > cfg.rho_tolerance) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = objective(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = objective(d);
      }
    }
    const double mid = 0.5 * (a + b);
    const double fm = objective(mid);
    for (auto [r, v] : {std::pair{c, fc}, std::pair{d, fd}, std::pair{mid, fm}}) {
      if (v < best_value) {
        best_value = v;
        best_rho = r;
      }
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("profile objective is non-finite over the whole interval");

  ProfileResult out = profile_at(y, car, best_rho);
  out.evaluations += evaluations;
  return out;
}

IrwglsResult irwgls(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const CarStructure& car,
                    const EstimationConfig& cfg) {
  return irwgls(g, f, car, rho_bounds(car), cfg);
}

IrwglsResult irwgls(const Eigen::VectorXd& g, const Eigen::MatrixXd& f, const CarStructure& car,
                    const RhoInterval& bounds, const EstimationConfig& cfg) {
  cfg.validate();
  check_shapes(g, f);
  if (static_cast<std::size_t>(g.size()) != car.size()) throw DataError("growth length does not match structure");

  IrwglsResult out;
  out.gamma = ols_gamma(g, f, cfg.ridge);
  out.first_gamma = out.gamma;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXd gamma_before = out.gamma;
    if (it > 1) out.gamma = fgls_gamma(g, f, car.precision(out.rho), cfg.ridge);
    out.residual = g - f * out.gamma;
    out.iterations = it;

    if (out.residual.norm() <= 1e-7 * std::max(g.norm(), 1e-300)) {
      // Exact fit: no spatial signal left to estimate.
      out.rho = 0.0;
      out.sigma = std::sqrt(out.residual.dot(car.row_sums.cwiseProduct(out.residual)) /
                            static_cast<double>(g.size()));
      out.loglik = kInf;
      out.converged = true;
      return out;
    }

    const double rho_before = out.rho;
    const double sigma_before = out.sigma;
    const ProfileResult p = profile_mle_rho_sigma(out.residual, car, bounds, cfg);
    out.rho = p.rho;
    out.sigma = p.sigma;
    out.loglik = p.loglik;

    double change = kInf;
    if (it > 1) {
      change = std::max({(out.gamma - gamma_before).norm() / std::max(gamma_before.norm(), 1e-12),
                         relative_change(out.rho, rho_before), relative_change(out.sigma, sigma_before)});
    }
    if (change <= cfg.tolerance || (it == 1 && std::isinf(cfg.tolerance))) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

std::vector<double> wls_temporal(std::span<const TimeFit> fits, int q) {
  if (q < 1) throw ConfigError("q must be >= 1");
  const auto uq = static_cast<std::size_t>(q);
  if (fits.size() < uq + 1) {
    throw DataError("insufficient history: " + std::to_string(fits.size()) + " growth times for q = " +
                    std::to_string(q));
  }
  const auto n = fits.front().growth.size();
  for (const auto& tf : fits) {
    if (tf.growth.size() != n || tf.car.row_sums.size() != n) throw DataError("growth fields differ in length");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd x(n, q);
  for (std::size_t k = uq; k < fits.size(); ++k) {
    const auto& now = fits[k];
    for (std::size_t j = 1; j <= uq; ++j) x.col(static_cast<Eigen::Index>(j - 1)) = fits[k - j].growth;
    const double s2 = std::max(now.sigma * now.sigma, 1e-24);
    const Eigen::VectorXd w = now.car.row_sums / s2;
    a.noalias() += x.transpose() * w.asDiagonal() * x;
    b.noalias() += x.transpose() * w.asDiagonal() * now.growth;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * std::max(d.maxCoeff(), 1e-300))) {
    throw NumericalError("singular normal equations for temporal coefficients");
  }
  const Eigen::VectorXd r = ldlt.solve(b);
  return {r.data(), r.data() + r.size()};
}

}  // namespace nowcast
