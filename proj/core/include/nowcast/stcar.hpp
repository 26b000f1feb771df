#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "nowcast/advect.hpp"
#include "nowcast/geometry.hpp"
#include "nowcast/raster.hpp"

namespace nowcast {

using SparseMatrix = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Kernel-mixture mean model
// ---------------------------------------------------------------------------

/// Locally weighted mixture of linear regressions. Each of the J Gaussian
/// kernels carries three basis functions (1, x, y), with coordinates taken
/// relative to the kernel center in bandwidth units.
class KernelMeanModel {
 public:
  KernelMeanModel() = default;
  KernelMeanModel(std::vector<Point> centers, double bandwidth_km);

  std::size_t kernel_count() const { return centers_.size(); }
  std::size_t parameter_count() const { return 3 * centers_.size(); }
  double bandwidth() const { return bandwidth_; }
  const std::vector<Point>& centers() const { return centers_; }

  /// pi_j(x) = exp(-|x - c_j|^2 / (2 b^2)); equals 1 at the center.
  double weight(std::size_t j, Point x) const;
  /// n x 3J design matrix F_t with blocks diag(pi_j) F_{j,t}.
  Eigen::MatrixXd design(std::span<const Point> positions) const;

 private:
  std::vector<Point> centers_;
  double bandwidth_ = 1.0;
};

/// Weighted Lloyd iterations from a seeded k-means++ start.
std::vector<Point> weighted_kmeans(std::span<const Point> points, std::span<const double> weights, std::size_t k,
                                   std::uint64_t seed, int max_iterations = 100);

/// K-means (k = J) on valid array positions weighted by |G|.
KernelMeanModel place_kernels(const GrowthField& growth, std::span<const Point> positions, std::size_t kernels,
                              double bandwidth_km, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CAR structure
// ---------------------------------------------------------------------------

enum class WeightFunction { Binary, InverseDistance };

/// Omega_i = { j != i : |s_i - s_j| < d } from reference positions; fixed in time.
class Neighborhood {
 public:
  Neighborhood() = default;
  Neighborhood(std::span<const Point> reference, double distance_km);

  std::size_t size() const { return neighbors_.size(); }
  double distance() const { return distance_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }

  /// Sub-neighbourhood on `keep` (re-indexed in the given order).
  Neighborhood restrict(std::span<const std::size_t> keep) const;

 private:
  double distance_ = 0.0;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// Weight snapshot W_t and row sums w_{i+}(t).
struct CarStructure {
  SparseMatrix weights;
  Eigen::VectorXd row_sums;

  std::size_t size() const { return static_cast<std::size_t>(row_sums.size()); }
  /// W_D - rho W, always carrying the full off-diagonal pattern.
  SparseMatrix precision(double rho) const;
  /// B y = y - rho W_D^{-1} W y.
  Eigen::VectorXd apply_b(double rho, const Eigen::VectorXd& y) const;
  SparseMatrix b_matrix(double rho) const;
};

double weight_value(WeightFunction phi, Point a, Point b);

/// Throws DataError naming the first isolated array.
CarStructure build_weights(const Neighborhood& neighborhood, std::span<const Point> positions, WeightFunction phi);
CarStructure build_weights(const TrackState& track, std::size_t t, double distance_km, WeightFunction phi);

struct CarParams {
  double rho = 0.0;
  double sigma = 1.0;
};

/// Open interval of rho keeping W_D - rho W positive definite.
struct RhoInterval {
  double lower = -1.0;
  double upper = 1.0;
  bool contains(double rho) const { return rho > lower && rho < upper; }
  double width() const { return upper - lower; }
};

/// (1/lambda_min, 1/lambda_max) of W_D^{-1} W, via the symmetric similar
/// matrix W_D^{-1/2} W W_D^{-1/2}. Dense eigensolver for small n, Lanczos above.
RhoInterval rho_bounds(const CarStructure& car);

/// Extreme eigenvalues of a symmetric sparse matrix (Lanczos with full
/// reorthogonalization when n exceeds `dense_limit`).
std::pair<double, double> extreme_eigenvalues(const SparseMatrix& s, std::size_t dense_limit = 1500);

/// Sparse LDL^T factor of W_D - rho W with a reusable symbolic analysis.
class PrecisionFactor {
 public:
  explicit PrecisionFactor(const CarStructure& car);

  /// False when W_D - rho W is not positive definite.
  bool factorize(double rho);
  double rho() const { return rho_; }
  const CarStructure& car() const { return car_; }
  double log_determinant() const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// x with Cov(x) = (W_D - rho W)^{-1} for z ~ N(0, I).
  Eigen::VectorXd inverse_root(const Eigen::VectorXd& z) const;
  /// y with Cov(y) = W_D - rho W for z ~ N(0, I).
  Eigen::VectorXd root(const Eigen::VectorXd& z) const;
  /// diag((W_D - rho W)^{-1}).
  Eigen::VectorXd inverse_diagonal() const;

 private:
  CarStructure car_;
  std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
  double rho_ = 0.0;
  bool ok_ = false;
};

/// Sigma = sigma^2 (W_D - rho W)^{-1}; NumericalError when not SPD.
Eigen::MatrixXd car_covariance(const CarStructure& car, const CarParams& params);

// ---------------------------------------------------------------------------
// STCAR fit and sampler
// ---------------------------------------------------------------------------

/// Per-time estimates on the active array set.
struct TimeFit {
  int t = 0;  // scan index of the growth time
  std::vector<Point> positions;
  CarStructure car;
  Eigen::MatrixXd design;
  Eigen::VectorXd growth;    // G_t
  Eigen::VectorXd gamma;
  Eigen::VectorXd residual;  // Y_t = G_t - F_t gamma_t
  double rho = 0.0;
  double sigma = 1.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct StcarFit {
  std::vector<std::size_t> arrays;  // layout indices of the active set
  Neighborhood neighborhood;        // on the active set
  WeightFunction phi = WeightFunction::Binary;
  KernelMeanModel kernels;
  std::vector<TimeFit> times;
  std::vector<double> r;

  std::size_t q() const { return r.size(); }
};

struct SamplerOptions {
  std::size_t burn_in = 0;
  /// Pre-sample history, oldest first; zero history when empty.
  std::vector<Eigen::VectorXd> history;
};

/// Iterates B_t Y_t = sum_j r_j B_{t-j} Y_{t-j} + eps_t with
/// eps_t ~ N(0, sigma_t^2 W_D^{-1} (W_D - rho_t W) W_D^{-1}). Times past the
/// end of `fit.times` reuse the last structure and parameters.
std::vector<Eigen::VectorXd> sample_stcar(const StcarFit& fit, std::size_t horizon, std::uint64_t seed,
                                          const SamplerOptions& options = {});

}  // namespace nowcast
