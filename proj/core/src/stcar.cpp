#include "nowcast/stcar.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "nowcast/error.hpp"

namespace nowcast {

using Triplet = Eigen::Triplet<double>;

// ---------------------------------------------------------------------------
// Kernel mean model

KernelMeanModel::KernelMeanModel(std::vector<Point> centers, double bandwidth_km)
    : centers_(std::move(centers)), bandwidth_(bandwidth_km) {
  if (centers_.empty()) throw ConfigError("kernel mean model needs at least one kernel");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw ConfigError("kernel bandwidth must be > 0");
}

double KernelMeanModel::weight(std::size_t j, Point x) const {
  const Point d = x - centers_.at(j);
  return std::exp(-squared_norm(d) / (2.0 * bandwidth_ * bandwidth_));
}

Eigen::MatrixXd KernelMeanModel::design(std::span<const Point> positions) const {
  const auto n = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd f(n, static_cast<Eigen::Index>(parameter_count()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point x = positions[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < centers_.size(); ++j) {
      const double pi = weight(j, x);
      const auto col = static_cast<Eigen::Index>(3 * j);
      f(i, col) = pi;
      f(i, col + 1) = pi * (x.x - centers_[j].x) / bandwidth_;
      f(i, col + 2) = pi * (x.y - centers_[j].y) / bandwidth_;
    }
  }
  return f;
}

std::vector<Point> weighted_kmeans(std::span<const Point> points, std::span<const double> weights, std::size_t k,
                                   std::uint64_t seed, int max_iterations) {
  if (k == 0) throw ConfigError("k-means needs k >= 1");
  if (points.size() != weights.size()) throw DataError("k-means: weights do not match points");
  if (points.size() < k) throw DataError("k-means: fewer points than clusters");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("k-means: weights must be finite and >= 0");
  }
  const std::size_t n = points.size();
  std::mt19937_64 rng(seed);

  auto pick = [&](const std::vector<double>& mass) -> std::size_t {
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0)) {
      std::uniform_int_distribution<std::size_t> u(0, n - 1);
      return u(rng);
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      target -= mass[i];
      if (target <= 0.0 && mass[i] > 0.0) return i;
    }
    for (std::size_t i = n; i-- > 0;) {
      if (mass[i] > 0.0) return i;
    }
    return n - 1;
  };

  std::vector<Point> centers;
  centers.reserve(k);
  std::vector<double> mass(weights.begin(), weights.end());
  centers.push_back(points[pick(mass)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_norm(points[i] - centers.back()));
      mass[i] = weights[i] * d2[i];
    }
    centers.push_back(points[pick(mass)]);
  }

  std::vector<std::size_t> assign(n, k);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_norm(points[i] - centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    std::vector<Point> sum(k);
    std::vector<double> wsum(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assign[i]] = sum[assign[i]] + weights[i] * points[i];
      wsum[assign[i]] += weights[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (wsum[c] > 0.0) {
        centers[c] = (1.0 / wsum[c]) * sum[c];
        continue;
      }
      // Empty (or weightless) cluster: move it to the point worst served.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = weights[i] * squared_norm(points[i] - centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers[c] = points[far];
      assign[far] = c;
    }
  }
  return centers;
}

KernelMeanModel place_kernels(const GrowthField& growth, std::span<const Point> positions, std::size_t kernels,
                              double bandwidth_km, std::uint64_t seed) {
  if (kernels < 1) throw ConfigError("kernel count J must be >= 1");
  if (growth.size() != positions.size()) throw DataError("place_kernels: growth and positions differ in length");
  std::vector<Point> pts;
  std::vector<double> w;
  double max_abs = 0.0;
  for (std::size_t i = 0; i < growth.size(); ++i) {
    if (growth.valid[i]) max_abs = std::max(max_abs, std::abs(growth.values[i]));
  }
  // Every valid array stays eligible even where the growth vanishes.
  const double floor = max_abs > 0.0 ? 1e-6 * max_abs : 1.0;
  for (std::size_t i = 0; i < growth.size(); ++i) {
    if (!growth.valid[i]) continue;
    pts.push_back(positions[i]);
    w.push_back(std::abs(growth.values[i]) + floor);
  }
  if (pts.size() < kernels) {
    throw DataError("place_kernels: " + std::to_string(pts.size()) + " valid arrays for " +
                    std::to_string(kernels) + " kernels");
  }
  return KernelMeanModel(weighted_kmeans(pts, w, kernels, seed), bandwidth_km);
}

// ---------------------------------------------------------------------------
// Neighbourhoods and weights

Neighborhood::Neighborhood(std::span<const Point> reference, double distance_km) : distance_(distance_km) {
  if (!(distance_km > 0.0)) throw ConfigError("neighbourhood distance must be > 0");
  const std::size_t n = reference.size();
  neighbors_.resize(n);
  // Bucket grid with cell = d keeps this linear for large layouts.
  double minx = std::numeric_limits<double>::infinity(), miny = minx;
  for (const auto& p : reference) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
  }
  auto key = [&](Point p) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor((p.x - minx) / distance_km)),
                                           static_cast<long long>(std::floor((p.y - miny) / distance_km))};
  };
  std::vector<std::pair<std::pair<long long, long long>, std::size_t>> cells(n);
  for (std::size_t i = 0; i < n; ++i) cells[i] = {key(reference[i]), i};
  std::sort(cells.begin(), cells.end());
  const double d2 = distance_km * distance_km;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = key(reference[i]);
    for (long long gx = cx - 1; gx <= cx + 1; ++gx) {
      for (long long gy = cy - 1; gy <= cy + 1; ++gy) {
        auto lo = std::lower_bound(cells.begin(), cells.end(), std::make_pair(std::make_pair(gx, gy), std::size_t{0}));
        for (auto it = lo; it != cells.end() && it->first == std::make_pair(gx, gy); ++it) {
          const std::size_t j = it->second;
          if (j != i && squared_norm(reference[i] - reference[j]) < d2) neighbors_[i].push_back(j);
        }
      }
    }
    std::sort(neighbors_[i].begin(), neighbors_[i].end());
  }
}

Neighborhood Neighborhood::restrict(std::span<const std::size_t> keep) const {
  std::vector<std::size_t> slot(neighbors_.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < keep.size(); ++k) slot.at(keep[k]) = k;
  Neighborhood out;
  out.distance_ = distance_;
  out.neighbors_.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    for (std::size_t j : neighbors_[keep[k]]) {
      if (slot[j] != std::numeric_limits<std::size_t>::max()) out.neighbors_[k].push_back(slot[j]);
    }
    std::sort(out.neighbors_[k].begin(), out.neighbors_[k].end());
  }
  return out;
}

double weight_value(WeightFunction phi, Point a, Point b) {
  if (phi == WeightFunction::Binary) return 1.0;
  const double d = norm(a - b);
  if (!(d > 0.0)) throw DataError("inverse-distance weight between coincident arrays");
  return 1.0 / d;
}

CarStructure build_weights(const Neighborhood& neighborhood, std::span<const Point> positions, WeightFunction phi) {
  const std::size_t n = neighborhood.size();
  if (positions.size() != n) throw DataError("build_weights: positions do not match the neighbourhood");
  if (n == 0) throw DataError("build_weights: no arrays");
  std::vector<Triplet> t;
  CarStructure car;
  car.row_sums = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::size_t isolated = 0;
  std::size_t first_isolated = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighborhood.neighbors(i)) {
      const double w = weight_value(phi, positions[i], positions[j]);
      t.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
      car.row_sums[static_cast<Eigen::Index>(i)] += w;
    }
    if (!(car.row_sums[static_cast<Eigen::Index>(i)] > 0.0)) {
      if (first_isolated == n) first_isolated = i;
      ++isolated;
    }
  }
  if (isolated == n) throw DataError("build_weights: all arrays isolated under the neighbourhood distance");
  if (isolated > 0) {
    throw DataError("build_weights: array " + std::to_string(first_isolated) + " is isolated (row sum 0)");
  }
  car.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  car.weights.setFromTriplets(t.begin(), t.end());
  car.weights.makeCompressed();
  return car;
}

CarStructure build_weights(const TrackState& track, std::size_t t, double distance_km, WeightFunction phi) {
  if (t >= track.times()) throw DataError("build_weights: no positions at requested time");
  const Neighborhood nb(track.reference, distance_km);
  return build_weights(nb, track.at(t), phi);
}

SparseMatrix CarStructure::precision(double rho) const {
  const auto n = weights.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(weights.nonZeros() + n));
  for (Eigen::Index k = 0; k < weights.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(weights, k); it; ++it) {
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), -rho * it.value());
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), row_sums[i]);
  SparseMatrix q(n, n);
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

Eigen::VectorXd CarStructure::apply_b(double rho, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd wy = weights * y;
  return y - rho * wy.cwiseQuotient(row_sums);
}

SparseMatrix CarStructure::b_matrix(double rho) const {
  const Eigen::VectorXd inv = row_sums.cwiseInverse();
  const SparseMatrix scaled = inv.asDiagonal() * weights;
  const SparseMatrix b = -rho * scaled;
  SparseMatrix id(b.rows(), b.cols());
  id.setIdentity();
  return SparseMatrix(id + b);
}

// ---------------------------------------------------------------------------
// Spectrum and bounds

std::pair<double, double> extreme_eigenvalues(const SparseMatrix& s, std::size_t dense_limit) {
  const auto n = s.rows();
  if (n == 0) throw DataError("extreme_eigenvalues: empty matrix");
  if (static_cast<std::size_t>(n) <= dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solve failed");
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }

  const Eigen::Index m = std::min<Eigen::Index>(n, 300);
  Eigen::MatrixXd v(n, m);
  Eigen::VectorXd alpha(m), beta(m);
  Eigen::VectorXd q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i));
  q.normalize();
  Eigen::Index steps = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    v.col(j) = q;
    Eigen::VectorXd w = s * q;
    alpha[j] = q.dot(w);
    // Full reorthogonalization (twice is enough).
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = v.leftCols(j + 1).transpose() * w;
      w -= v.leftCols(j + 1) * c;
    }
    steps = j + 1;
    const double b = w.norm();
    beta[j] = b;
    if (b < 1e-12) break;
    q = w / b;
  }
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(steps, steps);
  for (Eigen::Index j = 0; j < steps; ++j) {
    tri(j, j) = alpha[j];
    if (j + 1 < steps) tri(j, j + 1) = tri(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

RhoInterval rho_bounds(const CarStructure& car) {
  const Eigen::VectorXd isqrt = car.row_sums.cwiseSqrt().cwiseInverse();
  const SparseMatrix s = isqrt.asDiagonal() * car.weights * isqrt.asDiagonal();
  const auto [lmin, lmax] = extreme_eigenvalues(s);
  if (!(lmin < 0.0) || !(lmax > 0.0)) throw NumericalError("rho_bounds: degenerate spectrum");
  return {1.0 / lmin, 1.0 / lmax};
}

// ---------------------------------------------------------------------------
// Precision factor

PrecisionFactor::PrecisionFactor(const CarStructure& car)
    : car_(car), ldlt_(std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>()) {
  ldlt_->analyzePattern(car_.precision(0.5));
}

bool PrecisionFactor::factorize(double rho) {
  rho_ = rho;
  ldlt_->factorize(car_.precision(rho));
  ok_ = ldlt_->info() == Eigen::Success && (ldlt_->vectorD().array() > 0.0).all() &&
        ldlt_->vectorD().allFinite();
  return ok_;
}

double PrecisionFactor::log_determinant() const {
  if (!ok_) throw NumericalError("log_determinant: no valid factorization");
  return ldlt_->vectorD().array().log().sum();
}

Eigen::VectorXd PrecisionFactor::solve(const Eigen::VectorXd& b) const {
  if (!ok_) throw NumericalError("solve: no valid factorization");
  return ldlt_->solve(b);
}

Eigen::VectorXd PrecisionFactor::inverse_root(const Eigen::VectorXd& z) const {
  if (!ok_) throw NumericalError("inverse_root: no valid factorization");
  // A = P^T L D L^T P, so x = P^T L^{-T} D^{-1/2} z has Cov A^{-1}.
  const Eigen::VectorXd scaled = z.cwiseQuotient(ldlt_->vectorD().cwiseSqrt());
  const Eigen::VectorXd u = ldlt_->matrixU().solve(scaled);
  return ldlt_->permutationPinv() * u;
}

Eigen::VectorXd PrecisionFactor::root(const Eigen::VectorXd& z) const {
  if (!ok_) throw NumericalError("root: no valid factorization");
  const Eigen::VectorXd scaled = z.cwiseProduct(ldlt_->vectorD().cwiseSqrt());
  const SparseMatrix l = ldlt_->matrixL();
  Eigen::VectorXd u = l.triangularView<Eigen::UnitLower>() * scaled;
  return ldlt_->permutationPinv() * u;
}

Eigen::VectorXd PrecisionFactor::inverse_diagonal() const {
  if (!ok_) throw NumericalError("inverse_diagonal: no valid factorization");
  const auto n = static_cast<Eigen::Index>(car_.size());
  Eigen::VectorXd diag(n);
  constexpr Eigen::Index kBlock = 64;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index w = std::min(kBlock, n - start);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, w);
    for (Eigen::Index c = 0; c < w; ++c) rhs(start + c, c) = 1.0;
    const Eigen::MatrixXd sol = ldlt_->solve(rhs);
    for (Eigen::Index c = 0; c < w; ++c) diag[start + c] = sol(start + c, c);
  }
  return diag;
}

Eigen::MatrixXd car_covariance(const CarStructure& car, const CarParams& params) {
  if (!(params.sigma >= 0.0)) throw ConfigError("car_covariance: sigma must be >= 0");
  PrecisionFactor f(car);
  if (!f.factorize(params.rho)) {
    throw NumericalError("precision W_D - rho W is not positive definite at rho = " + std::to_string(params.rho));
  }
  const auto n = static_cast<Eigen::Index>(car.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index c = 0; c < n; ++c) sigma.col(c) = f.solve(Eigen::VectorXd::Unit(n, c));
  sigma = 0.5 * (sigma + sigma.transpose());
  return params.sigma * params.sigma * sigma;
}

// ---------------------------------------------------------------------------
// Sampler

std::vector<Eigen::VectorXd> sample_stcar(const StcarFit& fit, std::size_t horizon, std::uint64_t seed,
                                          const SamplerOptions& options) {
  if (fit.times.empty()) throw DataError("sample_stcar: fit has no time structure");
  const std::size_t n = fit.times.front().car.size();
  const std::size_t q = fit.r.size();
  for (const auto& tf : fit.times) {
    if (tf.car.size() != n) throw DataError("sample_stcar: array count changes over time");
  }

  std::vector<PrecisionFactor> factors;
  factors.reserve(fit.times.size());
  for (const auto& tf : fit.times) {
    if (!(tf.sigma >= 0.0)) throw ConfigError("sample_stcar: sigma must be >= 0");
    PrecisionFactor f(tf.car);
    if (!f.factorize(tf.rho)) {
      throw NumericalError("sample_stcar: rho = " + std::to_string(tf.rho) + " outside the admissible interval");
    }
    factors.push_back(std::move(f));
  }
  auto slot = [&](std::size_t k) { return std::min(k, fit.times.size() - 1); };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Each history entry keeps B_t Y_t alongside its slot.
  struct Entry {
    Eigen::VectorXd by;
  };
  std::vector<Entry> past;
  for (const auto& h : options.history) {
    if (static_cast<std::size_t>(h.size()) != n) throw DataError("sample_stcar: history length mismatch");
    const auto& tf = fit.times[slot(0)];
    past.push_back({tf.car.apply_b(tf.rho, h)});
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(horizon);
  const std::size_t total = options.burn_in + horizon;
  for (std::size_t step = 0; step < total; ++step) {
    const std::size_t k = step < options.burn_in ? 0 : step - options.burn_in;
    const auto& tf = fit.times[slot(k)];
    const auto& f = factors[slot(k)];

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 1; j <= q && j <= past.size(); ++j) rhs += fit.r[j - 1] * past[past.size() - j].by;

    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (auto& v : z) v = normal(rng);
    const Eigen::VectorXd eps = tf.sigma * f.root(z).cwiseQuotient(tf.car.row_sums);
    rhs += eps;

    // B Y = rhs  <=>  (W_D - rho W) Y = W_D rhs.
    const Eigen::VectorXd y = f.solve(tf.car.row_sums.cwiseProduct(rhs));
    past.push_back({rhs});
    if (past.size() > std::max<std::size_t>(q, 1)) past.erase(past.begin());
    if (step >= options.burn_in) out.push_back(y);
  }
  return out;
}

}  // namespace nowcast
