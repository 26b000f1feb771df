#include "nowcast/motion.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>

#include "nowcast/error.hpp"

namespace nowcast {

void MotionConfig::validate() const {
  if (search_radius < 1) throw ConfigError("search_radius must be >= 1");
  if (!(min_valid_correlation >= -1.0 && min_valid_correlation <= 1.0)) {
    throw ConfigError("min_correlation must lie in [-1, 1]");
  }
  if (!(min_patch_variance >= 0.0)) throw ConfigError("min_patch_variance must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (max_iterations < 1) throw ConfigError("smooth_max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("smooth_tolerance must be > 0");
}

Point VelocityField::at(Point x) const {
  if (smooth.empty()) return {};
  const double fc = std::clamp((x.x - lattice.origin.x) / lattice.spacing_km, 0.0, double(lattice.cols - 1));
  const double fr = std::clamp((x.y - lattice.origin.y) / lattice.spacing_km, 0.0, double(lattice.rows - 1));
  const int c0 = std::min(static_cast<int>(std::floor(fc)), std::max(lattice.cols - 2, 0));
  const int r0 = std::min(static_cast<int>(std::floor(fr)), std::max(lattice.rows - 2, 0));
  const double tc = fc - c0;
  const double tr = fr - r0;
  Point acc{};
  for (int dr = 0; dr <= 1; ++dr) {
    const double wr = dr == 0 ? 1.0 - tr : tr;
    if (wr == 0.0) continue;
    for (int dc = 0; dc <= 1; ++dc) {
      const double wc = dc == 0 ? 1.0 - tc : tc;
      if (wc == 0.0) continue;
      acc = acc + (wr * wc) * smooth[lattice.index(r0 + dr, c0 + dc)];
    }
  }
  return acc;
}

VelocityField uniform_velocity(const LatticeGeometry& lattice, Point v) {
  VelocityField f;
  f.lattice = lattice;
  f.raw.assign(lattice.count(), v);
  f.smooth.assign(lattice.count(), v);
  f.correlation.assign(lattice.count(), 1.0);
  f.valid.assign(lattice.count(), true);
  return f;
}

namespace {

struct Candidate {
  double r = -std::numeric_limits<double>::infinity();
  int dx = 0;
  int dy = 0;
  bool found = false;
};

// Larger correlation wins; ties go to the smaller lag, then lexicographic (dy, dx).
bool better(const Candidate& a, const Candidate& b) {
  if (!b.found) return a.found;
  if (a.r != b.r) return a.r > b.r;
  const int ma = a.dx * a.dx + a.dy * a.dy;
  const int mb = b.dx * b.dx + b.dy * b.dy;
  if (ma != mb) return ma < mb;
  if (a.dy != b.dy) return a.dy < b.dy;
  return a.dx < b.dx;
}

}  // namespace

VelocityField trec(const ReflectivityField& scan_t, const ReflectivityField& scan_t1, const ArrayLayout& layout,
                   const MotionConfig& cfg) {
  cfg.validate();
  if (!(scan_t.geometry() == scan_t1.geometry())) throw DataError("trec: scans differ in dimensions");
  if (layout.count() == 0) throw DataError("trec: empty layout");
  if (!(layout.grid == scan_t.geometry())) throw DataError("trec: layout built for a different grid");

  const int half = layout.array_size / 2;
  const int side = layout.array_size;
  const std::size_t cells = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  const std::size_t max_missing = static_cast<std::size_t>(kMaxMissingFraction * static_cast<double>(cells));
  const double cell = scan_t.cell_size();
  const int R = cfg.search_radius;

  VelocityField out;
  out.lattice = layout.lattice;
  out.raw.assign(layout.count(), Point{});
  out.correlation.assign(layout.count(), std::numeric_limits<double>::quiet_NaN());
  out.valid.assign(layout.count(), false);

  std::vector<double> src(cells);
  std::vector<double> dst(cells);
  std::vector<char> present(cells);

  for (std::size_t i = 0; i < layout.count(); ++i) {
    const int pc = layout.center_cols[i];
    const int pr = layout.center_rows[i];

    std::size_t na = 0;
    std::size_t k = 0;
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx, ++k) {
        const double v = scan_t.at(pc + dx, pr + dy);
        if (is_missing(v)) {
          ++na;
          src[k] = 0.0;
        } else {
          src[k] = v;
        }
      }
    }
    if (na > max_missing) continue;
    {
      double mean = 0.0;
      for (double v : src) mean += v;
      mean /= static_cast<double>(cells);
      double var = 0.0;
      for (double v : src) var += (v - mean) * (v - mean);
      var /= static_cast<double>(cells);
      if (var < cfg.min_patch_variance || var == 0.0) continue;
    }

    Candidate best;
    for (int ly = -R; ly <= R; ++ly) {
      for (int lx = -R; lx <= R; ++lx) {
        // Off-grid cells are dropped pairwise; missing cells count as 0 dBZ.
        std::size_t inside = 0;
        std::size_t missing = 0;
        k = 0;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx, ++k) {
            const int c = pc + lx + dx;
            const int r = pr + ly + dy;
            if (!scan_t1.contains(c, r)) {
              present[k] = 0;
              continue;
            }
            present[k] = 1;
            ++inside;
            const double v = scan_t1.at(c, r);
            if (is_missing(v)) {
              ++missing;
              dst[k] = 0.0;
            } else {
              dst[k] = v;
            }
          }
        }
        if (cells - inside + missing > max_missing) continue;

        double ma = 0.0, mb = 0.0;
        for (std::size_t j = 0; j < cells; ++j) {
          if (!present[j]) continue;
          ma += src[j];
          mb += dst[j];
        }
        ma /= static_cast<double>(inside);
        mb /= static_cast<double>(inside);
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t j = 0; j < cells; ++j) {
          if (!present[j]) continue;
          const double a = src[j] - ma;
          const double b = dst[j] - mb;
          sab += a * b;
          saa += a * a;
          sbb += b * b;
        }
        if (saa <= 0.0 || sbb <= 0.0) continue;
        Candidate c{std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), lx, ly, true};
        if (better(c, best)) best = c;
      }
    }
    if (!best.found) continue;
    out.correlation[i] = best.r;
    if (best.r < cfg.min_valid_correlation) continue;
    out.raw[i] = {best.dx * cell, best.dy * cell};
    out.valid[i] = true;
  }
  out.smooth = out.raw;
  return out;
}

double divergence_penalty(std::span<const Point> field, int rows, int cols) {
  if (field.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DataError("divergence_penalty: field size does not match lattice");
  }
  auto at = [&](int r, int c) { return field[static_cast<std::size_t>(r) * cols + c]; };
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double du = 0.0, dv = 0.0;
      if (cols > 1) {
        if (c == 0) du = at(r, 1).x - at(r, 0).x;
        else if (c == cols - 1) du = at(r, c).x - at(r, c - 1).x;
        else du = 0.5 * (at(r, c + 1).x - at(r, c - 1).x);
      }
      if (rows > 1) {
        if (r == 0) dv = at(1, c).y - at(0, c).y;
        else if (r == rows - 1) dv = at(r, c).y - at(r - 1, c).y;
        else dv = 0.5 * (at(r + 1, c).y - at(r - 1, c).y);
      }
      total += (du + dv) * (du + dv);
    }
  }
  return total;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Divergence operator D (n x 2n) acting on [u; v].
SpMat divergence_operator(int rows, int cols) {
  const int n = rows * cols;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n) * 4);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int k = r * cols + c;
      if (cols > 1) {
        if (c == 0) {
          t.emplace_back(k, k + 1, 1.0);
          t.emplace_back(k, k, -1.0);
        } else if (c == cols - 1) {
          t.emplace_back(k, k, 1.0);
          t.emplace_back(k, k - 1, -1.0);
        } else {
          t.emplace_back(k, k + 1, 0.5);
          t.emplace_back(k, k - 1, -0.5);
        }
      }
      if (rows > 1) {
        if (r == 0) {
          t.emplace_back(k, n + k + cols, 1.0);
          t.emplace_back(k, n + k, -1.0);
        } else if (r == rows - 1) {
          t.emplace_back(k, n + k, 1.0);
          t.emplace_back(k, n + k - cols, -1.0);
        } else {
          t.emplace_back(k, n + k + cols, 0.5);
          t.emplace_back(k, n + k - cols, -0.5);
        }
      }
    }
  }
  SpMat d(n, 2 * n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

// Harmonic infill of invalid nodes from their 4-neighbours. A tiny diagonal
// anchor sends components with no valid node to zero.
std::vector<Point> harmonic_infill(const VelocityField& f) {
  const int rows = f.lattice.rows;
  const int cols = f.lattice.cols;
  const int n = rows * cols;
  std::vector<Point> out = f.raw;

  std::vector<int> slot(n, -1);
  int m = 0;
  for (int k = 0; k < n; ++k) {
    if (!f.valid[k]) slot[k] = m++;
  }
  if (m == 0) return out;
  if (m == n) {
    std::fill(out.begin(), out.end(), Point{});
    return out;
  }

  std::vector<Triplet> t;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
  constexpr double kAnchor = 1e-9;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int k = r * cols + c;
      if (slot[k] < 0) continue;
      const int s = slot[k];
      double deg = kAnchor;
      const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[0] >= rows || p[1] < 0 || p[1] >= cols) continue;
        const int j = p[0] * cols + p[1];
        deg += 1.0;
        if (slot[j] >= 0) {
          t.emplace_back(s, slot[j], -1.0);
        } else {
          rhs(s, 0) += f.raw[j].x;
          rhs(s, 1) += f.raw[j].y;
        }
      }
      t.emplace_back(s, s, deg);
    }
  }
  SpMat a(m, m);
  a.setFromTriplets(t.begin(), t.end());
  Eigen::SimplicialLDLT<SpMat> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("harmonic infill: factorization failed");
  const Eigen::MatrixXd sol = solver.solve(rhs);
  for (int k = 0; k < n; ++k) {
    if (slot[k] >= 0) out[k] = {sol(slot[k], 0), sol(slot[k], 1)};
  }
  return out;
}

}  // namespace

VelocityField smooth_velocity(const VelocityField& raw, const MotionConfig& cfg) {
  cfg.validate();
  const int rows = raw.lattice.rows;
  const int cols = raw.lattice.cols;
  const int n = rows * cols;
  if (n == 0 || raw.raw.size() != static_cast<std::size_t>(n) || raw.valid.size() != raw.raw.size()) {
    throw DataError("smooth_velocity: field does not match its lattice");
  }

  VelocityField out = raw;
  const std::vector<Point> filled = harmonic_infill(raw);
  if (cfg.lambda == 0.0) {
    out.smooth = filled;
    return out;
  }

  // Invalid nodes keep a weak pull toward their harmonic infill so the
  // system stays positive definite on divergence-free null directions.
  constexpr double kInfillWeight = 1e-3;
  Eigen::VectorXd target(2 * n), weight(2 * n);
  for (int k = 0; k < n; ++k) {
    target[k] = filled[k].x;
    target[n + k] = filled[k].y;
    const double w = raw.valid[k] ? 1.0 : kInfillWeight;
    weight[k] = w;
    weight[n + k] = w;
  }

  const SpMat d = divergence_operator(rows, cols);
  SpMat a = SpMat(d.transpose() * d) * cfg.lambda;
  for (int k = 0; k < 2 * n; ++k) a.coeffRef(k, k) += weight[k];
  a.makeCompressed();
  const Eigen::VectorXd b = weight.cwiseProduct(target);

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(cfg.tolerance);
  cg.setMaxIterations(cfg.max_iterations);
  cg.compute(a);
  const Eigen::VectorXd x = cg.solveWithGuess(b, target);
  if (cg.info() != Eigen::Success) throw NumericalError("smooth_velocity: CG did not converge");

  for (int k = 0; k < n; ++k) out.smooth[k] = {x[k], x[n + k]};
  return out;
}

TrackState translate(const TrackState& track, const VelocityField& field, int m) {
  if (m != 1 && m != -1) throw DataError("translate: |m| must be 1 per call");
  if (track.times() == 0) throw DataError("translate: empty track");
  TrackState out = track;
  if (m == 1) {
    const auto& cur = track.latest();
    std::vector<Point> next(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] + field.at(cur[i]);
    out.positions.push_back(std::move(next));
    return out;
  }
  if (track.times() < 2) throw DataError("translate: no earlier state for inverse translation at t = 1");
  const auto& later = track.positions[track.times() - 1];
  const auto& earlier = track.positions[track.times() - 2];
  std::vector<Point> prev(later.size());
  for (std::size_t i = 0; i < later.size(); ++i) prev[i] = later[i] - field.at(earlier[i]);
  out.positions.pop_back();
  out.positions.back() = std::move(prev);
  return out;
}

Point back_trace(Point x, const VelocityField& field, int steps) {
  for (int s = 0; s < steps; ++s) {
    Point y = x - field.at(x);
    for (int it = 0; it < 50; ++it) {
      const Point next = x - field.at(y);
      const bool done = squared_norm(next - y) < 1e-24;
      y = next;
      if (done) break;
    }
    x = y;
  }
  return x;
}

}  // namespace nowcast
