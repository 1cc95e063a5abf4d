#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numerics.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "dynlab/fractal_dimension.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Composite 8-point Gauss-Legendre on [a, b] with `panels` panels.
inline double gauss_legendre(const std::function<double(double)>& g, double a, double b, int panels) {
  static const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  double h = (b - a) / panels, sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    double mid = a + (p + 0.5) * h, half = 0.5 * h;
    for (int k = 0; k < 4; ++k) sum += w[k] * half * (g(mid - half * x[k]) + g(mid + half * x[k]));
  }
  return sum;
}

// (1/2pi) int_0^{2pi} g(theta) d theta, split at the given breakpoints.
inline double circle_mean(const std::function<double(double)>& g, std::vector<double> breaks = {}, int panels = 64) {
  breaks.push_back(0.0);
  breaks.push_back(2 * kPi);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) s += gauss_legendre(g, breaks[i], breaks[i + 1], panels);
  return s / (2 * kPi);
}

inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  double glo = g(lo);
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi), gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Fixed point of x = lambda e^x by plain iteration.
inline double exp_fixed_point(double lambda, int iters = 2000) {
  double x = 0.0;
  for (int i = 0; i < iters; ++i) x = lambda * std::exp(x);
  return x;
}

// ---------------------------------------------------------------------------
// Rasterizers on the grid of cells [x0 + i e, x0 + (i+1) e] x [y0 + j e, ...].

inline dynlab::Mask filled_square(double eps) {  // unit square [0,1]^2
  int n = static_cast<int>(std::lround(1.0 / eps));
  return {n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 1)};
}

// Cells of [-2,2]^2 meeting the unit circle: min distance <= 1 <= max distance.
inline dynlab::Mask circle_cells(double eps) {
  int n = static_cast<int>(std::lround(4.0 / eps));
  dynlab::Mask m{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double ax = -2 + i * eps, bx = ax + eps, ay = -2 + j * eps, by = ay + eps;
      double nx = std::clamp(0.0, ax, bx), ny = std::clamp(0.0, ay, by);
      double fx = std::max(std::abs(ax), std::abs(bx)), fy = std::max(std::abs(ay), std::abs(by));
      double dmin = std::hypot(nx, ny), dmax = std::hypot(fx, fy);
      m.bits[static_cast<std::size_t>(j) * n + i] = dmin <= 1.0 && dmax >= 1.0;
    }
  return m;
}

// Dyadic intervals [i 2^-k, (i+1) 2^-k] meeting the depth-d middle-thirds construction.
inline std::set<long long> cantor_cells_1d(int depth, int k) {
  std::vector<std::pair<double, double>> iv{{0.0, 1.0}};
  for (int d = 0; d < depth; ++d) {
    std::vector<std::pair<double, double>> next;
    for (auto [a, b] : iv) {
      double t = (b - a) / 3.0;
      next.push_back({a, a + t});
      next.push_back({b - t, b});
    }
    iv.swap(next);
  }
  std::set<long long> cells;
  double s = std::ldexp(1.0, k);
  for (auto [a, b] : iv) {
    auto lo = static_cast<long long>(std::floor(a * s));
    auto hi = static_cast<long long>(std::ceil(b * s)) - 1;
    for (long long i = std::max(0LL, lo); i <= std::min(hi, static_cast<long long>(s) - 1); ++i) cells.insert(i);
  }
  return cells;
}

inline dynlab::Mask cantor_dust(int depth, int k) {
  auto c = cantor_cells_1d(depth, k);
  int n = 1 << k;
  dynlab::Mask m{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
  for (long long j : c)
    for (long long i : c) m.bits[static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i)] = 1;
  return m;
}

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
