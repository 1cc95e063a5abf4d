#pragma once

// Maximum/minimum modulus, Nevanlinna characteristic and zero counting on
// circles |z| = r. Every quantity that can exceed double range is carried as a
// logarithm with an explicit flag.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/parallel.hpp"

namespace dynlab {

struct ModulusResult {
  double log_value = 0.0;  // log M or log L; -inf when the extremum is a zero
  double theta = 0.0;      // argument where the extremum was found
  bool log_domain = false; // true when exp(log_value) overflows

  double value() const {
    if (log_domain) return std::numeric_limits<double>::infinity();
    return std::exp(log_value);
  }
};

namespace detail {

inline double log_modulus_on_circle(const FunctionSpec& f, double log_r, double theta) {
  return evaluate_log(f, log_r, theta).log_abs();
}

// Golden-section maximization of g on [a, b].
inline std::pair<double, double> golden_max(const std::function<double(double)>& g, double a, double b) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    if (gc >= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - invphi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + invphi * (b - a);
      gd = g(d);
    }
  }
  return gc >= gd ? std::pair{c, gc} : std::pair{d, gd};
}

// Sweep + golden-section refinement around the best 3 samples of sign*log|f|.
inline ModulusResult circle_extremum(const FunctionSpec& f, double r, int resolution, double sign) {
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  require(resolution >= 64, ErrorKind::InvalidArgument, "resolution must be >= 64");
  const double log_r = std::log(r);
  auto g = [&](double t) { return sign * log_modulus_on_circle(f, log_r, t); };
  std::vector<double> vals(static_cast<std::size_t>(resolution));
  auto theta_of = [&](std::size_t i) { return -kPi + kTwoPi * static_cast<double>(i) / resolution; };
  if (resolution >= 8192) {
    parallel_for(vals.size(), [&](std::size_t i) { vals[i] = g(theta_of(i)); });
  } else {
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = g(theta_of(i));
  }
  std::vector<std::size_t> idx(vals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + 3, idx.end(),
                    [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  double best_t = theta_of(idx[0]);
  double best_v = vals[idx[0]];
  const double h = kTwoPi / resolution;
  for (int k = 0; k < 3; ++k) {
    if (std::isinf(best_v) && best_v > 0) break;  // hit a zero exactly
    double t0 = theta_of(idx[k]);
    auto [t, v] = golden_max(g, t0 - h, t0 + h);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  ModulusResult res;
  res.log_value = sign * best_v;
  res.theta = wrap_angle(best_t);
  res.log_domain = res.log_value > kLogDoubleMax;
  return res;
}

// Periodic trapezoid mean of integrand(log|f(r e^{it})|) with adaptive doubling.
inline double circle_mean(const FunctionSpec& f, double r, int start_points, const std::function<double(double)>& integrand,
                          std::size_t max_points) {
  const double log_r = std::log(r);
  auto sum_range = [&](std::size_t n, std::size_t offset_num, std::size_t stride) {
    // sum over j of integrand at theta = 2 pi (stride*j + offset_num) / n, in fixed blocks
    std::size_t count = n / stride;
    constexpr std::size_t kBlock = 4096;
    std::size_t blocks = (count + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks, 0.0);
    auto body = [&](std::size_t b) {
      double s = 0.0;
      std::size_t hi = std::min(count, (b + 1) * kBlock);
      for (std::size_t j = b * kBlock; j < hi; ++j) {
        double t = kTwoPi * static_cast<double>(stride * j + offset_num) / static_cast<double>(n);
        s += integrand(log_modulus_on_circle(f, log_r, t));
      }
      partial[b] = s;
    };
    if (blocks > 1) parallel_for(blocks, body);
    else if (blocks == 1) body(0);
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
  };
  std::size_t n = static_cast<std::size_t>(start_points);
  double total = sum_range(n, 0, 1);
  double mean = total / static_cast<double>(n);
  while (2 * n <= max_points) {
    double mid = sum_range(2 * n, 1, 2);
    total += mid;
    n *= 2;
    double next = total / static_cast<double>(n);
    bool done = std::abs(next - mean) <= 1e-8 * std::abs(next) + 1e-15;
    mean = next;
    if (done) return mean;
  }
  throw Error(ErrorKind::NonConvergence, "circle quadrature did not converge before the point cap");
}

}  // namespace detail

/// M(r, f) = max_{|z|=r} |f(z)|.
inline ModulusResult max_modulus(const FunctionSpec& f, double r, int resolution = 1024) {
  return detail::circle_extremum(f, r, resolution, +1.0);
}

/// L(r, f) = min_{|z|=r} |f(z)|.
inline ModulusResult min_modulus(const FunctionSpec& f, double r, int resolution = 1024) {
  return detail::circle_extremum(f, r, resolution, -1.0);
}

inline constexpr std::size_t kDefaultQuadratureCap = std::size_t{1} << 22;

/// T(r, f) for entire f: the circle mean of log+|f|.
inline double characteristic_T(const FunctionSpec& f, double r, int quadrature_points = 256,
                               std::size_t max_points = kDefaultQuadratureCap) {
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  require(quadrature_points >= 256, ErrorKind::InvalidArgument, "quadrature_points must be >= 256");
  return detail::circle_mean(f, r, quadrature_points, [](double lm) { return lm > 0.0 ? lm : 0.0; }, max_points);
}

/// m(r, 1/f): the circle mean of log+(1/|f|).
inline double proximity_to_zero(const FunctionSpec& f, double r, int quadrature_points = 256,
                                std::size_t max_points = kDefaultQuadratureCap) {
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  return detail::circle_mean(
      f, r, quadrature_points,
      [](double lm) {
        if (std::isinf(lm)) throw Error(ErrorKind::ZeroOnContour, "quadrature node hit a zero");
        return lm < 0.0 ? -lm : 0.0;
      },
      max_points);
}

/// n(r, 0) by the argument principle: (1/2 pi i) contour integral of f'/f.
inline int count_zeros(const FunctionSpec& f, double r) {
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  for (cplx z : known_zeros(f, r * (1.0 + 2e-6)))
    if (std::abs(std::abs(z) - r) < 1e-6 * r)
      throw Error(ErrorKind::ZeroOnContour, "a zero lies within 1e-6 r of the circle");
  auto mean_over = [&](std::size_t n, std::size_t offset, std::size_t stride) {
    cplx s(0.0, 0.0);
    for (std::size_t j = offset; j < n; j += stride) {
      cplx z = std::polar(r, kTwoPi * static_cast<double>(j) / static_cast<double>(n));
      try {
        s += z * log_derivative(f, z);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NearZeroDivision) throw Error(ErrorKind::ZeroOnContour, e.what());
        throw;
      }
    }
    return s;
  };
  std::size_t n = 256;
  cplx total = mean_over(n, 0, 1);
  cplx prev = total / static_cast<double>(n);
  while (n < (std::size_t{1} << 20)) {
    total += mean_over(2 * n, 1, 2);
    n *= 2;
    cplx cur = total / static_cast<double>(n);
    double nearest = std::round(cur.real());
    if (std::abs(cur - prev) < 1e-6 && std::abs(cur.real() - nearest) < 0.1 && std::abs(cur.imag()) < 0.1)
      return static_cast<int>(nearest);
    prev = cur;
  }
  throw Error(ErrorKind::NonIntegerResidue, "argument-principle quadrature did not settle on an integer");
}

/// N(r, 0) = sum over zeros |z_j| <= r of log(r/|z_j|), plus n(0) log r.
inline double integrated_counting(const FunctionSpec& f, double r) {
  double s = 0.0;
  for (cplx z : known_zeros(f, r)) {
    double a = std::abs(z);
    s += (a == 0.0) ? std::log(r) : std::log(r / a);
  }
  return s;
}

struct RadiusProfile {
  double r = 0.0;
  double log_M = 0.0;
  double log_L = 0.0;
  double T = 0.0;
  int n0 = 0;
  double N0 = 0.0;
  int samples_per_circle = 0;
  bool refined = true;
  bool M_log_domain = false;
  bool L_log_domain = false;
  bool ok = true;
  std::string error;
};

inline RadiusProfile radius_profile(const FunctionSpec& f, double r, int resolution = 1024) {
  RadiusProfile p;
  p.r = r;
  p.samples_per_circle = resolution;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    auto M = max_modulus(f, r, resolution);
    p.log_M = M.log_value;
    p.M_log_domain = M.log_domain;
    auto L = min_modulus(f, r, resolution);
    p.log_L = L.log_value;
    p.L_log_domain = L.log_value > kLogDoubleMax || L.log_value < -kLogDoubleMax;
    p.T = characteristic_T(f, r);
  } catch (const Error& e) {
    p.ok = false;
    p.error = e.what();
    p.T = std::isfinite(p.T) ? p.T : nan;
    return p;
  }
  try {
    p.N0 = integrated_counting(f, r);
    p.n0 = count_zeros(f, r);
  } catch (const Error& e) {
    p.ok = false;
    p.error = e.what();
  }
  return p;
}

/// Both sides of T(r) <= log+ M(r) <= (R + r)/(R - r) T(R) for R > r.
struct GrowthSandwich {
  bool lower = false;
  bool upper = false;
  bool holds() const { return lower && upper; }
};

inline GrowthSandwich check_growth_sandwich(double r, double T_r, double log_M_r, double R, double T_R) {
  double lp = std::max(0.0, log_M_r);
  GrowthSandwich s;
  s.lower = T_r <= lp * (1.0 + 1e-7) + 1e-9;
  s.upper = lp <= (R + r) / (R - r) * T_R * (1.0 + 1e-7) + 1e-9;
  return s;
}

/// Three-point convexity of log M in log r over consecutive profiles.
inline bool hadamard_convex(const std::vector<RadiusProfile>& profiles, double rel_tol = 1e-6) {
  for (std::size_t i = 1; i + 1 < profiles.size(); ++i) {
    const auto &a = profiles[i - 1], &b = profiles[i], &c = profiles[i + 1];
    if (!a.ok || !b.ok || !c.ok) continue;
    double xa = std::log(a.r), xb = std::log(b.r), xc = std::log(c.r);
    double w = (xb - xa) / (xc - xa);
    double chord = (1.0 - w) * a.log_M + w * c.log_M;
    if (b.log_M > chord + rel_tol * std::max(1.0, std::abs(chord))) return false;
  }
  return true;
}

struct NevanlinnaCheck {
  double r = 0.0;
  double T = 0.0;       // T(r, f) of the normalized function
  double N = 0.0;       // N(r, 0)
  double m_inv = 0.0;   // m(r, 1/f)
  double residual = 0.0;
  double tolerance = 0.0;
  bool identity_ok = false;
  double log_plus_M = 0.0;
  double T_2r = 0.0;
  GrowthSandwich sandwich;
};

/// First fundamental theorem residual |T - N - m(r,1/f)| after rescaling f(0)
/// to 1, plus the growth sandwich with R = 2r.
inline NevanlinnaCheck nevanlinna_identity_check(const FunctionSpec& f, double r) {
  require(r > 1.0, ErrorKind::InvalidArgument, "nevanlinna_identity_check needs r > 1");
  cplx f0 = evaluate(f, 0.0);
  FunctionSpec g = normalized(f);
  NevanlinnaCheck c;
  c.r = r;
  c.T = characteristic_T(g, r);
  c.N = integrated_counting(g, r);
  c.m_inv = proximity_to_zero(g, r);
  c.residual = std::abs(c.T - c.N - c.m_inv);
  c.tolerance = 1.0 + std::abs(std::log(std::abs(f0)));
  c.identity_ok = c.residual <= c.tolerance;
  c.log_plus_M = std::max(0.0, max_modulus(g, r).log_value);
  c.T_2r = characteristic_T(g, 2.0 * r);
  c.sandwich = check_growth_sandwich(r, c.T, c.log_plus_M, 2.0 * r, c.T_2r);
  return c;
}

}  // namespace dynlab
