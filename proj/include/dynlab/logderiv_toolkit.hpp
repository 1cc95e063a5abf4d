#pragma once

// Logarithmic-derivative estimates: the Goldberg bound, Cartan-type exclusion
// disks, the good-radius scan on T, and Koebe distortion checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/modulus_analysis.hpp"
#include "dynlab/parallel.hpp"

namespace dynlab {

/// R_m(r) = r (1 + m / (log T)^2).
inline double r_shell(double r, double m, double T) {
  if (!(T > kE)) throw Error(ErrorKind::DegenerateT, "shell radius needs T > e, got T = " + std::to_string(T));
  double lt = std::log(T);
  return r * (1.0 + m / (lt * lt));
}

struct GoldbergCheck {
  double bound = 0.0;
  double T_s = 0.0;
  double zero_term = 0.0;
  double actual = 0.0;  // |f'/f(z)|
  bool holds = false;
};

/// Right-hand side 4s/(s-|z|)^2 T(s,f) + sum 2/|z - z_j| together with |f'/f(z)|.
/// f is rescaled to f(0) = 1 when needed.
inline GoldbergCheck goldberg_check(const FunctionSpec& f, cplx z, double s, const std::vector<cplx>& zeros) {
  require(s > std::abs(z), ErrorKind::InvalidArgument, "goldberg bound needs s > |z|");
  FunctionSpec g = is_normalized(f) ? f : normalized(f);
  if (!is_normalized(g)) throw Error(ErrorKind::NormalizationError, "f(0) != 1 after rescaling");
  GoldbergCheck c;
  c.T_s = characteristic_T(g, s);
  double d = s - std::abs(z);
  for (cplx zj : zeros) {
    double dist = std::abs(z - zj);
    c.zero_term += dist == 0.0 ? std::numeric_limits<double>::infinity() : 2.0 / dist;
  }
  c.bound = 4.0 * s / (d * d) * c.T_s + c.zero_term;
  try {
    c.actual = std::abs(log_derivative(g, z));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NearZeroDivision) throw;
    c.actual = std::numeric_limits<double>::infinity();
  }
  c.holds = c.actual <= c.bound * (1.0 + 1e-9);
  return c;
}

inline double goldberg_bound(const FunctionSpec& f, cplx z, double s, const std::vector<cplx>& zeros) {
  return goldberg_check(f, z, s, zeros).bound;
}

// ---------------------------------------------------------------------------
// Exclusion disks

enum class ExclusionMode { QuadraticSum, LinearSum };

inline std::string to_string(ExclusionMode m) { return m == ExclusionMode::QuadraticSum ? "quadratic_sum" : "linear_sum"; }

struct Disk {
  cplx center;
  double radius = 0.0;
  bool contains(cplx z) const { return std::abs(z - center) <= radius; }
};

struct ExclusionDiskSet {
  ExclusionMode mode = ExclusionMode::QuadraticSum;
  double H = 1.0;
  int n = 0;
  std::vector<Disk> disks;
  double bound = 0.0;  // guaranteed value of sum 1/|z - z_k| outside the disks
  double budget = 0.0; // 4H^2 or 2H
  double budget_used = 0.0;

  bool excluded(cplx z) const {
    for (const auto& d : disks)
      if (d.contains(z)) return true;
    return false;
  }
};

namespace detail {

using Cell = std::pair<long long, long long>;

struct CellHash {
  std::size_t operator()(const Cell& c) const {
    auto h = static_cast<unsigned long long>(c.first) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<unsigned long long>(c.second) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using CellGrid = std::unordered_map<Cell, std::vector<std::size_t>, CellHash>;

// Maximum number of points covered by a closed disk of radius rho, and a center achieving it.
inline std::pair<int, cplx> max_cover(const std::vector<cplx>& pts, double rho) {
  const std::size_t m = pts.size();
  if (m == 0) return {0, cplx(0, 0)};
  const double tol = 1e-12 * std::max(rho, 1e-300);
  const double cell = 2.0 * rho;
  auto key = [&](cplx z) {
    auto ix = static_cast<long long>(std::floor(z.real() / cell));
    auto iy = static_cast<long long>(std::floor(z.imag() / cell));
    return Cell{ix, iy};
  };
  CellGrid grid;
  for (std::size_t i = 0; i < m; ++i) grid[key(pts[i])].push_back(i);
  std::vector<int> best(m, 1);
  std::vector<cplx> best_c(pts);
  parallel_for(m, [&](std::size_t i) {
    cplx p = pts[i];
    auto [x, y] = key(p);
    std::vector<std::pair<double, int>> events;
    int coincident = 0;
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(Cell{x + dx, y + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j == i) continue;
          cplx d = pts[j] - p;
          double dist = std::abs(d);
          if (dist > 2.0 * rho + tol) continue;
          if (dist <= tol) {
            ++coincident;
            continue;
          }
          // centers c = p + rho e^{it} with |c - q| <= rho form an arc around arg(d)
          double half = std::acos(std::min(1.0, dist / (2.0 * rho)));
          double a = std::arg(d);
          events.emplace_back(a - half, +1);
          events.emplace_back(a + half, -1);
        }
      }
    // normalize start angles into [-pi, pi) and count arcs that wrap
    int active = 0;
    std::vector<std::pair<double, int>> ev;
    ev.reserve(events.size() + 2);
    for (std::size_t k = 0; k < events.size(); k += 2) {
      double s = events[k].first, e = events[k + 1].first;
      double shift = std::floor((s + kPi) / kTwoPi) * kTwoPi;
      s -= shift;
      e -= shift;
      ev.emplace_back(s, +1);
      if (e >= kPi) {
        ev.emplace_back(kPi, -1);
        ++active;  // the wrapped tail [-pi, e - 2pi] is active from the start
        ev.emplace_back(e - kTwoPi, -1);
      } else {
        ev.emplace_back(e, -1);
      }
    }
    std::sort(ev.begin(), ev.end(), [](const auto& l, const auto& r) {
      return l.first < r.first || (l.first == r.first && l.second > r.second);
    });
    int top = active;
    double top_angle = -kPi;
    for (const auto& [ang, delta] : ev) {
      active += delta;
      if (active > top) {
        top = active;
        top_angle = ang;
      }
    }
    best[i] = 1 + coincident + top;
    best_c[i] = top > 0 ? p + std::polar(rho, top_angle) : p;
  });
  std::size_t arg = static_cast<std::size_t>(std::max_element(best.begin(), best.end()) - best.begin());
  return {best[arg], best_c[arg]};
}

inline bool in_circle(cplx z, const Disk& d) { return std::abs(z - d.center) <= d.radius * (1.0 + 1e-12) + 1e-300; }

inline Disk circle_from(cplx a, cplx b) { return {(a + b) / 2.0, std::abs(a - b) / 2.0}; }

inline Disk circle_from(cplx a, cplx b, cplx c) {
  cplx ba = b - a, ca = c - a;
  double d = 2.0 * (ba.real() * ca.imag() - ba.imag() * ca.real());
  if (std::abs(d) < 1e-300) {
    Disk best = circle_from(a, b);
    for (auto cand : {circle_from(a, c), circle_from(b, c)})
      if (cand.radius > best.radius) best = cand;
    return best;
  }
  double nb = std::norm(ba), nc = std::norm(ca);
  cplx u((ca.imag() * nb - ba.imag() * nc) / d, (ba.real() * nc - ca.real() * nb) / d);
  return {a + u, std::abs(u)};
}

// Minimal enclosing circle (Welzl, iterative form over a shuffled copy).
inline Disk enclosing_circle(std::vector<cplx> pts) {
  std::mt19937_64 rng(0x5eed);
  std::shuffle(pts.begin(), pts.end(), rng);
  Disk c{pts.empty() ? cplx(0, 0) : pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (in_circle(pts[i], c)) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (in_circle(pts[j], c)) continue;
      c = circle_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k)
        if (!in_circle(pts[k], c)) c = circle_from(pts[i], pts[j], pts[k]);
    }
  }
  return c;
}

}  // namespace detail

/// Greedy Cartan construction. Outside the returned disks
/// sum 1/|z - z_k| <= 2n/H (quadratic mode) or n(1 + log n)/H (linear mode).
inline ExclusionDiskSet fuchs_macintyre_disks(const std::vector<cplx>& zeros, double H, ExclusionMode mode,
                                              std::size_t cap = 10000) {
  const std::size_t n = zeros.size();
  require(n >= 1, ErrorKind::InvalidArgument, "need at least one zero");
  require(n <= cap, ErrorKind::InvalidArgument, "zero count exceeds the configured cap");
  require(H > 0.0, ErrorKind::InvalidArgument, "H must be positive");
  const double dn = static_cast<double>(n);
  ExclusionDiskSet out;
  out.mode = mode;
  out.H = H;
  out.n = static_cast<int>(n);
  std::function<double(double)> rho;
  if (mode == ExclusionMode::QuadraticSum) {
    double s = 0.0;
    for (std::size_t k = 1; k <= n; ++k) s += 1.0 / std::sqrt(static_cast<double>(k));
    double c = s / (2.0 * std::sqrt(dn));
    rho = [=](double j) { return c * H * std::sqrt(j / dn); };
    out.bound = 2.0 * dn / H;
    out.budget = 4.0 * H * H;
  } else {
    double hn = 0.0;
    for (std::size_t k = 1; k <= n; ++k) hn += 1.0 / static_cast<double>(k);
    double c = hn / (1.0 + std::log(dn));
    rho = [=](double j) { return c * H * j / dn; };
    out.bound = dn * (1.0 + std::log(dn)) / H;
    out.budget = 2.0 * H;
  }
  std::vector<cplx> rest = zeros;
  while (!rest.empty()) {
    int j = static_cast<int>(rest.size());
    std::pair<int, cplx> cover = detail::max_cover(rest, rho(j));
    while (cover.first < j) {
      j = std::min(j - 1, cover.first);
      cover = detail::max_cover(rest, rho(j));
    }
    double rj = rho(j);
    std::vector<cplx> taken, kept;
    for (cplx z : rest)
      (std::abs(z - cover.second) <= rj * (1.0 + 1e-12) ? taken : kept).push_back(z);
    Disk mec = detail::enclosing_circle(taken);
    out.disks.push_back({mec.center, mec.radius + rj});
    rest.swap(kept);
  }
  for (const auto& d : out.disks)
    out.budget_used += mode == ExclusionMode::QuadraticSum ? d.radius * d.radius : d.radius;
  if (out.disks.size() > n || out.budget_used > out.budget * (1.0 + 1e-12))
    throw Error(ErrorKind::BudgetExceeded, "exclusion disks exceed the radius budget");
  return out;
}

struct ExclusionVerification {
  std::size_t samples_checked = 0;
  double max_sum = 0.0;
  cplx argmax;
  bool holds = true;
};

/// Monte Carlo check of the sum bound: uniform samples over a disk covering the
/// zeros and all exclusion disks, plus points just outside every disk boundary.
inline ExclusionVerification verify_exclusion(const ExclusionDiskSet& set, const std::vector<cplx>& zeros,
                                              std::size_t samples = 10000, std::uint64_t seed = 1) {
  cplx centroid(0, 0);
  for (cplx z : zeros) centroid += z;
  centroid /= static_cast<double>(zeros.size());
  double R = 0.0;
  for (cplx z : zeros) R = std::max(R, std::abs(z - centroid));
  for (const auto& d : set.disks) R = std::max(R, std::abs(d.center - centroid) + d.radius);
  R = R * 1.5 + set.H;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<cplx> pts;
  pts.reserve(samples + 64 * set.disks.size());
  for (std::size_t i = 0; i < samples; ++i)
    pts.push_back(centroid + std::polar(R * std::sqrt(U(rng)), kTwoPi * U(rng)));
  for (const auto& d : set.disks)
    for (int k = 0; k < 64; ++k) pts.push_back(d.center + std::polar(d.radius * (1.0 + 1e-9), kTwoPi * k / 64.0));
  std::vector<double> sums(pts.size(), -1.0);
  parallel_for(pts.size(), [&](std::size_t i) {
    if (set.excluded(pts[i])) return;
    double s = 0.0;
    for (cplx z : zeros) s += 1.0 / std::abs(pts[i] - z);
    sums[i] = s;
  });
  ExclusionVerification v;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (sums[i] < 0.0) continue;
    ++v.samples_checked;
    if (sums[i] > v.max_sum) {
      v.max_sum = sums[i];
      v.argmax = pts[i];
    }
  }
  v.holds = v.max_sum <= set.bound * (1.0 + 1e-12);
  return v;
}

// ---------------------------------------------------------------------------
// Good radii

struct GoodRadius {
  double r = 0.0;
  double T_r = 0.0;
  double R6 = 0.0;
  double T_R6 = 0.0;
  bool good = false;
  double log_M = std::numeric_limits<double>::quiet_NaN();
  bool max_modulus_bound = false;  // log M(r) <= T(r) (log T(r))^2, tested on good radii
};

struct GoodRadiusScan {
  std::vector<GoodRadius> radii;
  std::string phi_spec = "phi(x) = x^2/6, R6(r) = r(1 + 6/(log T(r))^2)";
  double exceptional_log_measure_estimate = 0.0;

  bool all_good() const {
    return std::all_of(radii.begin(), radii.end(), [](const GoodRadius& g) { return g.good; });
  }
};

/// Scan over a sorted radius grid with T and (optionally) log M given as callables.
inline GoodRadiusScan good_radius_scan(const std::function<double(double)>& T, const std::vector<double>& r_grid,
                                       const std::function<double(double)>& log_M = {}) {
  require(!r_grid.empty(), ErrorKind::InvalidArgument, "empty radius grid");
  require(std::is_sorted(r_grid.begin(), r_grid.end()), ErrorKind::InvalidArgument, "radius grid must be sorted");
  GoodRadiusScan scan;
  for (double r : r_grid) {
    GoodRadius g;
    g.r = r;
    g.T_r = T(r);
    g.R6 = r_shell(r, 6.0, g.T_r);
    g.T_R6 = T(g.R6);
    g.good = g.T_R6 <= kE * g.T_r;
    if (g.good && log_M) {
      g.log_M = log_M(r);
      double lt = std::log(g.T_r);
      g.max_modulus_bound = g.log_M <= g.T_r * lt * lt;
    }
    scan.radii.push_back(g);
  }
  for (std::size_t i = 0; i < scan.radii.size(); ++i) {
    if (scan.radii[i].good) continue;
    double w = 0.0;
    if (i + 1 < scan.radii.size()) w = std::log(scan.radii[i + 1].r / scan.radii[i].r);
    else if (i > 0) w = std::log(scan.radii[i].r / scan.radii[i - 1].r);
    scan.exceptional_log_measure_estimate += w;
  }
  return scan;
}

inline GoodRadiusScan good_radius_scan(const FunctionSpec& f, const std::vector<double>& r_grid) {
  return good_radius_scan([&](double r) { return characteristic_T(f, r); }, r_grid,
                          [&](double r) { return max_modulus(f, r).log_value; });
}

// ---------------------------------------------------------------------------
// Koebe distortion

struct UnivalentMap {
  std::function<cplx(cplx)> g;
  std::function<cplx(cplx)> dg;
  cplx a;
  double r = 1.0;
};

struct KoebeReport {
  double lambda = 0.0;
  int samples = 0;
  double ratio_min = 0.0, ratio_max = 0.0;  // |g(z) - g(a)| / (|z - a| |g'(a)|)
  double ratio_lo = 0.0, ratio_hi = 0.0;
  double deriv_min = 0.0, deriv_max = 0.0;  // |g'(z)| / |g'(a)|
  double deriv_lo = 0.0, deriv_hi = 0.0;
  bool distortion_ok = false;
  bool derivative_ok = false;
  int quarter_rays = 0;
  int quarter_hits = 0;
  bool quarter_ok = false;

  bool ok() const { return distortion_ok && derivative_ok && quarter_ok; }
};

namespace detail {

// Solve g(z) = w by continuation along the segment g(a) -> w, starting at z = a.
inline bool invert_along_ray(const UnivalentMap& m, cplx w, cplx& z_out) {
  cplx ga = m.g(m.a);
  cplx z = m.a;
  constexpr int kSteps = 32;
  for (int s = 1; s <= kSteps; ++s) {
    cplx target = ga + (w - ga) * (static_cast<double>(s) / kSteps);
    bool conv = false;
    for (int it = 0; it < 100; ++it) {
      cplx d = m.dg(z);
      if (std::abs(d) == 0.0) return false;
      cplx step = (m.g(z) - target) / d;
      z -= step;
      if (!(std::abs(z - m.a) < m.r)) return false;
      if (std::abs(m.g(z) - target) <= 1e-10 * std::max(1.0, std::abs(target))) {
        conv = true;
        break;
      }
    }
    if (!conv) return false;
  }
  z_out = z;
  return true;
}

}  // namespace detail

/// Sampled check of both distortion sandwiches on the closed disk D(a, lambda r)
/// and of the one-quarter inclusion along `rays` rays.
inline KoebeReport koebe_check(const UnivalentMap& m, double lambda, int samples = 512, int rays = 50,
                               std::uint64_t seed = 7) {
  require(lambda > 0.0 && lambda < 1.0, ErrorKind::InvalidArgument, "lambda must be in (0, 1)");
  require(samples >= 8, ErrorKind::InvalidArgument, "need at least 8 samples");
  const double slack = 1e-9;
  KoebeReport rep;
  rep.lambda = lambda;
  rep.samples = samples;
  rep.ratio_lo = 1.0 / ((1 + lambda) * (1 + lambda));
  rep.ratio_hi = 1.0 / ((1 - lambda) * (1 - lambda));
  rep.deriv_lo = (1 - lambda) / std::pow(1 + lambda, 3);
  rep.deriv_hi = (1 + lambda) / std::pow(1 - lambda, 3);

  std::vector<cplx> zs;
  int boundary = samples / 2;
  for (int k = 0; k < boundary; ++k) zs.push_back(m.a + std::polar(lambda * m.r, kPi + kTwoPi * k / boundary));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (static_cast<int>(zs.size()) < samples)
    zs.push_back(m.a + std::polar(lambda * m.r * std::sqrt(U(rng)), kTwoPi * U(rng)));

  std::vector<cplx> img(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) img[i] = m.g(zs[i]);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (std::size_t j = i + 1; j < img.size(); ++j)
      if (std::abs(img[i] - img[j]) <= 1e-14 * (std::abs(img[i]) + std::abs(img[j])) && zs[i] != zs[j])
        throw Error(ErrorKind::InjectivityViolation, "two sample points share an image");

  cplx ga = m.g(m.a);
  double dga = std::abs(m.dg(m.a));
  require(dga > 0.0, ErrorKind::InjectivityViolation, "g'(a) = 0");
  rep.ratio_min = rep.deriv_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = rep.deriv_max = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    double dz = std::abs(zs[i] - m.a);
    if (dz > 0.0) {
      double q = std::abs(img[i] - ga) / (dz * dga);
      rep.ratio_min = std::min(rep.ratio_min, q);
      rep.ratio_max = std::max(rep.ratio_max, q);
    }
    double p = std::abs(m.dg(zs[i])) / dga;
    rep.deriv_min = std::min(rep.deriv_min, p);
    rep.deriv_max = std::max(rep.deriv_max, p);
  }
  rep.distortion_ok = rep.ratio_min >= rep.ratio_lo * (1 - slack) && rep.ratio_max <= rep.ratio_hi * (1 + slack);
  rep.derivative_ok = rep.deriv_min >= rep.deriv_lo * (1 - slack) && rep.deriv_max <= rep.deriv_hi * (1 + slack);

  rep.quarter_rays = rays;
  double len = dga * m.r / 4.0 * (1.0 - 1e-6);
  for (int k = 0; k < rays; ++k) {
    cplx w = ga + std::polar(len, kTwoPi * k / rays);
    cplx z;
    if (detail::invert_along_ray(m, w, z)) ++rep.quarter_hits;
  }
  rep.quarter_ok = rep.quarter_hits == rays;
  return rep;
}

}  // namespace dynlab
