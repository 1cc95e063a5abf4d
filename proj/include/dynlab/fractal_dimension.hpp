#pragma once

// Escape classification on pixel grids, the boundary-of-escaping-set proxy for
// the Julia set, dyadic box counting and PGM rendering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/parallel.hpp"

namespace dynlab {

enum class OrbitState : std::uint8_t { Escaping, Bounded, Undecided };

inline std::string to_string(OrbitState s) {
  switch (s) {
    case OrbitState::Escaping: return "escaping";
    case OrbitState::Bounded: return "bounded";
    default: return "undecided";
  }
}

struct EscapePolicy {
  double escape_log_threshold = 100.0;
  int confirm = 3;
  double cycle_tol = 1e-9;
  int max_period = 8;
  std::optional<std::pair<cplx, double>> trap;  // center, radius
};

struct Classification {
  OrbitState state = OrbitState::Undecided;
  int first_passage = 0;  // step at which log|f^n| first exceeded the threshold
  int iterations = 0;
};

/// Iterates in log-polar form. Escaping: log|f^n| passes the threshold and keeps
/// increasing for `confirm` steps (an orbit that leaves double range counts as
/// increasing). Bounded: a cycle of period <= max_period to cycle_tol, or
/// `confirm` consecutive visits to the trap disk.
inline Classification escape_classify(const FunctionSpec& f, cplx z, int max_iter, const EscapePolicy& pol = {}) {
  require(max_iter >= 1, ErrorKind::InvalidArgument, "max_iter must be >= 1");
  Classification out;
  ComplexSample s = ComplexSample::from(z);
  std::vector<cplx> hist{z};
  int crossed = 0, increases = 0, trapped = 0;
  double prev = s.log_abs();
  for (int n = 1; n <= max_iter; ++n) {
    out.iterations = n;
    bool overflow = false;
    try {
      s = s.zero ? ComplexSample::from(evaluate(f, 0.0)) : evaluate_log(f, s.log_mag, s.arg);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Overflow || (e.kind() == ErrorKind::Unsupported && prev > pol.escape_log_threshold))
        overflow = true;
      else
        return out;
    }
    double cur = overflow ? std::numeric_limits<double>::infinity() : s.log_abs();
    if (std::isnan(cur)) return out;
    if (cur > pol.escape_log_threshold) {
      if (crossed == 0) crossed = n;
      increases = cur > prev ? increases + 1 : 0;
      if (increases >= pol.confirm || (overflow && increases == n - crossed + 1)) {
        out.state = OrbitState::Escaping;
        out.first_passage = crossed;
        return out;
      }
      if (overflow) return out;
    } else {
      crossed = 0;
      increases = 0;
    }
    prev = cur;
    if (cur < 700.0) {
      cplx w = s.zero ? cplx(0.0, 0.0) : s.to_complex();
      double tol = pol.cycle_tol * std::max(1.0, std::abs(w));
      for (int p = 1; p <= pol.max_period && p <= static_cast<int>(hist.size()); ++p)
        if (std::abs(w - hist[hist.size() - static_cast<std::size_t>(p)]) < tol) {
          out.state = OrbitState::Bounded;
          return out;
        }
      if (pol.trap) {
        trapped = std::abs(w - pol.trap->first) < pol.trap->second ? trapped + 1 : 0;
        if (trapped >= pol.confirm) {
          out.state = OrbitState::Bounded;
          return out;
        }
      }
      hist.push_back(w);
      if (hist.size() > static_cast<std::size_t>(pol.max_period) + 1) hist.erase(hist.begin());
    }
  }
  return out;
}

struct Window {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

struct Mask {
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> bits;
  bool at(int i, int j) const { return bits[static_cast<std::size_t>(j) * nx + i] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1})); }
};

struct EscapeGrid {
  Window window;
  double epsilon = 0.0;
  int nx = 0, ny = 0;  // cell (i, j): x0 + (i + 1/2) eps, y0 + (j + 1/2) eps
  std::vector<OrbitState> state;
  std::vector<int> first_passage;
  std::vector<std::uint8_t> has_escaping, has_other;
  int max_iter = 0;
  double escape_log_threshold = 0.0;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
};

inline int cells_along(double length, double eps) {
  double q = length / eps;
  int n = static_cast<int>(std::ceil(q - 1e-9));
  return std::max(n, 1);
}

/// Classifies samples_per_cell points per cell (the center, then seeded jitter).
inline EscapeGrid escape_grid(const FunctionSpec& f, const Window& w, double eps, int samples_per_cell, int max_iter,
                              const EscapePolicy& pol = {}, std::uint64_t seed = 1) {
  require(w.x1 > w.x0 && w.y1 > w.y0, ErrorKind::InvalidArgument, "empty window");
  require(eps > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  require(samples_per_cell >= 1, ErrorKind::InvalidArgument, "samples_per_cell must be >= 1");
  EscapeGrid g;
  g.window = w;
  g.epsilon = eps;
  g.nx = cells_along(w.width(), eps);
  g.ny = cells_along(w.height(), eps);
  if (static_cast<double>(g.nx) * g.ny > 8192.0 * 8192.0)
    throw Error(ErrorKind::ResolutionCap, "grid exceeds 8192 x 8192 cells");
  g.max_iter = max_iter;
  g.escape_log_threshold = pol.escape_log_threshold;
  const std::size_t N = static_cast<std::size_t>(g.nx) * g.ny;
  g.state.assign(N, OrbitState::Undecided);
  g.first_passage.assign(N, 0);
  g.has_escaping.assign(N, 0);
  g.has_other.assign(N, 0);
  parallel_for(N, [&](std::size_t k) {
    int i = static_cast<int>(k % g.nx), j = static_cast<int>(k / g.nx);
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + k);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    int fp = std::numeric_limits<int>::max();
    bool any_bounded = false;
    for (int s = 0; s < samples_per_cell; ++s) {
      double dx = s == 0 ? 0.0 : U(rng), dy = s == 0 ? 0.0 : U(rng);
      cplx z(w.x0 + (i + 0.5 + dx) * eps, w.y0 + (j + 0.5 + dy) * eps);
      Classification c;
      try {
        c = escape_classify(f, z, max_iter, pol);
      } catch (const Error&) {
        c.state = OrbitState::Undecided;
      }
      if (c.state == OrbitState::Escaping) {
        g.has_escaping[k] = 1;
        fp = std::min(fp, c.first_passage);
      } else {
        g.has_other[k] = 1;
        any_bounded = any_bounded || c.state == OrbitState::Bounded;
      }
    }
    if (!g.has_other[k]) {
      g.state[k] = OrbitState::Escaping;
      g.first_passage[k] = fp;
    } else {
      g.state[k] = any_bounded ? OrbitState::Bounded : OrbitState::Undecided;
      if (g.has_escaping[k]) g.first_passage[k] = fp;
    }
  });
  return g;
}

/// Cells with escaping samples that touch non-escaping samples in themselves or
/// one of their 8 neighbours. Undecided counts as non-escaping.
inline Mask boundary_mask(const EscapeGrid& g) {
  Mask m{g.nx, g.ny, std::vector<std::uint8_t>(g.state.size(), 0)};
  parallel_for(static_cast<std::size_t>(g.ny), [&](std::size_t jj) {
    int j = static_cast<int>(jj);
    for (int i = 0; i < g.nx; ++i) {
      if (!g.has_escaping[g.index(i, j)]) continue;
      bool hit = false;
      for (int dj = -1; dj <= 1 && !hit; ++dj)
        for (int di = -1; di <= 1 && !hit; ++di) {
          int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
          hit = g.has_other[g.index(a, b)] != 0;
        }
      m.bits[g.index(i, j)] = hit;
    }
  });
  return m;
}

inline Mask escaping_mask(const EscapeGrid& g) {
  Mask m{g.nx, g.ny, std::vector<std::uint8_t>(g.state.size(), 0)};
  for (std::size_t k = 0; k < g.state.size(); ++k) m.bits[k] = g.has_escaping[k];
  return m;
}

struct JuliaProxy {
  EscapeGrid grid;
  Mask boundary;
};

inline JuliaProxy julia_proxy_grid(const FunctionSpec& f, const Window& w, double eps, int samples_per_cell,
                                   int max_iter, const EscapePolicy& pol = {}, std::uint64_t seed = 1) {
  JuliaProxy p{escape_grid(f, w, eps, samples_per_cell, max_iter, pol, seed), {}};
  p.boundary = boundary_mask(p.grid);
  return p;
}

/// 2x2 OR-coarsening: the mask of the same set at twice the cell side.
inline Mask coarsen(const Mask& m) {
  Mask c{(m.nx + 1) / 2, (m.ny + 1) / 2, {}};
  c.bits.assign(static_cast<std::size_t>(c.nx) * c.ny, 0);
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i)
      if (m.at(i, j)) c.bits[static_cast<std::size_t>(j / 2) * c.nx + i / 2] = 1;
  return c;
}

/// Masks at eps, 2 eps, ..., 2^(levels-1) eps by repeated coarsening.
inline std::vector<std::pair<double, Mask>> dyadic_masks(const Mask& finest, double eps, int levels) {
  std::vector<std::pair<double, Mask>> out{{eps, finest}};
  for (int k = 1; k < levels; ++k) out.emplace_back(out.back().first * 2.0, coarsen(out.back().second));
  return out;
}

enum class BoxTarget { EscapingBoundary, FullEscaping, CustomMask };

inline std::string to_string(BoxTarget t) {
  switch (t) {
    case BoxTarget::EscapingBoundary: return "escaping_boundary";
    case BoxTarget::FullEscaping: return "full_escaping";
    default: return "custom_mask";
  }
}

struct BoxCountCurve {
  Window window;
  BoxTarget target = BoxTarget::CustomMask;
  std::vector<std::pair<double, long long>> points;  // (eps, N), eps ascending
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  std::pair<double, double> fit_range{0.0, 0.0};
  std::vector<std::pair<double, double>> local_slopes;  // (geometric mean eps, slope between neighbours)
  double finest_pair_slope = 0.0;    // fit over the two finest octaves
  double coarsest_pair_slope = 0.0;  // fit over the two coarsest octaves inside fit_range
  bool coarsest_octave_excluded = true;
};

namespace detail {
inline double ls_slope(const std::vector<std::pair<double, long long>>& pts, std::size_t lo, std::size_t hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = static_cast<double>(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) {
    double x = -std::log(pts[i].first), y = std::log(static_cast<double>(pts[i].second));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (sxy - sx * sy / n) / (sxx - sx * sx / n);
}
}  // namespace detail

/// Least-squares slope of log N against log(1/eps).
inline BoxCountCurve box_count_fit(std::vector<std::pair<double, Mask>> masks, bool exclude_coarsest = true) {
  std::sort(masks.begin(), masks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  require(masks.size() >= 4, ErrorKind::InvalidArgument, "need at least 4 scales");
  double e0 = masks.front().first;
  require(masks.back().first >= 4.0 * e0 * (1 - 1e-9), ErrorKind::InvalidArgument, "scales must span 2 octaves");
  for (std::size_t i = 1; i < masks.size(); ++i) {
    double q = std::log2(masks[i].first / e0);
    require(std::abs(q - std::round(q)) < 1e-9 && masks[i].first > masks[i - 1].first * (1 + 1e-12),
            ErrorKind::InvalidArgument, "scales must be distinct and dyadically nested");
  }
  BoxCountCurve c;
  c.coarsest_octave_excluded = exclude_coarsest;
  for (const auto& [e, m] : masks) {
    long long n = static_cast<long long>(m.count());
    if (n == 0) throw Error(ErrorKind::DegenerateFit, "N(eps) = 0 at eps = " + std::to_string(e));
    c.points.emplace_back(e, n);
  }
  std::size_t used = exclude_coarsest ? c.points.size() - 1 : c.points.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < used; ++i) {
    double x = -std::log(c.points[i].first), y = std::log(static_cast<double>(c.points[i].second));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double n = static_cast<double>(used);
  double sxx_c = sxx - sx * sx / n;
  c.slope = (sxy - sx * sy / n) / sxx_c;
  c.intercept = (sy - c.slope * sx) / n;
  if (used > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < used; ++i) {
      double x = -std::log(c.points[i].first), y = std::log(static_cast<double>(c.points[i].second));
      double r = y - (c.intercept + c.slope * x);
      ssr += r * r;
    }
    c.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx_c);
  }
  c.fit_range = {c.points.front().first, c.points[used - 1].first};
  c.finest_pair_slope = detail::ls_slope(c.points, 0, std::min<std::size_t>(3, used));
  c.coarsest_pair_slope = detail::ls_slope(c.points, used >= 3 ? used - 3 : 0, used);
  for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
    double e1 = c.points[i].first, e2 = c.points[i + 1].first;
    double s = std::log(static_cast<double>(c.points[i].second) / static_cast<double>(c.points[i + 1].second)) /
               std::log(e2 / e1);
    c.local_slopes.emplace_back(std::sqrt(e1 * e2), s);
  }
  return c;
}

struct DimensionOptions {
  int samples_per_cell = 1;
  int max_iter = 200;
  EscapePolicy policy;
  std::uint64_t seed = 1;
  bool exclude_coarsest = true;
};

/// Dyadic scales eps_finest * 2^k, k = 0..octaves.
inline std::vector<double> dyadic_scales(double eps_finest, int octaves) {
  require(eps_finest > 0.0 && octaves >= 0, ErrorKind::InvalidArgument, "bad dyadic scale range");
  std::vector<double> e;
  for (int k = 0; k <= octaves; ++k) e.push_back(std::ldexp(eps_finest, k));
  return e;
}

/// One independent grid per scale; each mask is built at its own resolution.
inline std::vector<std::pair<double, Mask>> proxy_masks(const FunctionSpec& f, const Window& w,
                                                        const std::vector<double>& epsilons,
                                                        const DimensionOptions& opt, BoxTarget target) {
  std::vector<std::pair<double, Mask>> out;
  for (double e : epsilons) {
    JuliaProxy p = julia_proxy_grid(f, w, e, opt.samples_per_cell, opt.max_iter, opt.policy, opt.seed);
    out.emplace_back(e, target == BoxTarget::FullEscaping ? escaping_mask(p.grid) : std::move(p.boundary));
  }
  return out;
}

inline BoxCountCurve window_dimension(const FunctionSpec& f, const Window& w, double eps_finest, int octaves,
                                      const DimensionOptions& opt = {}, BoxTarget target = BoxTarget::EscapingBoundary) {
  BoxCountCurve c = box_count_fit(proxy_masks(f, w, dyadic_scales(eps_finest, octaves), opt, target),
                                  opt.exclude_coarsest);
  c.window = w;
  c.target = target;
  return c;
}

struct WindowComparison {
  std::vector<BoxCountCurve> curves;
  double max_slope_difference = 0.0;
};

/// Box-counting slopes over several windows at the same dyadic scales.
inline WindowComparison window_independence(const FunctionSpec& f, const std::vector<Window>& windows,
                                            std::vector<double> epsilons, const DimensionOptions& opt = {}) {
  require(windows.size() >= 2, ErrorKind::InvalidArgument, "need at least 2 windows");
  require(!epsilons.empty(), ErrorKind::InvalidArgument, "need scales");
  std::sort(epsilons.begin(), epsilons.end());
  WindowComparison out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    JuliaProxy coarse =
        julia_proxy_grid(f, windows[i], epsilons.back(), opt.samples_per_cell, opt.max_iter, opt.policy, opt.seed);
    if (coarse.boundary.count() == 0)
      throw Error(ErrorKind::EmptyWindow, "window " + std::to_string(i) + " has an empty boundary mask");
    BoxCountCurve c =
        box_count_fit(proxy_masks(f, windows[i], epsilons, opt, BoxTarget::EscapingBoundary), opt.exclude_coarsest);
    c.window = windows[i];
    c.target = BoxTarget::EscapingBoundary;
    out.curves.push_back(c);
  }
  for (std::size_t i = 0; i < out.curves.size(); ++i)
    for (std::size_t j = i + 1; j < out.curves.size(); ++j)
      out.max_slope_difference = std::max(out.max_slope_difference, std::abs(out.curves[i].slope - out.curves[j].slope));
  return out;
}

/// 8-bit binary PGM of first-passage times: bounded 0, undecided 16, escaping
/// 32..255 with fast escape bright. Row 0 is the top of the window.
inline std::string to_pgm(const EscapeGrid& g, double gamma = 0.5) {
  if (static_cast<double>(g.nx) * g.ny > 8192.0 * 8192.0)
    throw Error(ErrorKind::ResolutionCap, "image exceeds 8192 x 8192 pixels");
  std::string header = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n255\n";
  std::string out = header;
  out.resize(header.size() + static_cast<std::size_t>(g.nx) * g.ny);
  std::size_t pos = header.size();
  const double span = std::max(1, g.max_iter - 1);
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      std::size_t k = g.index(i, j);
      unsigned char v = 16;
      if (g.state[k] == OrbitState::Bounded) v = 0;
      else if (g.state[k] == OrbitState::Escaping) {
        double t = std::clamp((g.first_passage[k] - 1) / span, 0.0, 1.0);
        v = static_cast<unsigned char>(std::lround(32.0 + 223.0 * std::pow(1.0 - t, 1.0 / gamma)));
      }
      out[pos++] = static_cast<char>(v);
    }
  return out;
}

}  // namespace dynlab
