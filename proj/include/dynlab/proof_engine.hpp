#pragma once

// The escaping-point construction run at finite radii: candidate sets A(r) and
// B(r), disk packings, branch-targeted inverse iteration and the nested
// cascade of pullbacks with its dimension estimate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/logderiv_toolkit.hpp"
#include "dynlab/modulus_analysis.hpp"
#include "dynlab/parallel.hpp"

namespace dynlab {

/// One inequality evaluated during the construction, in the form lhs <= rhs.
/// Informational checks are the "sufficiently large r" estimates that need not
/// hold at desk-scale radii.
struct InequalityCheck {
  std::string tag;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool informational = false;
  std::string note;
};

inline InequalityCheck make_check(std::string tag, double lhs, double rhs, bool informational = false,
                                  std::string note = {}) {
  InequalityCheck c{std::move(tag), lhs, rhs, false, informational, std::move(note)};
  c.holds = lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs));
  return c;
}

// ---------------------------------------------------------------------------
// A(r)

struct CandidateOptions {
  int grid_density = 200;
  std::uint64_t seed = 1;
};

struct CandidateSet {
  FunctionSpec f;
  double r = 0.0;
  double delta = 0.0;
  double T_r = 0.0;
  double log_T = 0.0;
  double log_M = 0.0;
  double R1 = 0.0, R3 = 0.0;
  bool normalized = false;

  int n_radii = 0, n_angles = 0;
  std::vector<cplx> points;  // ring-major: index = i * n_angles + j
  std::vector<double> cell_area;
  std::vector<double> log_abs_f;
  std::vector<std::uint8_t> modulus_ok, derivative_ok;
  std::vector<double> ring_lo, ring_hi;

  std::size_t flagged_count = 0;
  double annulus_area = 0.0;
  double area_estimate = 0.0;
  double area_se = 0.0;
  double area_lower_bound = 0.0;  // 2 r^2 / T^{2 delta}
  bool area_bound_holds = false;

  std::vector<double> F_r_radii;  // rings where |f'/f| <= T (log T)^7 / r at every sample
  double F_r_length = 0.0;
  double F_r_bound = 0.0;         // r / (log T)^2
  std::vector<std::pair<double, double>> J_s_measures;
  double J_s_bound = 0.0;         // 1 / T^delta

  double T_R6 = 0.0;
  bool good_radius = false;

  bool flagged(std::size_t i) const { return modulus_ok[i] && derivative_ok[i]; }
};

/// Samples A(r) = {R1 <= |z| <= R3, |f| >= sqrt M(r), |f'/f| >= T^{1-delta}/r} on a
/// jittered polar lattice of grid_density rings and round(2 pi grid_density) angles.
inline CandidateSet candidate_set(const FunctionSpec& f, double r, double delta, const CandidateOptions& opt = {}) {
  require(r > 0.0, ErrorKind::InvalidArgument, "radius must be positive");
  require(delta > 0.0 && delta < 2.0 / 7.0, ErrorKind::InvalidArgument, "delta must lie in (0, 2/7)");
  require(opt.grid_density >= 4, ErrorKind::InvalidArgument, "grid_density must be >= 4");
  CandidateSet c;
  c.f = f;
  c.r = r;
  c.delta = delta;
  c.normalized = is_normalized(f);
  c.T_r = characteristic_T(f, r);
  c.log_M = max_modulus(f, r).log_value;
  c.log_T = c.T_r > 0.0 ? std::log(c.T_r) : -std::numeric_limits<double>::infinity();
  // below T = 1 the shells collapse onto |z| = r
  double inv_lt2 = c.log_T > 0.0 ? 1.0 / (c.log_T * c.log_T) : 0.0;
  c.R1 = r * (1.0 + inv_lt2);
  c.R3 = r * (1.0 + 3.0 * inv_lt2);

  c.n_radii = opt.grid_density;
  c.n_angles = static_cast<int>(std::lround(kTwoPi * opt.grid_density));
  const std::size_t N = static_cast<std::size_t>(c.n_radii) * static_cast<std::size_t>(c.n_angles);
  c.points.resize(N);
  c.cell_area.resize(N);
  c.log_abs_f.resize(N);
  c.modulus_ok.assign(N, 0);
  c.derivative_ok.assign(N, 0);
  c.ring_lo.resize(c.n_radii);
  c.ring_hi.resize(c.n_radii);

  const double ds = (c.R3 - c.R1) / c.n_radii;
  const double dth = kTwoPi / c.n_angles;
  const double half_log_M = 0.5 * c.log_M;
  const double deriv_floor = (1.0 - delta) * c.log_T - std::log(r);
  const double F_cap = c.log_T > 0.0 ? c.log_T + 7.0 * std::log(c.log_T) - std::log(r)
                                     : std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> ring_in_F(c.n_radii, 0);
  std::vector<double> ring_J(c.n_radii, 0.0);

  parallel_for(static_cast<std::size_t>(c.n_radii), [&](std::size_t i) {
    std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL + i);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double lo = c.R1 + ds * static_cast<double>(i), hi = lo + ds;
    c.ring_lo[i] = lo;
    c.ring_hi[i] = hi;
    double area = 0.5 * (hi * hi - lo * lo) * dth;
    bool in_F = true;
    std::size_t j_count = 0;
    for (int j = 0; j < c.n_angles; ++j) {
      std::size_t k = i * static_cast<std::size_t>(c.n_angles) + static_cast<std::size_t>(j);
      double s = std::sqrt(lo * lo + U(rng) * (hi * hi - lo * lo));
      double th = -kPi + dth * (j + U(rng));
      double ls = std::log(s);
      c.points[k] = std::polar(s, th);
      c.cell_area[k] = area;
      double lf = evaluate_log(f, ls, th).log_abs();
      c.log_abs_f[k] = lf;
      double ld;
      try {
        ld = log_abs_log_derivative(f, ls, th);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NearZeroDivision) throw;
        ld = std::numeric_limits<double>::infinity();
      }
      c.modulus_ok[k] = lf >= half_log_M;
      c.derivative_ok[k] = ld >= deriv_floor;
      if (ld > F_cap) in_F = false;
      if (c.modulus_ok[k] && c.derivative_ok[k]) ++j_count;
    }
    ring_in_F[i] = in_F;
    ring_J[i] = kTwoPi * static_cast<double>(j_count) / c.n_angles;
  });

  for (std::size_t k = 0; k < N; ++k) {
    c.annulus_area += c.cell_area[k];
    if (c.flagged(k)) {
      ++c.flagged_count;
      c.area_estimate += c.cell_area[k];
    }
  }
  if (c.flagged_count == 0) throw Error(ErrorKind::EmptyCandidate, "no lattice sample passes both membership tests");
  double p = static_cast<double>(c.flagged_count) / static_cast<double>(N);
  c.area_se = std::sqrt(p * (1.0 - p) / static_cast<double>(N)) * c.annulus_area;

  for (int i = 0; i < c.n_radii; ++i) {
    double mid = 0.5 * (c.ring_lo[i] + c.ring_hi[i]);
    if (ring_in_F[i]) {
      c.F_r_radii.push_back(mid);
      c.F_r_length += ds;
    }
    c.J_s_measures.emplace_back(mid, ring_J[i]);
  }

  if (!(c.T_r > kE)) throw Error(ErrorKind::DegenerateT, "candidate set needs T(r) > e");
  c.F_r_bound = r * inv_lt2;
  c.J_s_bound = std::exp(-delta * c.log_T);
  c.area_lower_bound = 2.0 * r * r * std::exp(-2.0 * delta * c.log_T);
  c.area_bound_holds = c.area_estimate >= c.area_lower_bound;
  c.T_R6 = characteristic_T(f, r_shell(r, 6.0, c.T_r));
  c.good_radius = c.T_R6 <= kE * c.T_r;
  if (!c.good_radius) throw Error(ErrorKind::BadRadius, "T(R6(r)) > e T(r): r lies in the exceptional set");
  return c;
}

// ---------------------------------------------------------------------------
// B(r) and the packing

struct PackedSet {
  double rho = 0.0;
  double eta = 0.0;
  std::optional<ExclusionDiskSet> excluded_disks;
  std::vector<cplx> centers;
  std::vector<double> center_log_abs_f;
  int m_r = 0;
  double area_B_estimate = 0.0;
  double area_B_bound = 0.0;       // r^2 / T^{2 delta}
  double packing_bound = 0.0;      // T^{2 - 7 delta}
  double log_m_area = 0.0;         // log(area_B / (4 pi rho^2)), the count implied by the area
  int zero_count = 0;              // n(R5(r), 0)
  double zero_count_bound = 0.0;   // 2 e T (log T)^2
  double min_center_zero_distance = std::numeric_limits<double>::infinity();
  std::vector<InequalityCheck> checks;
};

inline double rho_of(double r, double T, double delta) { return r * std::pow(T, -(1.0 - 2.0 * delta)); }

/// Packing against a given exclusion set (disks are inflated by rho here).
inline PackedSet pack_candidates(const CandidateSet& cand, const std::optional<ExclusionDiskSet>& disks,
                                 const std::vector<cplx>& zeros) {
  PackedSet p;
  p.rho = rho_of(cand.r, cand.T_r, cand.delta);
  p.eta = 3.0 * cand.delta;
  p.excluded_disks = disks;
  p.zero_count = static_cast<int>(zeros.size());
  const double rho = p.rho;
  auto outside = [&](cplx z) {
    if (!disks) return true;
    for (const auto& d : disks->disks)
      if (std::abs(z - d.center) < d.radius + rho) return false;
    return true;
  };

  const double cell = 2.0 * rho;
  auto key = [&](cplx z) {
    auto x = static_cast<long long>(std::floor(z.real() / cell));
    auto y = static_cast<long long>(std::floor(z.imag() / cell));
    return detail::Cell{x, y};
  };
  detail::CellGrid grid;
  std::vector<std::uint8_t> in_B(cand.points.size(), 0);
  parallel_for(cand.points.size(), [&](std::size_t k) { in_B[k] = cand.flagged(k) && outside(cand.points[k]); });

  for (std::size_t k = 0; k < cand.points.size(); ++k) {
    if (!in_B[k]) continue;
    p.area_B_estimate += cand.cell_area[k];
    cplx z = cand.points[k];
    auto [x, y] = key(z);
    bool ok = true;
    for (long long dx = -1; dx <= 1 && ok; ++dx)
      for (long long dy = -1; dy <= 1 && ok; ++dy) {
        auto it = grid.find(detail::Cell{x + dx, y + dy});
        if (it == grid.end()) continue;
        for (std::size_t idx : it->second)
          if (std::abs(p.centers[idx] - z) < 2.0 * rho) {
            ok = false;
            break;
          }
      }
    if (!ok) continue;
    grid[detail::Cell{x, y}].push_back(p.centers.size());
    p.centers.push_back(z);
    p.center_log_abs_f.push_back(cand.log_abs_f[k]);
  }
  if (p.centers.empty()) throw Error(ErrorKind::EmptyAfterExclusion, "no candidate sample survives the exclusion disks");
  p.m_r = static_cast<int>(p.centers.size());

  const double lt = cand.log_T;
  p.area_B_bound = cand.r * cand.r * std::exp(-2.0 * cand.delta * lt);
  p.packing_bound = std::exp((2.0 - 7.0 * cand.delta) * lt);
  p.log_m_area = std::log(p.area_B_estimate) - std::log(4.0 * kPi * rho * rho);
  p.zero_count_bound = 2.0 * kE * cand.T_r * lt * lt;
  for (cplx b : p.centers)
    for (cplx z : zeros) p.min_center_zero_distance = std::min(p.min_center_zero_distance, std::abs(b - z));

  const bool area_regime = cand.delta < 1.0 / 6.0;
  p.checks.push_back(make_check("zero_count", static_cast<double>(p.zero_count), p.zero_count_bound, true));
  p.checks.push_back(make_check("exclusion_area", p.area_B_bound, p.area_B_estimate, true,
                                area_regime ? "" : "delta >= 1/6: outside the regime of this estimate"));
  p.checks.push_back(make_check("packing_count", p.packing_bound, static_cast<double>(p.m_r), true, "greedy count"));
  p.checks.push_back(make_check("packing_count_area", std::log(p.packing_bound), p.log_m_area, true,
                                "log of the area-implied count"));
  {
    InequalityCheck c{"zero_free_disks", rho, p.min_center_zero_distance, false, false, ""};
    c.holds = p.min_center_zero_distance > rho;
    p.checks.push_back(c);
  }
  return p;
}

/// B(r) = A(r) minus the rho-inflated exclusion disks built from the zeros in
/// |z| <= R5(r) with H = r / (2 T^{eta/2}), eta = 3 delta.
inline PackedSet exclude_and_pack(const CandidateSet& cand, const std::vector<cplx>& zeros,
                                  std::size_t zero_cap = 10000) {
  std::optional<ExclusionDiskSet> disks;
  if (!zeros.empty()) {
    double eta = 3.0 * cand.delta;
    double H = cand.r / (2.0 * std::pow(cand.T_r, eta / 2.0));
    disks = fuchs_macintyre_disks(zeros, H, ExclusionMode::QuadraticSum, zero_cap);
  }
  return pack_candidates(cand, disks, zeros);
}

// ---------------------------------------------------------------------------
// Inverse branches

struct BranchWindow {
  double center = 0.0;
  double halfwidth = 2.0 * kPi;
};

struct BranchSolution {
  cplx w;
  cplx phi;  // the lifted log f(w)
  int iterations = 0;
  double residual = 0.0;  // |phi(w) - target| / max(1, |target|)
};

namespace detail {

// Im of log f carried along the segment a -> b by Simpson's rule on f'/f, then
// snapped to the exact argument.
inline double lift_arg(const FunctionSpec& f, cplx a, double im_a, cplx b, double arg_b) {
  const int n = 8;
  cplx h = (b - a) / static_cast<double>(n);
  cplx s(0.0, 0.0);
  for (int i = 0; i <= n; ++i) {
    double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += wgt * log_derivative(f, a + h * static_cast<double>(i));
  }
  double guess = im_a + (s * h / 3.0).imag();
  return arg_b + kTwoPi * std::round((guess - arg_b) / kTwoPi);
}

}  // namespace detail

/// Solves log f(w) = target on the branch of log f that is principal at the seed
/// and continued along the Newton path. The target's imaginary part is taken as
/// target.arg + 2 pi n nearest to the window center.
inline BranchSolution inverse_branch(const FunctionSpec& f, const ComplexSample& target, cplx seed,
                                     BranchWindow window = {}) {
  require(!target.zero, ErrorKind::InvalidArgument, "target must be nonzero");
  double t_im = target.arg + kTwoPi * std::round((window.center - target.arg) / kTwoPi);
  cplx tgt(target.log_mag, t_im);
  const double scale = std::max(1.0, std::abs(tgt));

  auto phi_at = [&](cplx w, cplx from, double im_from) {
    ComplexSample v = evaluate_log(f, w);
    if (v.zero) throw Error(ErrorKind::NearZeroDivision, "Newton iterate hit a zero of f");
    return cplx(v.log_mag, detail::lift_arg(f, from, im_from, w, v.arg));
  };

  ComplexSample s0 = evaluate_log(f, seed);
  require(!s0.zero, ErrorKind::CriticalSeed, "seed is a zero of f");
  cplx w = seed;
  cplx phi(s0.log_mag, s0.arg);
  cplx d = log_derivative(f, w);
  auto floor_at = [&](cplx x, cplx dx) { return 64.0 * 2.2e-16 * std::abs(x) * std::abs(dx) / scale; };

  if (std::abs(d) * std::max(1.0, std::abs(seed)) < 1e-10) {
    cplx diff = tgt - phi;
    if (std::abs(diff) / scale <= floor_at(w, d) + 1e-15) {
      return {w, phi, 0, std::abs(diff) / scale};
    }
    if (std::abs(diff) > 1.0) throw Error(ErrorKind::CriticalSeed, "log-derivative vanishes at the seed");
    // quadratic model phi(w) ~ phi(s) + phi''(s) (w - s)^2 / 2
    cplx d2 = log_derivative2(f, w);
    if (std::abs(d2) == 0.0) throw Error(ErrorKind::CriticalSeed, "degenerate critical seed");
    cplx root = std::sqrt(2.0 * diff / d2);
    cplx cand[2] = {seed + root, seed - root};
    auto better = [](cplx a, cplx b) {
      if (std::abs(std::abs(a.imag()) - std::abs(b.imag())) > 1e-12) return std::abs(a.imag()) < std::abs(b.imag());
      return a.real() < b.real();
    };
    cplx start = better(cand[0], cand[1]) ? cand[0] : cand[1];
    phi = phi_at(start, seed, phi.imag());
    w = start;
    d = log_derivative(f, w);
  }

  for (int it = 1; it <= 50; ++it) {
    cplx res = phi - tgt;
    double rel = std::abs(res) / scale;
    if (rel <= 1e-13 || rel <= floor_at(w, d)) {
      if (std::abs(phi.imag() - window.center) > window.halfwidth)
        throw Error(ErrorKind::WrongBranch, "converged outside the branch window");
      return {w, phi, it - 1, rel};
    }
    if (std::abs(d) == 0.0) throw Error(ErrorKind::CriticalSeed, "log-derivative vanished during Newton");
    cplx step = res / d;
    double lambda = 1.0;
    for (int k = 0; k < 30; ++k) {
      cplx wn = w - lambda * step;
      try {
        cplx pn = phi_at(wn, w, phi.imag());
        if (std::abs(pn - tgt) < std::abs(res) || k == 29) {
          w = wn;
          phi = pn;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NearZeroDivision && e.kind() != ErrorKind::Overflow) throw;
      }
      lambda *= 0.5;
    }
    d = log_derivative(f, w);
  }
  double rel = std::abs(phi - tgt) / scale;
  if (rel <= 1e-10) {
    if (std::abs(phi.imag() - window.center) > window.halfwidth)
      throw Error(ErrorKind::WrongBranch, "converged outside the branch window");
    return {w, phi, 50, rel};
  }
  throw Error(ErrorKind::NoConvergence, "inverse branch Newton did not converge in 50 iterations");
}

// ---------------------------------------------------------------------------
// The cascade

/// A point kept as log|z|, arg z. Points of deep levels (|z| beyond double
/// range) also carry eps with |z| = r_k (1 + eps), which log|z| cannot resolve.
struct LogPoint {
  double log_mag = 0.0;
  double arg = 0.0;
  double eps = 0.0;
  bool plain = true;
  cplx z;

  static LogPoint of(cplx w) {
    LogPoint p;
    p.log_mag = std::log(std::abs(w));
    p.arg = std::arg(w);
    p.z = w;
    return p;
  }
  ComplexSample sample() const { return ComplexSample::polar(log_mag, arg); }
};

struct CascadeLevel {
  int k = 0;
  bool deep = false;
  double log_r = 0.0;
  double log_T = 0.0;
  double log_rho = 0.0;
  LogPoint b;
  double log_abs_f_b = 0.0;     // log|f(b_k)|; +inf at a deep level
  double loglog_abs_f_b = 0.0;  // log log|f(b_k)|
  cplx v;                       // v_k, the pullback of b_k to level 0
  double log_sigma = 0.0;
  double log_sigma_bound = 0.0;
  double log_diam = 0.0;
  double log_diam_bound = 0.0;
  std::string diam_method;
  int m_greedy = 0;
  double log_m_area = 0.0;
  double area_A = 0.0, area_A_se = 0.0, area_B = 0.0;
  int zero_count = 0;
  std::optional<KoebeReport> koebe;
  double round_trip_max = 0.0;
  double q_lattice_max = 0.0;
  std::vector<InequalityCheck> checks;

  double log_m() const { return std::max(m_greedy > 0 ? std::log(static_cast<double>(m_greedy)) : 0.0, log_m_area); }
};

struct OrbitCheck {
  int k = 0;
  double log_abs = 0.0;  // log|f^k(z0)|
  double log_lo = 0.0;   // log r_k
  double log_hi = 0.0;   // log R4(r_k)
  bool annulus_membership = false;
  bool resolution_limited = false;
  double log_deriv = 0.0;        // log|f'/f(f^k(z0))|
  double log_deriv_bound = 0.0;  // (1 + 3 delta) log T_k - log r_k
  bool derivative_bound_ok = false;
};

struct CascadeOptions {
  int grid_density = 120;
  int koebe_samples = 32;
  int beta_candidates = 64;
  int diameter_samples = 64;
  double beta_reference = 2.0;
  std::uint64_t seed = 1;
};

struct ConstructionTrace {
  std::string function;
  double delta = 0.0;
  double r0 = 0.0;
  int depth = 0;
  std::vector<CascadeLevel> levels;
  cplx z0;
  std::vector<OrbitCheck> orbit_checks;
  bool monotone_escape = false;
  double predicted_dim = 0.0;
  bool vacuous = false;
  int dim_level = -1;
  double beta_measured = 1.0;
  long long N0_measured = 0;
  long long N0_reference = 0;
  double measured_dim_estimate = std::numeric_limits<double>::quiet_NaN();
  double measured_dim_beta_measured = std::numeric_limits<double>::quiet_NaN();
  CascadeOptions options;

  bool all_hard_checks_hold() const {
    for (const auto& l : levels)
      for (const auto& c : l.checks)
        if (!c.informational && !c.holds) return false;
    for (const auto& o : orbit_checks)
      if (!o.annulus_membership || !o.derivative_bound_ok) return false;
    return monotone_escape;
  }
};

inline long long packing_constant(double beta) {
  return static_cast<long long>(std::floor(81.0 * beta * beta * (8.0 * beta + 1.0) * (8.0 * beta + 1.0) / 16.0));
}

struct DimensionEstimate {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double predicted = 0.0;
  bool vacuous = false;
  int level = -1;
  std::string warning;
};

/// log(m_k / N0) / (-log sigma_k) at the trace's dimension level, next to the
/// predicted 2 - 7 delta.
inline DimensionEstimate dimension_lower_bound(const ConstructionTrace& trace, double m_k, long long N0_est) {
  DimensionEstimate d;
  d.predicted = 2.0 - 7.0 * trace.delta;
  d.vacuous = trace.delta >= 2.0 / 7.0 - 1e-15;
  if (d.vacuous) d.warning = "delta >= 2/7: the predicted bound is vacuous";
  int k = trace.dim_level >= 0 ? trace.dim_level : static_cast<int>(trace.levels.size()) - 1;
  d.level = k;
  if (trace.levels.empty() || m_k < 1.0 || N0_est < 1) {
    d.warning = "need a level, m_k >= 1 and N0 >= 1";
    return d;
  }
  double ls = trace.levels[static_cast<std::size_t>(k)].log_sigma;
  if (!(ls < 0.0)) {
    d.warning = "sigma_k >= 1: no scale to measure against";
    return d;
  }
  d.estimate = (std::log(m_k) - std::log(static_cast<double>(N0_est))) / (-ls);
  return d;
}

namespace detail {

struct ChainResult {
  std::vector<LogPoint> points;  // p_0 .. p_k, p_k the input point
  double log_abs_derivative = 0.0;  // log|(f^k)'(p_0)|
  cplx derivative_inverse;           // (psi_1 o ... o psi_k)'(input), when representable
  double round_trip = 0.0;
};

// Pulls a level-k point back through psi_k, ..., psi_1 using the branch of log f
// that is principal at b_{j} and the argument continued around arg_ref.
inline ChainResult pull_back(const FunctionSpec& f, const std::vector<CascadeLevel>& levels, int k, const LogPoint& x,
                             double arg_ref) {
  ChainResult c;
  c.points.resize(static_cast<std::size_t>(k) + 1);
  c.points[static_cast<std::size_t>(k)] = x;
  cplx inv_d(1.0, 0.0);
  double ref = arg_ref;
  for (int j = k - 1; j >= 0; --j) {
    const LogPoint& up = c.points[static_cast<std::size_t>(j) + 1];
    ComplexSample tgt = up.sample();
    BranchSolution s = inverse_branch(f, tgt, levels[static_cast<std::size_t>(j)].b.z, {ref, 2.0 * kPi});
    LogPoint p = LogPoint::of(s.w);
    c.points[static_cast<std::size_t>(j)] = p;
    ComplexSample back = evaluate_log(f, s.w);
    c.round_trip = std::max(c.round_trip, std::abs(back.log_mag - tgt.log_mag) / std::max(1.0, std::abs(tgt.log_mag)));
    double lld = log_abs_log_derivative(f, p.log_mag, p.arg);
    c.log_abs_derivative += up.log_mag + lld;  // log|f'(p_j)| = log|f(p_j)| + log|f'/f(p_j)|
    if (up.plain) inv_d /= up.z * log_derivative(f, s.w);
    ref = p.arg;
  }
  c.derivative_inverse = inv_d;
  return c;
}

inline double log_R(double log_r, double m, double log_T) { return log_r + std::log1p(m / (log_T * log_T)); }

// log T at radius exp(log_r): quadrature while r is representable, closed form beyond.
inline double log_T_at(const FunctionSpec& f, double log_r) {
  if (log_r < 600.0) {
    double T = characteristic_T(f, std::exp(log_r));
    return T > 0.0 ? std::log(T) : -std::numeric_limits<double>::infinity();
  }
  auto lt = closed_form_log_characteristic(f, log_r);
  if (!lt) throw Error(ErrorKind::DepthUnreachable, "T(r) beyond double range needs an unshifted ScaledExp");
  return *lt;
}

[[noreturn]] inline void rethrow_at_level(const Error& e, int k) {
  throw Error(e.kind(), "level " + std::to_string(k) + ": " + e.detail());
}

}  // namespace detail

/// Runs max(depth, 1) levels of the construction from r0 and records every
/// per-level inequality.
inline ConstructionTrace build_cascade(const FunctionSpec& f, double r0, double delta, int depth,
                                       const CascadeOptions& opt = {}) {
  require(r0 > 1.0, ErrorKind::InvalidArgument, "r0 must exceed 1");
  require(delta > 0.0 && delta < 2.0 / 7.0 + 1e-15, ErrorKind::InvalidArgument, "delta must lie in (0, 2/7]");
  require(depth >= 0, ErrorKind::InvalidArgument, "depth must be >= 0");
  ConstructionTrace tr;
  tr.function = f.name();
  tr.delta = delta;
  tr.r0 = r0;
  tr.depth = depth;
  tr.options = opt;
  tr.predicted_dim = 2.0 - 7.0 * delta;
  tr.vacuous = delta >= 2.0 / 7.0 - 1e-15;
  const double cand_delta = std::min(delta, 2.0 / 7.0 - 1e-9);
  const int n_levels = std::max(depth, 1);

  double log_r = std::log(r0);
  for (int k = 0; k < n_levels; ++k) {
    CascadeLevel L;
    L.k = k;
    L.log_r = log_r;
    L.deep = log_r >= 600.0;
    std::optional<PackedSet> packed;
    try {
      if (!L.deep) {
        double r = std::exp(log_r);
        CandidateSet cand = candidate_set(f, r, cand_delta, {opt.grid_density, opt.seed + static_cast<std::uint64_t>(k)});
        auto zeros = known_zeros(f, r_shell(r, 5.0, cand.T_r));
        packed = exclude_and_pack(cand, zeros);
        std::size_t best = 0;
        for (std::size_t i = 1; i < packed->centers.size(); ++i)
          if (packed->center_log_abs_f[i] < packed->center_log_abs_f[best]) best = i;
        L.b = LogPoint::of(packed->centers[best]);
        L.log_T = cand.log_T;
        L.log_rho = std::log(packed->rho);
        L.log_abs_f_b = packed->center_log_abs_f[best];
        L.loglog_abs_f_b = std::log(L.log_abs_f_b);
        L.m_greedy = packed->m_r;
        L.log_m_area = packed->log_m_area;
        L.area_A = cand.area_estimate;
        L.area_A_se = cand.area_se;
        L.area_B = packed->area_B_estimate;
        L.zero_count = packed->zero_count;
        L.checks.push_back(make_check("good_radius", cand.T_R6, kE * cand.T_r));
        L.checks.push_back(make_check("candidate_area", cand.area_lower_bound, cand.area_estimate, true));
        for (auto& c : packed->checks) L.checks.push_back(c);
        double lld = log_abs_log_derivative(f, L.b.log_mag, L.b.arg);
        L.checks.push_back(make_check("log_derivative_lower", (1.0 - delta) * L.log_T - log_r, lld));
        L.checks.push_back(make_check("log_derivative_upper", lld, (1.0 + 3.0 * delta) * L.log_T - log_r, true));
        L.checks.push_back(make_check("disk_in_annulus", std::log(20.0) + L.log_rho,
                                      std::log(r) - 2.0 * std::log(L.log_T), true, "M = 20"));
      } else {
        if (f.kind != FunctionKind::ScaledExp || f.shift != cplx(0.0, 0.0))
          throw Error(ErrorKind::DepthUnreachable, "r_k beyond double range needs an unshifted ScaledExp");
        L.log_T = detail::log_T_at(f, log_r);
        if (!(L.log_T > 1.0)) throw Error(ErrorKind::DegenerateT, "T(r) <= e");
        const double lt2 = L.log_T * L.log_T;
        double eps = 2.0 / lt2;
        double half_max = 0.5 * log_modulus_over_radius(f, log_r, 0.0, 0.0);
        bool deriv_ok = 0.0 >= (1.0 - delta) * L.log_T - log_r;
        const int n_ang = 4096;
        int best = -1, passing = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_ang; ++j) {
          double th = -kPi + kTwoPi * (j + 0.5) / n_ang;
          double v = log_modulus_over_radius(f, log_r, eps, th);
          if (v >= half_max && deriv_ok) {
            ++passing;
            if (v < best_val) {
              best_val = v;
              best = j;
            }
          }
        }
        if (best < 0) throw Error(ErrorKind::EmptyCandidate, "no angle on R2(r) passes both membership tests");
        L.b.plain = false;
        L.b.eps = eps;
        L.b.arg = -kPi + kTwoPi * (best + 0.5) / n_ang;
        L.b.log_mag = log_r + std::log1p(eps);
        L.log_rho = log_r - (1.0 - 2.0 * delta) * L.log_T;
        L.log_abs_f_b = std::numeric_limits<double>::infinity();
        L.loglog_abs_f_b = log_r + std::log(best_val);
        // area of A(r) from the passing angular fraction of the shell R1..R3
        double shell = 4.0 / lt2 + 8.0 / (lt2 * lt2);
        double log_area = 2.0 * log_r + std::log(kPi * shell * passing / n_ang);
        L.log_m_area = log_area - std::log(4.0 * kPi) - 2.0 * L.log_rho;
        L.checks.push_back(make_check("log_derivative_lower", (1.0 - delta) * L.log_T - log_r, 0.0));
        L.checks.push_back(make_check("log_derivative_upper", 0.0, (1.0 + 3.0 * delta) * L.log_T - log_r, true));
        L.checks.push_back(make_check("packing_count_area", (2.0 - 7.0 * delta) * L.log_T, L.log_m_area, true,
                                      "log of the area-implied count"));
        L.checks.push_back(make_check("shell_position", L.b.eps - L.log_rho + log_r > 0 ? 0.0 : 1.0, 0.0, false,
                                      "D(b, rho) inside the R1..R3 shell in scaled form"));
      }
      tr.levels.push_back(L);
      CascadeLevel& cur = tr.levels.back();

      // the pullback of b_k to level 0
      auto chain = detail::pull_back(f, tr.levels, k, cur.b, cur.b.arg);
      cur.v = chain.points[0].z;
      cur.round_trip_max = chain.round_trip;
      cur.log_sigma = cur.log_rho - chain.log_abs_derivative;
      double sum_lt = 0.0;
      for (int j = 0; j < k; ++j) sum_lt += tr.levels[static_cast<std::size_t>(j)].log_T;
      cur.log_sigma_bound = std::log(r0) - k - (1.0 - 2.0 * delta) * cur.log_T - (1.0 + 3.0 * delta) * sum_lt;
      cur.checks.push_back(make_check("sigma_product_bound", cur.log_sigma_bound, cur.log_sigma));
      cur.checks.push_back(make_check("sigma_lower", -cur.log_T, cur.log_sigma));
      cur.checks.push_back(make_check("round_trip", cur.round_trip_max, 1e-8));
      if (k > 0) {
        const CascadeLevel& prev = tr.levels[static_cast<std::size_t>(k) - 1];
        cur.checks.push_back(make_check("next_radius_low", prev.log_abs_f_b, cur.log_r));
        cur.checks.push_back(make_check("next_radius_high", cur.log_r, prev.log_abs_f_b + std::log(2.0)));
        cur.checks.push_back(make_check("radius_doubling", prev.log_r + std::log(2.0), cur.log_r));
      }

      // diameter of V_k
      cur.log_diam_bound = tr.levels[0].log_rho - (k - 1) * std::log(2.0);
      if (k == 0) {
        cur.log_diam = std::log(2.0) + cur.log_rho;
        cur.diam_method = "exact";
      } else if (!cur.deep) {
        double rho = std::exp(cur.log_rho);
        std::vector<cplx> img;
        for (int i = 0; i < opt.diameter_samples; ++i) {
          cplx z = cur.b.z + std::polar(rho, kTwoPi * i / opt.diameter_samples);
          img.push_back(detail::pull_back(f, tr.levels, k, LogPoint::of(z), cur.b.arg).points[0].z);
        }
        double d = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i)
          for (std::size_t j = i + 1; j < img.size(); ++j) d = std::max(d, std::abs(img[i] - img[j]));
        cur.log_diam = std::log(d);
        cur.diam_method = "sampled_boundary";
      } else {
        cur.log_diam = std::log(8.0) + cur.log_sigma;
        cur.diam_method = "koebe_estimate";
      }
      cur.checks.push_back(make_check("diameter_halving", cur.log_diam, cur.log_diam_bound));

      if (k > 0 && !cur.deep) {
        UnivalentMap m;
        const std::vector<CascadeLevel>& lv = tr.levels;
        double ref = cur.b.arg;
        m.g = [&f, &lv, k, ref](cplx z) { return detail::pull_back(f, lv, k, LogPoint::of(z), ref).points[0].z; };
        m.dg = [&f, &lv, k, ref](cplx z) { return detail::pull_back(f, lv, k, LogPoint::of(z), ref).derivative_inverse; };
        m.a = cur.b.z;
        m.r = 20.0 * std::exp(cur.log_rho);
        cur.koebe = koebe_check(m, 1.0 / 20.0, opt.koebe_samples, 0, opt.seed);
        InequalityCheck kc{"koebe_sandwich", 0.0, 0.0, cur.koebe->distortion_ok && cur.koebe->derivative_ok, false, ""};
        cur.checks.push_back(kc);
      }

      // Q-lattice round trips of the branch at b_k
      if (!cur.deep && cur.log_abs_f_b < kLogDoubleMax) {
        double a = cur.log_abs_f_b;
        double worst = 0.0, far = 0.0;
        for (double x : {-0.5, 0.0, 0.5})
          for (double y : {-kPi, 0.0, kPi}) {
            auto s = inverse_branch(f, ComplexSample::polar(a + x, y), cur.b.z, {y, 2.0 * kPi});
            worst = std::max(worst, std::abs(evaluate_log(f, s.w).log_mag - (a + x)) / std::max(1.0, std::abs(a + x)));
            far = std::max(far, std::abs(s.w - cur.b.z));
          }
        cur.q_lattice_max = worst;
        cur.checks.push_back(make_check("q_lattice_round_trip", worst, 1e-8));
        cur.checks.push_back(make_check("q_lattice_in_disk", far, std::exp(cur.log_rho), true));
      }

      // next radius: smallest good radius on a 16-point grid over [|f(b_k)|, 2|f(b_k)|]
      if (k + 1 < n_levels) {
        if (cur.deep || !(cur.log_abs_f_b < std::numeric_limits<double>::max()))
          throw Error(ErrorKind::DepthUnreachable, "log r_{k+1} exceeds double range");
        if (cur.log_abs_f_b < cur.log_r + std::log(2.0))
          throw Error(ErrorKind::BadRadius, "|f(b_k)| < 2 r_k: sqrt M(r) >= 2r fails at this radius");
        bool found = false;
        for (int i = 0; i < 16 && !found; ++i) {
          double lr = cur.log_abs_f_b + std::log1p(i / 15.0);
          double lt = detail::log_T_at(f, lr);
          if (!(lt > 1.0)) continue;
          double lt6 = detail::log_T_at(f, detail::log_R(lr, 6.0, lt));
          if (lt6 - lt <= 1.0) {
            log_r = lr;
            found = true;
          }
        }
        if (!found) throw Error(ErrorKind::BadRadius, "no good radius in [|f(b_k)|, 2|f(b_k)|]");
      }
    } catch (const Error& e) {
      detail::rethrow_at_level(e, k);
    }
  }

  // forward orbit of z0
  const CascadeLevel& last = tr.levels.back();
  tr.z0 = last.v;
  ComplexSample q = ComplexSample::from(tr.z0);
  double prev = -std::numeric_limits<double>::infinity();
  tr.monotone_escape = true;
  for (std::size_t j = 0; j < tr.levels.size(); ++j) {
    const CascadeLevel& lv = tr.levels[j];
    OrbitCheck o;
    o.k = static_cast<int>(j);
    o.log_abs = q.log_mag;
    o.log_lo = lv.log_r;
    o.log_hi = detail::log_R(lv.log_r, 4.0, lv.log_T);
    double tol = 1e-12 * std::max(1.0, std::abs(lv.log_r));
    o.resolution_limited = (o.log_hi - o.log_lo) < tol;
    o.annulus_membership = o.log_abs >= o.log_lo - tol && o.log_abs <= o.log_hi + tol;
    o.log_deriv = log_abs_log_derivative(f, q.log_mag, q.arg);
    o.log_deriv_bound = (1.0 + 3.0 * delta) * lv.log_T - lv.log_r;
    o.derivative_bound_ok = o.log_deriv <= o.log_deriv_bound + tol;
    if (!(o.log_abs > prev)) tr.monotone_escape = false;
    prev = o.log_abs;
    tr.orbit_checks.push_back(o);
    if (j + 1 < tr.levels.size()) q = evaluate_log(f, q.log_mag, q.arg);
  }

  // dimension estimate at the last packed level past level 0
  for (int k = static_cast<int>(tr.levels.size()) - 1; k >= 1; --k)
    if (!tr.levels[static_cast<std::size_t>(k)].deep) {
      tr.dim_level = k;
      break;
    }
  tr.N0_reference = packing_constant(opt.beta_reference);
  tr.N0_measured = packing_constant(tr.beta_measured);
  if (tr.dim_level < 0 && tr.levels.size() > 1) tr.dim_level = static_cast<int>(tr.levels.size()) - 1;
  if (tr.dim_level >= 1) {
    const CascadeLevel& lv = tr.levels[static_cast<std::size_t>(tr.dim_level)];
    double log_m = lv.log_m();
    if (!lv.deep) {
      // beta from |Lambda'(b^nu)| over packed centers at this level
      double r = std::exp(lv.log_r);
      CandidateSet cand = candidate_set(f, r, cand_delta, {opt.grid_density, opt.seed + static_cast<std::uint64_t>(tr.dim_level)});
      PackedSet packed = exclude_and_pack(cand, known_zeros(f, r_shell(r, 5.0, cand.T_r)));
      std::size_t n = packed.centers.size();
      std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(opt.beta_candidates));
      std::vector<double> lds(take, std::numeric_limits<double>::quiet_NaN());
      parallel_for(take, [&](std::size_t i) {
        cplx b = packed.centers[i * n / take];
        try {
          lds[i] = -detail::pull_back(f, tr.levels, tr.dim_level, LogPoint::of(b), std::arg(b)).log_abs_derivative;
        } catch (const Error&) {
        }
      });
      double ref = -detail::pull_back(f, tr.levels, tr.dim_level, lv.b, lv.b.arg).log_abs_derivative;
      double spread = 0.0;
      for (double x : lds)
        if (std::isfinite(x)) spread = std::max(spread, std::abs(x - ref));
      tr.beta_measured = std::exp(spread);
      tr.N0_measured = packing_constant(tr.beta_measured);
    }
    double m = std::exp(std::min(log_m, 700.0));
    tr.measured_dim_estimate = dimension_lower_bound(tr, m, tr.N0_reference).estimate;
    tr.measured_dim_beta_measured = dimension_lower_bound(tr, m, tr.N0_measured).estimate;
    if (log_m > 700.0) {
      // m itself overflows: evaluate the ratio in logs
      double ls = lv.log_sigma;
      tr.measured_dim_estimate = (log_m - std::log(static_cast<double>(tr.N0_reference))) / (-ls);
      tr.measured_dim_beta_measured = (log_m - std::log(static_cast<double>(tr.N0_measured))) / (-ls);
    }
  }
  return tr;
}

}  // namespace dynlab
