// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dynlab/dynlab.hpp"
#include "oracles.hpp"

using namespace dynlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome closed_forms() {
  Outcome o;
  auto e = FunctionSpec::scaled_exp(1.0);
  for (double r : {1.0, 10.0, 50.0}) {
    o.require(rel_close(max_modulus(e, r).log_value, r, 1e-9), fmt("log M(%g, e^z)", r));
    o.require(rel_close(min_modulus(e, r).log_value, -r, 1e-9), fmt("log L(%g, e^z)", r));
    double q = oracle::circle_mean([&](double t) { return std::max(0.0, r * std::cos(t)); },
                                   {oracle::kPi / 2, 3 * oracle::kPi / 2});
    o.require(rel_close(characteristic_T(e, r), q, 1e-6) && rel_close(q, r / oracle::kPi, 1e-12),
              fmt("T(%g, e^z)", r));
  }
  for (double r : {1.0, 2.0, 5.0})
    o.require(rel_close(max_modulus(FunctionSpec::sine(), r).value(), std::sinh(r), 1e-9), fmt("M(%g, sin)", r));
  o.require(count_zeros(FunctionSpec::sine(), 10.0) == 7, "count_zeros(sin, 10)");
  o.require(rel_close(min_modulus(FunctionSpec::polynomial({-1.0, 0.0, 0.0, 1.0}), 2.0).value(), 7.0, 1e-9),
            "min_modulus(z^3 - 1, 2)");
  o.detail = o.pass ? "M, L, T, count_zeros, min_modulus match closed forms" : o.detail;
  return o;
}

Outcome inequalities() {
  Outcome o;
  std::vector<FunctionSpec> fams{FunctionSpec::scaled_exp(1.0), FunctionSpec::sine().with_shift(1.0),
                                 FunctionSpec::cosine(), FunctionSpec::polynomial({-1.0, 0.0, 0.0, 1.0})};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int violations = 0, configs = 0;
  for (const auto& f : fams) {
    for (int i = 0; i < 1000; ++i) {
      double r = 2.0 + 28.0 * U(rng), K = 1.2 + 2.8 * U(rng), R = K * r;
      double Tr = characteristic_T(f, r, 256), TR = characteristic_T(f, R, 256);
      bool ok = check_growth_sandwich(r, Tr, max_modulus(f, r, 256).log_value, R, TR).holds();
      // log M convex in log r on the triple (r, sqrt(rR), R)
      double rm = std::sqrt(r * R);
      double lm = max_modulus(f, rm, 256).log_value;
      double chord = 0.5 * (max_modulus(f, r, 256).log_value + max_modulus(f, R, 256).log_value);
      ok = ok && lm <= chord + 1e-9 * std::max(1.0, std::abs(chord));
      cplx z = std::polar(r * std::sqrt(U(rng)), 2 * kPi * U(rng));
      double s = std::abs(z) + (R - r) * 0.5 + 0.5;
      auto zeros = known_zeros(f, s);
      bool near_zero = false;
      for (cplx zj : zeros) near_zero |= std::abs(z - zj) < 1e-6;
      if (!near_zero) ok = ok && goldberg_check(f, z, s, zeros).holds;
      violations += !ok;
      ++configs;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) o.detail = std::to_string(configs) + " configurations over 4 families, 0 violations";
  return o;
}

Outcome exclusion() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> N(1, 50);
  int violations = 0;
  for (int set = 0; set < 100; ++set) {
    int n = N(rng);
    std::vector<cplx> zeros;
    double spread = 0.5 + 10 * U(rng);
    for (int k = 0; k < n; ++k) {
      if (k > 0 && U(rng) < 0.1) zeros.push_back(zeros[static_cast<std::size_t>(k) - 1]);  // repeated zeros
      else zeros.emplace_back(spread * (2 * U(rng) - 1), spread * (2 * U(rng) - 1));
    }
    double H = 0.1 + 3 * U(rng);
    for (auto mode : {ExclusionMode::QuadraticSum, ExclusionMode::LinearSum}) {
      auto s = fuchs_macintyre_disks(zeros, H, mode);
      double dn = n;
      double bound = mode == ExclusionMode::QuadraticSum ? 2 * dn / H : dn * (1 + std::log(dn)) / H;
      double budget = mode == ExclusionMode::QuadraticSum ? 4 * H * H : 2 * H;
      double used = 0.0;
      for (const auto& d : s.disks) used += mode == ExclusionMode::QuadraticSum ? d.radius * d.radius : d.radius;
      bool ok = s.disks.size() <= zeros.size() && used <= budget * (1 + 1e-12) && s.bound == bound && s.budget == budget;
      // Monte Carlo over a disk covering every zero and exclusion disk
      double R = 0.0;
      for (cplx z : zeros) R = std::max(R, std::abs(z));
      for (const auto& d : s.disks) R = std::max(R, std::abs(d.center) + d.radius);
      R = 1.5 * R + H;
      double worst = 0.0;
      for (int k = 0; k < 10000; ++k) {
        cplx p = std::polar(R * std::sqrt(U(rng)), 2 * kPi * U(rng));
        bool inside = false;
        for (const auto& d : s.disks) inside |= std::abs(p - d.center) <= d.radius;
        if (inside) continue;
        double sum = 0.0;
        for (cplx z : zeros) sum += 1.0 / std::abs(p - z);
        worst = std::max(worst, sum);
      }
      ok = ok && worst <= bound * (1 + 1e-12);
      violations += !ok;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) o.detail = "200 disk sets, budgets exact, 10^4 samples each, 0 violations";
  return o;
}

Outcome good_radii() {
  Outcome o;
  std::vector<double> g32;
  for (int i = 0; i < 32; ++i) g32.push_back(100.0 * std::pow(100.0, i / 31.0));
  auto scan = good_radius_scan(FunctionSpec::scaled_exp(1.0), g32);
  int bad = 0, bound_fail = 0;
  for (const auto& g : scan.radii) {
    bad += !g.good;
    bound_fail += !g.max_modulus_bound;
    double t = g.r / oracle::kPi;
    o.require(g.r <= t * std::log(t) * std::log(t), fmt("closed form fails at r = %g", g.r));
  }
  o.require(bad == 0, std::to_string(bad) + " exceptional radii");
  o.require(bound_fail == 0, std::to_string(bound_fail) + " log M bound failures");
  if (o.pass) o.detail = "32 radii in [1e2, 1e4]: none exceptional, log M <= T (log T)^2 everywhere";
  return o;
}

Outcome packing() {
  Outcome o;
  const double r = 1000.0, delta = 0.25, T = r / oracle::kPi;
  auto c = candidate_set(FunctionSpec::scaled_exp(1.0), r, delta);
  double lower = 2 * r * r / std::pow(T, 2 * delta);
  o.require(rel_close(c.area_lower_bound, lower, 0.05), "area threshold differs from 2r^2/T^(2 delta)");
  o.require(c.area_estimate >= lower, fmt("area %.4g < %.4g", c.area_estimate, lower));
  auto p = exclude_and_pack(c, {});
  int need = static_cast<int>(std::ceil(std::pow(T, 2 - 7 * delta)));
  o.require(need == 5, "ceil(T^(2 - 7 delta)) != 5");
  o.require(p.m_r >= need, fmt("m(r) = %g < %g", p.m_r, need));
  if (o.pass) o.detail = fmt("area %.4g >= %.4g, m(r) = %g >= %g", c.area_estimate, lower, p.m_r, need);
  return o;
}

Outcome cascade() {
  Outcome o;
  auto tr = build_cascade(FunctionSpec::scaled_exp(1.0), 50.0, 0.25, 3);
  o.require(tr.levels.size() == 3, "level count");
  for (const auto& oc : tr.orbit_checks) o.require(oc.annulus_membership, fmt("orbit step %g outside annulus", oc.k));
  for (const auto& l : tr.levels) {
    for (const auto& c : l.checks) o.require(c.informational || c.holds, "level " + std::to_string(l.k) + " " + c.tag);
    o.require(l.round_trip_max < 1e-8, fmt("round trip %g at level %g", l.round_trip_max, l.k));
    o.require(l.log_sigma >= -(l.log_r - std::log(oracle::kPi)) - 1e-9, fmt("sigma < 1/T at level %g", l.k));
  }
  o.require(tr.all_hard_checks_hold(), "hard checks");
  if (o.pass) o.detail = "depth 3, all per-level checks green";
  return o;
}

Outcome dimension() {
  Outcome o;
  std::vector<std::pair<double, Mask>> sq, circ, cantor;
  for (int k = 3; k <= 8; ++k) {
    double e = std::ldexp(1.0, -k);
    sq.emplace_back(e, oracle::filled_square(e));
    circ.emplace_back(e, oracle::circle_cells(e));
  }
  for (int k = 5; k <= 10; ++k) cantor.emplace_back(std::ldexp(1.0, -k), oracle::cantor_dust(9, k));
  double s_sq = box_count_fit(sq).slope, s_circ = box_count_fit(circ).slope, s_c = box_count_fit(cantor).slope;
  o.require(std::abs(s_sq - 2.0) <= 0.05, fmt("square %.3f", s_sq));
  o.require(std::abs(s_circ - 1.0) <= 0.08, fmt("circle %.3f", s_circ));
  o.require(std::abs(s_c - 1.262) <= 0.08, fmt("cantor %.3f", s_c));

  auto z2 = FunctionSpec::polynomial({0.0, 0.0, 1.0});
  auto proxy = window_dimension(z2, {-2, -2, 2, 2}, std::ldexp(1.0, -8), 5);
  o.require(std::abs(proxy.slope - 1.0) <= 0.08, fmt("z^2 proxy %.3f", proxy.slope));
  std::vector<double> eps;
  for (int k = 8; k >= 3; --k) eps.push_back(std::ldexp(1.0, -k));
  auto cmp = window_independence(z2, {{-2, -2, 2, 2}, {-1.5, -1.5, 1.5, 1.5}, {0, -1.5, 1.5, 1.5}}, eps);
  o.require(cmp.max_slope_difference < 0.1, fmt("window difference %.3f", cmp.max_slope_difference));

  auto q = FunctionSpec::scaled_exp(0.25);
  Window w{0, -2, 4, 2};
  auto nonempty = julia_proxy_grid(q, w, std::ldexp(1.0, -3), 1, 200).boundary.count();
  o.require(nonempty > 0, "empty boundary mask for e^z/4");
  auto c = window_dimension(q, w, std::ldexp(1.0, -8), 5);
  o.require(c.finest_pair_slope >= c.coarsest_pair_slope,
            fmt("finest pair %.4f < coarsest pair %.4f", c.finest_pair_slope, c.coarsest_pair_slope));
  o.require(c.slope >= 1.5, fmt("e^z/4 slope %.3f", c.slope));
  if (o.pass) {
    o.detail = fmt("square %.3f, circle %.3f, cantor %.3f, ", s_sq, s_circ, s_c) +
               fmt("z^2 %.3f (window diff %.3f), ", proxy.slope, cmp.max_slope_difference) +
               fmt("e^z/4 %.3f (finest pair %.4f, coarsest pair %.4f)", c.slope, c.finest_pair_slope,
                   c.coarsest_pair_slope);
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  Outcome o;
  PipelineConfig cfg;
  cfg.function = FunctionSpec::scaled_exp(1.0);
  cfg.r_min = 10;
  cfg.r_max = 1e4;
  cfg.r0 = 50;
  cfg.depth = 3;
  cfg.windows = {{-2, -2, 2, 2}, {0, -2, 2, 2}};
  cfg.max_iter = 20;
  cfg.seed = 1;
  fs::path base = fs::temp_directory_path() / "dynlab_acceptance";
  fs::remove_all(base);
  cfg.output_dir = (base / "a").string();
  int ea = run_pipeline(cfg).exit_code;
  cfg.output_dir = (base / "b").string();
  int eb = run_pipeline(cfg).exit_code;
  o.require(ea == eb, "exit codes differ");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    ++files;
    o.require(slurp(e.path()) == slurp(base / "b" / e.path().filename()), e.path().filename().string() + " differs");
  }
  o.require(files == 6, std::to_string(files) + " files in the bundle");
  if (o.pass) o.detail = std::to_string(files) + " files byte-identical, exit code " + std::to_string(ea);
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  struct Item {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Item items[] = {{1, "closed-form values", closed_forms}, {2, "inequality suite", inequalities},
                        {3, "exclusion disks", exclusion},       {4, "good radii", good_radii},
                        {5, "packing", packing},                 {6, "cascade", cascade},
                        {7, "dimension pipeline", dimension},    {8, "determinism", determinism}};
  int failed = 0;
  for (const auto& it : items) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it.run();
    } catch (const Error& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", it.id, it.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
