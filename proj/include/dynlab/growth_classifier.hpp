#pragma once

// Finite-scale verdicts on the growth hypotheses. Asymptotic conditions are
// judged by the trend of a witness sequence over the top decade of the scan;
// "inconclusive" is a normal outcome.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/modulus_analysis.hpp"
#include "dynlab/parallel.hpp"

namespace dynlab {

/// Geometric grid r_min 10^{i/ppd}, i = 0..round(ppd log10(r_max/r_min)).
inline std::vector<double> geometric_grid(double r_min, double r_max, int points_per_decade) {
  require(r_min > 1.0, ErrorKind::DegenerateT, "r_min must exceed 1 (log log r and T are degenerate)");
  require(r_max > r_min, ErrorKind::InvalidArgument, "need r_min < r_max");
  require(points_per_decade >= 4, ErrorKind::InvalidArgument, "points_per_decade must be >= 4");
  int steps = static_cast<int>(std::lround(points_per_decade * std::log10(r_max / r_min)));
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(r_min * std::pow(10.0, static_cast<double>(i) / points_per_decade));
  g.back() = r_max;
  return g;
}

inline std::vector<RadiusProfile> scan_profiles(const FunctionSpec& f, double r_min, double r_max, int points_per_decade,
                                                int resolution = 1024) {
  auto grid = geometric_grid(r_min, r_max, points_per_decade);
  std::vector<RadiusProfile> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { out[i] = radius_profile(f, grid[i], resolution); });
  return out;
}

enum class Verdict { Holds, Fails, Inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    default: return "inconclusive";
  }
}

struct GrowthThresholds {
  double margin = 0.05;
  double window_decades = 1.0;  // size of the top window
  double doubling_decay = 0.9;        // (d_last - 1)/(d_first - 1) below this reads as d -> 1
};

using Witness = std::vector<std::pair<double, double>>;

struct ConditionEntry {
  std::string name;
  std::string description;
  Verdict verdict = Verdict::Inconclusive;
  Witness witness;
  double statistic = std::numeric_limits<double>::quiet_NaN();  // rise, max ratio, best d ...
  std::string note;
};

struct ResultEntry {
  std::string name;    // "main_theorem", "bounded_on_curve" ...
  std::string status;  // "applies", "conditional", "indicated", "not_established", "not_applicable"
  std::string reason;
};

struct GrowthReport {
  std::vector<ConditionEntry> conditions;
  std::vector<ResultEntry> applicable_results;
  bool polynomial_growth = false;
  double window_lo = 0.0, window_hi = 0.0;
  GrowthThresholds thresholds;

  const ConditionEntry& condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw Error(ErrorKind::InvalidArgument, "unknown condition " + name);
  }
  ConditionEntry& condition(const std::string& name) {
    return const_cast<ConditionEntry&>(static_cast<const GrowthReport&>(*this).condition(name));
  }
  bool some_result_applies() const {
    for (const auto& r : applicable_results)
      if (r.name != "main_theorem" && (r.status == "applies" || r.status == "indicated")) return true;
    return false;
  }
  /// 0 some corollary applies, 2 inconclusive, 3 hypotheses fail.
  int exit_code() const {
    if (some_result_applies()) return 0;
    if (polynomial_growth || condition("loglog_growth").verdict == Verdict::Fails) return 3;
    return 2;
  }
};

namespace detail {

inline Witness window(const Witness& w, double lo, double hi) {
  Witness out;
  for (const auto& p : w)
    if (p.first >= lo * (1 - 1e-12) && p.first <= hi * (1 + 1e-12)) out.push_back(p);
  return out;
}

// Least-squares slope against log r times the log r span of the window.
inline double rise(const Witness& w) {
  if (w.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [r, v] : w) {
    double x = std::log(r);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  double n = static_cast<double>(w.size());
  double den = n * sxx - sx * sx;
  if (den <= 0) return std::numeric_limits<double>::quiet_NaN();
  double slope = (n * sxy - sx * sy) / den;
  return slope * std::log(w.back().first / w.front().first);
}

inline double max_value(const Witness& w) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : w) m = std::max(m, p.second);
  return m;
}

inline double min_value(const Witness& w) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : w) m = std::min(m, p.second);
  return m;
}

// log M at radius x, interpolating log log M linearly in log r.
inline double interp_log_M(const std::vector<RadiusProfile>& p, double x) {
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (x >= p[i].r * (1 - 1e-12) && x <= p[i + 1].r * (1 + 1e-12)) {
      double t = std::log(x / p[i].r) / std::log(p[i + 1].r / p[i].r);
      t = std::clamp(t, 0.0, 1.0);
      double a = p[i].log_M, b = p[i + 1].log_M;
      if (a > 0 && b > 0) return std::exp((1 - t) * std::log(a) + t * std::log(b));
      return (1 - t) * a + t * b;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline GrowthReport classify_conditions(const std::vector<RadiusProfile>& all, const GrowthThresholds& th = {}) {
  std::vector<RadiusProfile> p;
  for (const auto& x : all)
    if (x.ok) p.push_back(x);
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.r < b.r; });
  if (p.size() < 8 || p.back().r < 100.0 * p.front().r * (1 - 1e-9))
    throw Error(ErrorKind::InsufficientData, "need at least 8 valid profiles spanning 2 decades");

  const double m = th.margin;
  const double r_max = p.back().r;
  const double lo = r_max / std::pow(10.0, th.window_decades);
  GrowthReport rep;
  rep.thresholds = th;
  rep.window_lo = lo;
  rep.window_hi = r_max;

  Witness q, qT, ratio, p_yy, d, gap, order;
  for (const auto& x : p) {
    double llr = std::log(std::log(x.r));
    if (x.log_M > 0 && x.r > kE) q.emplace_back(x.r, std::log(x.log_M) / llr);
    if (x.T > 0 && x.r > kE) qT.emplace_back(x.r, std::log(x.T) / llr);
    if (x.log_M > 0) {
      double rt = x.log_L / x.log_M;
      if (std::isfinite(rt)) {
        ratio.emplace_back(x.r, rt);
        gap.emplace_back(x.r, (1.0 - rt) * std::log(x.r));
      }
      p_yy.emplace_back(x.r, std::log(x.log_M) / std::log(x.r));
      order.emplace_back(x.r, x.log_M / std::log(x.r));
      double m2 = detail::interp_log_M(p, 2.0 * x.r);
      if (std::isfinite(m2)) d.emplace_back(x.r, m2 / x.log_M);
    }
  }

  auto trend_entry = [&](const std::string& name, const std::string& desc, const Witness& w) {
    ConditionEntry e{name, desc, Verdict::Inconclusive, w, 0.0, ""};
    Witness win = detail::window(w, lo, r_max);
    double rs = detail::rise(win);
    e.statistic = rs;
    if (std::isnan(rs)) e.note = "too few points in window";
    else if (rs >= m) e.verdict = Verdict::Holds;
    else if (rs <= -m) e.verdict = Verdict::Fails;
    return e;
  };

  rep.conditions.push_back(trend_entry("loglog_growth", "loglog M(r) / loglog r -> infinity", q));
  rep.conditions.push_back(trend_entry("characteristic_growth", "log T(r) / loglog r -> infinity", qT));

  {
    ConditionEntry x{"ratio_below_one", "limsup log L(r) / log M(r) < 1", Verdict::Inconclusive, ratio, 0.0, ""};
    ConditionEntry y{"ratio_one", "limsup log L(r) / log M(r) = 1", Verdict::Inconclusive, ratio, 0.0, ""};
    Witness win = detail::window(ratio, lo, r_max);
    if (win.empty()) {
      x.note = y.note = "too few points in window";
    } else {
      double mx = detail::max_value(win);
      x.statistic = y.statistic = mx;
      if (mx <= 1.0 - 1.5 * m) {
        x.verdict = Verdict::Holds;
        y.verdict = Verdict::Fails;
      } else if (mx >= 1.0 - 0.5 * m) {
        x.verdict = Verdict::Fails;
        y.verdict = Verdict::Holds;
      }
    }
    rep.conditions.push_back(x);
    rep.conditions.push_back(y);
  }

  {
    ConditionEntry e{"positive_lower_order", "liminf loglog M(r) / log r > 0", Verdict::Inconclusive, p_yy, 0.0, ""};
    Witness win = detail::window(p_yy, lo, r_max);
    double rs = detail::rise(win);
    if (!std::isnan(rs)) {
      e.statistic = detail::min_value(win);
      if (e.statistic >= m && rs > -m) e.verdict = Verdict::Holds;
      else if (rs <= -m) e.verdict = Verdict::Fails;
    }
    rep.conditions.push_back(e);
  }

  {
    ConditionEntry e{"doubling", "log M(2r) >= d log M(r) for some d > 1", Verdict::Inconclusive, d, 0.0, ""};
    Witness win = detail::window(d, lo / 2.0, r_max / 2.0);
    if (win.size() >= 2) {
      double best = detail::min_value(win);
      double first = win.front().second - 1.0, last = win.back().second - 1.0;
      double decay = first > 0 ? last / first : 0.0;
      e.statistic = best;
      e.note = "decay ratio " + std::to_string(decay);
      if (best >= 1.0 + m && decay >= th.doubling_decay) e.verdict = Verdict::Holds;
      else if (decay < th.doubling_decay || detail::max_value(win) < 1.0 + m) e.verdict = Verdict::Fails;
    } else {
      e.note = "too few (r, 2r) pairs in window";
    }
    rep.conditions.push_back(e);
  }

  {
    ConditionEntry e = trend_entry("ratio_gap", "(1 - log L(r)/log M(r)) log r -> infinity", gap);
    if (e.verdict == Verdict::Inconclusive && !std::isnan(e.statistic) && e.statistic <= 0.0) e.verdict = Verdict::Fails;
    rep.conditions.push_back(e);
  }

  // log M / log r settling to a constant is polynomial growth
  {
    Witness win = detail::window(order, lo, r_max);
    double rs = detail::rise(win);
    rep.polynomial_growth = !std::isnan(rs) && std::abs(rs) < m;
  }

  // doubling implies positive lower order and hence loglog growth; a contradicting trend verdict is downgraded
  if (rep.condition("doubling").verdict == Verdict::Holds) {
    for (const char* c : {"loglog_growth", "positive_lower_order"}) {
      auto& e = rep.condition(c);
      if (e.verdict == Verdict::Fails) {
        e.verdict = Verdict::Inconclusive;
        e.note = "downgraded: contradicts the doubling condition";
      }
    }
  }

  auto v = [&](const char* c) { return rep.condition(c).verdict; };
  auto status = [](Verdict x) {
    return x == Verdict::Holds ? "applies" : x == Verdict::Fails ? "not_applicable" : "not_established";
  };
  const bool poly = rep.polynomial_growth;
  auto gate = [&](const char* s) { return poly ? std::string("not_applicable") : std::string(s); };

  rep.applicable_results.push_back(
      {"main_theorem", poly ? "not_applicable" : v("loglog_growth") == Verdict::Holds ? "conditional" : status(v("loglog_growth")),
       "needs loglog growth and a Fatou set without multiply connected components"});
  {
    Witness win;
    for (const auto& x : p)
      if (x.r >= lo) win.emplace_back(x.r, x.log_L);
    bool bounded_hint = !win.empty() && detail::max_value(win) <= 0.0;
    rep.applicable_results.push_back(
        {"bounded_on_curve", gate(bounded_hint ? "indicated" : "not_established"),
         "min modulus <= 1 on every circle of the top decade is consistent with f bounded on a curve"});
  }
  rep.applicable_results.push_back({"ratio_below_one", gate(status(v("ratio_below_one"))), "limsup log L / log M < 1"});
  rep.applicable_results.push_back({"ratio_gap", gate(status(v("ratio_gap"))), "(1 - log L / log M) log r -> infinity"});
  rep.applicable_results.push_back({"doubling", gate(status(v("doubling"))), "log M(2r) >= d log M(r), d > 1"});
  return rep;
}

}  // namespace dynlab
