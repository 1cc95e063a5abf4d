#pragma once

// JSON / CSV / PGM serialization, pipeline configuration and the staged pipeline.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynlab/errors.hpp"
#include "dynlab/fractal_dimension.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/growth_classifier.hpp"
#include "dynlab/logderiv_toolkit.hpp"
#include "dynlab/modulus_analysis.hpp"
#include "dynlab/proof_engine.hpp"

namespace dynlab {

using nlohmann::json;

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string kind_name(ErrorKind k) { return std::string(to_string(k)); }

// ---------------------------------------------------------------------------
// JSON

inline json to_json(cplx c) { return detail::complex_to_json(c); }

inline json to_json(const RadiusProfile& p) {
  json j = {{"r", p.r},     {"log_M", p.log_M}, {"log_L", p.log_L},
            {"T", p.T},     {"n0", p.n0},       {"N0", p.N0},
            {"samples_per_circle", p.samples_per_circle},
            {"refined", p.refined}, {"M_log_domain", p.M_log_domain}, {"L_log_domain", p.L_log_domain},
            {"ok", p.ok}};
  if (!p.ok) j["error"] = p.error;
  return j;
}

inline json to_json(const GrowthReport& g) {
  json conds = json::array();
  for (const auto& c : g.conditions) {
    json w = json::array();
    for (const auto& [r, v] : c.witness) w.push_back({r, v});
    conds.push_back({{"name", c.name},
                     {"description", c.description},
                     {"verdict", to_string(c.verdict)},
                     {"statistic", c.statistic},
                     {"note", c.note},
                     {"witness", w}});
  }
  json res = json::array();
  for (const auto& r : g.applicable_results) res.push_back({{"name", r.name}, {"status", r.status}, {"reason", r.reason}});
  return {{"conditions", conds},
          {"results", res},
          {"polynomial_growth", g.polynomial_growth},
          {"window", {g.window_lo, g.window_hi}},
          {"thresholds",
           {{"margin", g.thresholds.margin},
            {"window_decades", g.thresholds.window_decades},
            {"doubling_decay", g.thresholds.doubling_decay}}},
          {"exit_code", g.exit_code()}};
}

inline json to_json(const ExclusionDiskSet& s) {
  json disks = json::array();
  for (const auto& d : s.disks) disks.push_back({{"center", to_json(d.center)}, {"radius", d.radius}});
  return {{"mode", to_string(s.mode)}, {"H", s.H},           {"n", s.n},
          {"bound", s.bound},          {"budget", s.budget}, {"budget_used", s.budget_used},
          {"disks", disks}};
}

inline json to_json(const ExclusionVerification& v) {
  return {{"samples_checked", v.samples_checked}, {"max_sum", v.max_sum}, {"argmax", to_json(v.argmax)},
          {"holds", v.holds}};
}

inline json to_json(const InequalityCheck& c) {
  json j = {{"tag", c.tag}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}, {"informational", c.informational}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline json to_json(const KoebeReport& k) {
  return {{"lambda", k.lambda},
          {"samples", k.samples},
          {"ratio", {k.ratio_min, k.ratio_max}},
          {"ratio_bounds", {k.ratio_lo, k.ratio_hi}},
          {"derivative", {k.deriv_min, k.deriv_max}},
          {"derivative_bounds", {k.deriv_lo, k.deriv_hi}},
          {"distortion_ok", k.distortion_ok},
          {"derivative_ok", k.derivative_ok},
          {"quarter_rays", k.quarter_rays},
          {"quarter_hits", k.quarter_hits}};
}

inline json to_json(const LogPoint& p) {
  json j = {{"log_abs", p.log_mag}, {"arg", p.arg}, {"plain", p.plain}};
  if (p.plain) j["z"] = to_json(p.z);
  return j;
}

inline json to_json(const CascadeLevel& l) {
  json checks = json::array();
  for (const auto& c : l.checks) checks.push_back(to_json(c));
  json j = {{"k", l.k},
            {"deep", l.deep},
            {"log_r", l.log_r},
            {"log_T", l.log_T},
            {"log_rho", l.log_rho},
            {"b", to_json(l.b)},
            {"log_abs_f_b", l.log_abs_f_b},
            {"loglog_abs_f_b", l.loglog_abs_f_b},
            {"v", to_json(l.v)},
            {"log_sigma", l.log_sigma},
            {"log_sigma_bound", l.log_sigma_bound},
            {"log_diam", l.log_diam},
            {"log_diam_bound", l.log_diam_bound},
            {"diam_method", l.diam_method},
            {"m_greedy", l.m_greedy},
            {"log_m_area", l.log_m_area},
            {"area_A", l.area_A},
            {"area_A_se", l.area_A_se},
            {"area_B", l.area_B},
            {"zero_count", l.zero_count},
            {"round_trip_max", l.round_trip_max},
            {"q_lattice_max", l.q_lattice_max},
            {"checks", checks}};
  if (l.koebe) j["koebe"] = to_json(*l.koebe);
  return j;
}

inline json to_json(const OrbitCheck& o) {
  return {{"k", o.k},
          {"log_abs", o.log_abs},
          {"annulus", {o.log_lo, o.log_hi}},
          {"annulus_membership", o.annulus_membership},
          {"resolution_limited", o.resolution_limited},
          {"log_deriv", o.log_deriv},
          {"log_deriv_bound", o.log_deriv_bound},
          {"derivative_bound_ok", o.derivative_bound_ok}};
}

inline json to_json(const DimensionEstimate& d) {
  json j = {{"estimate", d.estimate}, {"predicted", d.predicted}, {"vacuous", d.vacuous}, {"level", d.level}};
  if (!d.warning.empty()) j["warning"] = d.warning;
  return j;
}

inline json to_json(const ConstructionTrace& t) {
  json levels = json::array(), orbit = json::array();
  for (const auto& l : t.levels) levels.push_back(to_json(l));
  for (const auto& o : t.orbit_checks) orbit.push_back(to_json(o));
  return {{"function", t.function},
          {"delta", t.delta},
          {"r0", t.r0},
          {"depth", t.depth},
          {"z0", to_json(t.z0)},
          {"levels", levels},
          {"orbit_checks", orbit},
          {"monotone_escape", t.monotone_escape},
          {"all_hard_checks_hold", t.all_hard_checks_hold()},
          {"dimension",
           {{"predicted", t.predicted_dim},
            {"vacuous", t.vacuous},
            {"level", t.dim_level},
            {"beta_measured", t.beta_measured},
            {"N0_measured", t.N0_measured},
            {"N0_reference", t.N0_reference},
            {"estimate", t.measured_dim_estimate},
            {"estimate_beta_measured", t.measured_dim_beta_measured}}},
          {"options",
           {{"grid_density", t.options.grid_density},
            {"koebe_samples", t.options.koebe_samples},
            {"beta_candidates", t.options.beta_candidates},
            {"diameter_samples", t.options.diameter_samples},
            {"beta_reference", t.options.beta_reference},
            {"seed", t.options.seed}}}};
}

inline json to_json(const Window& w) { return json::array({w.x0, w.y0, w.x1, w.y1}); }

inline json to_json(const BoxCountCurve& c) {
  json pts = json::array(), local = json::array();
  for (const auto& [e, n] : c.points) pts.push_back({{"epsilon", e}, {"N", n}});
  for (const auto& [e, s] : c.local_slopes) local.push_back({{"epsilon", e}, {"slope", s}});
  return {{"window", to_json(c.window)},
          {"target", to_string(c.target)},
          {"points", pts},
          {"slope", c.slope},
          {"slope_stderr", c.slope_stderr},
          {"intercept", c.intercept},
          {"fit_range", {c.fit_range.first, c.fit_range.second}},
          {"coarsest_octave_excluded", c.coarsest_octave_excluded},
          {"local_slopes", local},
          {"finest_pair_slope", c.finest_pair_slope},
          {"coarsest_pair_slope", c.coarsest_pair_slope}};
}

inline json to_json(const WindowComparison& w) {
  json curves = json::array();
  for (const auto& c : w.curves) curves.push_back(to_json(c));
  return {{"curves", curves}, {"max_slope_difference", w.max_slope_difference}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string profiles_csv(const std::vector<RadiusProfile>& ps) {
  std::string out = "r,log_M,log_L,T,n0,N0,samples_per_circle,refined,ok\n";
  for (const auto& p : ps)
    out += csv_number(p.r) + "," + csv_number(p.log_M) + "," + csv_number(p.log_L) + "," + csv_number(p.T) + "," +
           std::to_string(p.n0) + "," + csv_number(p.N0) + "," + std::to_string(p.samples_per_circle) + "," +
           (p.refined ? "1" : "0") + "," + (p.ok ? "1" : "0") + "\n";
  return out;
}

inline std::string boxcount_csv(const BoxCountCurve& c) {
  std::string out = "epsilon,N\n";
  for (const auto& [e, n] : c.points) out += csv_number(e) + "," + std::to_string(n) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

/// Square pixels of side (x1 - x0) / width; the window height must match.
inline std::string render_escape(const FunctionSpec& f, const Window& w, int width, int height, int max_iter,
                                 const EscapePolicy& pol = {}) {
  require(width >= 1 && height >= 1, ErrorKind::InvalidArgument, "resolution must be positive");
  if (static_cast<double>(width) * height > 8192.0 * 8192.0)
    throw Error(ErrorKind::ResolutionCap, "resolution exceeds 8192 x 8192");
  double eps = w.width() / width;
  require(std::abs(w.height() / height - eps) <= 1e-9 * eps, ErrorKind::InvalidArgument,
          "window aspect ratio does not match the resolution");
  EscapeGrid g = escape_grid(f, w, eps, 1, max_iter, pol);
  require(g.nx == width && g.ny == height, ErrorKind::InvalidArgument, "resolution does not divide the window");
  return to_pgm(g);
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  FunctionSpec function;
  double r_min = 10.0, r_max = 1e4;
  int points_per_decade = 8;
  int resolution = 1024;
  double delta = 0.25;
  int depth = 3;
  double r0 = 0.0;  // construction start radius; 0 means r_min
  std::vector<Window> windows{{-2, -2, 2, 2}};
  std::vector<double> epsilons{1.0 / 128, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};
  int max_iter = 200;
  int samples_per_cell = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> stages{"profile", "classify", "construct", "dimension", "render"};
  std::string output_dir = "out";

  bool requested(const std::string& stage) const {
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
  }

  double construction_radius() const { return r0 > 0.0 ? r0 : r_min; }

  /// Everything that influences the outputs; output_dir is left out.
  json to_json() const {
    json ws = json::array();
    for (const auto& w : windows) ws.push_back(dynlab::to_json(w));
    return {{"function", dynlab::to_json(function)},
            {"radius_grid", {{"r_min", r_min}, {"r_max", r_max}, {"points_per_decade", points_per_decade}}},
            {"resolution", resolution},
            {"delta", delta},
            {"depth", depth},
            {"r0", construction_radius()},
            {"windows", ws},
            {"epsilons", epsilons},
            {"max_iter", max_iter},
            {"samples_per_cell", samples_per_cell},
            {"seed", seed},
            {"stages", stages}};
  }

  std::string hash() const { return fnv1a_hex(to_json().dump()); }

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::ConfigError, what); };
    if (!(r_min > 0.0) || !(r_max > r_min)) bad("radius_grid needs 0 < r_min < r_max");
    if (points_per_decade < 4) bad("radius_grid.points_per_decade must be >= 4");
    if (resolution < 64) bad("resolution must be >= 64");
    if (!(delta > 0.0 && delta < 2.0 / 7.0)) bad("delta must lie in (0, 2/7)");
    if (depth < 0) bad("depth must be >= 0");
    if (r0 < 0.0) bad("r0 must be positive");
    if (windows.empty()) bad("windows must be nonempty");
    for (const auto& w : windows)
      if (!(w.x1 > w.x0 && w.y1 > w.y0)) bad("window with x1 <= x0 or y1 <= y0");
    if (epsilons.size() < 4) bad("epsilons needs at least 4 values");
    double e0 = *std::min_element(epsilons.begin(), epsilons.end());
    double e1 = *std::max_element(epsilons.begin(), epsilons.end());
    if (!(e0 > 0.0)) bad("epsilons must be positive");
    if (e1 < 4.0 * e0 * (1 - 1e-12)) bad("epsilons must span 2 octaves");
    for (double e : epsilons) {
      double q = std::log2(e / e0);
      if (std::abs(q - std::round(q)) > 1e-9) bad("epsilons must be dyadic multiples of the finest");
      for (const auto& w : windows) {
        double cx = w.width() / e, cy = w.height() / e;
        if (std::abs(cx - std::round(cx)) > 1e-6 || std::abs(cy - std::round(cy)) > 1e-6)
          bad("epsilon does not divide every window");
      }
    }
    if (max_iter < 1) bad("max_iter must be >= 1");
    if (samples_per_cell < 1) bad("samples_per_cell must be >= 1");
    if (stages.empty()) bad("stages must be nonempty");
    for (const auto& st : stages)
      if (st != "profile" && st != "classify" && st != "construct" && st != "dimension" && st != "render")
        bad("unknown stage '" + st + "'");
    if (requested("classify") && !requested("profile")) bad("classify needs the profile stage");
  }

  static PipelineConfig from_json(const json& j) {
    PipelineConfig c;
    try {
      if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
      if (j.contains("function")) c.function = function_from_json(j["function"]);
      if (j.contains("radius_grid")) {
        const auto& g = j["radius_grid"];
        if (g.is_array()) {
          if (g.size() != 3) throw Error(ErrorKind::ConfigError, "radius_grid must be [r_min, r_max, ppd]");
          c.r_min = g[0].get<double>();
          c.r_max = g[1].get<double>();
          c.points_per_decade = g[2].get<int>();
        } else {
          c.r_min = g.value("r_min", c.r_min);
          c.r_max = g.value("r_max", c.r_max);
          c.points_per_decade = g.value("points_per_decade", c.points_per_decade);
        }
      }
      c.resolution = j.value("resolution", c.resolution);
      c.delta = j.value("delta", c.delta);
      c.depth = j.value("depth", c.depth);
      c.r0 = j.value("r0", c.r0);
      if (j.contains("windows")) {
        c.windows.clear();
        for (const auto& w : j["windows"]) {
          if (!w.is_array() || w.size() != 4) throw Error(ErrorKind::ConfigError, "window must be [x0, y0, x1, y1]");
          c.windows.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>(), w[3].get<double>()});
        }
      }
      if (j.contains("epsilons")) c.epsilons = j["epsilons"].get<std::vector<double>>();
      c.max_iter = j.value("max_iter", c.max_iter);
      c.samples_per_cell = j.value("samples_per_cell", c.samples_per_cell);
      c.seed = j.value("seed", c.seed);
      if (j.contains("stages")) c.stages = j["stages"].get<std::vector<std::string>>();
      c.output_dir = j.value("output_dir", c.output_dir);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
    c.validate();
    return c;
  }

  static PipelineConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
    return from_json(j);
  }
};

struct StageRecord {
  std::string name;
  bool ok = true;
  std::string error_kind;
  std::string message;
};

struct PipelineResult {
  int exit_code = 0;
  std::string config_hash;
  std::vector<StageRecord> stages;
  std::optional<GrowthReport> growth;
  std::optional<ConstructionTrace> trace;
  std::vector<BoxCountCurve> curves;
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

/// Runs the requested stages among profile, classify, construct, dimension and
/// render, in that order. A failing stage is recorded and its artifact carries
/// the error; later stages still run. Exit code: 4 on any stage error, otherwise
/// the classification code (0 applies, 2 inconclusive, 3 hypothesis fails).
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  PipelineResult res;
  res.config_hash = cfg.hash();
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  auto header = [&](const std::string& stage) {
    return json{{"config_hash", res.config_hash}, {"stage", stage}, {"function", cfg.function.name()}};
  };
  auto failed = [&](const std::string& stage, const Error& e) {
    res.stages.push_back({stage, false, kind_name(e.kind()), e.detail()});
    json j = header(stage);
    j["error"] = {{"kind", kind_name(e.kind())}, {"message", e.detail()}};
    return j;
  };

  std::vector<RadiusProfile> profiles;
  if (cfg.requested("profile")) {
    try {
      profiles = scan_profiles(cfg.function, cfg.r_min, cfg.r_max, cfg.points_per_decade, cfg.resolution);
      write_text(dir / "profiles.csv", profiles_csv(profiles));
      res.stages.push_back({"profile", true, "", ""});
    } catch (const Error& e) {
      failed("profile", e);
      write_text(dir / "profiles.csv", "error," + kind_name(e.kind()) + "\n");
    }
  }

  if (cfg.requested("classify")) {
    json j = header("classify");
    if (profiles.empty()) {
      j["error"] = {{"kind", "InsufficientData"}, {"message", "profile stage produced no radii"}};
      res.stages.push_back({"classify", false, "InsufficientData", "profile stage produced no radii"});
    } else {
      try {
        res.growth = classify_conditions(profiles);
        j["report"] = to_json(*res.growth);
        res.stages.push_back({"classify", true, "", ""});
      } catch (const Error& e) {
        j = failed("classify", e);
      }
    }
    write_text(dir / "growth_report.json", dump_report(j));
  }

  if (cfg.requested("construct")) {
    json j = header("construct");
    try {
      CascadeOptions opt;
      opt.seed = cfg.seed;
      res.trace = build_cascade(cfg.function, cfg.construction_radius(), cfg.delta, cfg.depth, opt);
      j["trace"] = to_json(*res.trace);
      res.stages.push_back({"construct", true, "", ""});
    } catch (const Error& e) {
      j = failed("construct", e);
    }
    write_text(dir / "construction_trace.json", dump_report(j));
  }

  if (cfg.requested("dimension")) {
    json j = header("dimension");
    try {
      DimensionOptions opt;
      opt.samples_per_cell = cfg.samples_per_cell;
      opt.max_iter = cfg.max_iter;
      opt.seed = cfg.seed;
      json curves = json::array();
      for (const auto& w : cfg.windows) {
        BoxCountCurve c = box_count_fit(proxy_masks(cfg.function, w, cfg.epsilons, opt, BoxTarget::EscapingBoundary),
                                        opt.exclude_coarsest);
        c.window = w;
        c.target = BoxTarget::EscapingBoundary;
        curves.push_back(to_json(c));
        res.curves.push_back(std::move(c));
      }
      j["curves"] = curves;
      double diff = 0.0;
      for (std::size_t a = 0; a < res.curves.size(); ++a)
        for (std::size_t b = a + 1; b < res.curves.size(); ++b)
          diff = std::max(diff, std::abs(res.curves[a].slope - res.curves[b].slope));
      j["max_slope_difference"] = diff;
      res.stages.push_back({"dimension", true, "", ""});
    } catch (const Error& e) {
      j = failed("dimension", e);
    }
    write_text(dir / "boxcount.json", dump_report(j));
  }

  if (cfg.requested("render")) {
    try {
      const Window& w = cfg.windows.front();
      double e0 = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
      int width = static_cast<int>(std::lround(w.width() / e0));
      int height = static_cast<int>(std::lround(w.height() / e0));
      write_text(dir / "render.pgm", render_escape(cfg.function, w, width, height, cfg.max_iter));
      res.stages.push_back({"render", true, "", ""});
    } catch (const Error& e) {
      failed("render", e);
      write_text(dir / "render.pgm", "");
    }
  }

  bool any_failed = false;
  json stages = json::array();
  for (const auto& s : res.stages) {
    any_failed = any_failed || !s.ok;
    json e = {{"stage", s.name}, {"ok", s.ok}};
    if (!s.ok) e["error"] = {{"kind", s.error_kind}, {"message", s.message}};
    stages.push_back(e);
  }
  res.exit_code = any_failed ? 4 : (res.growth ? res.growth->exit_code() : 0);
  json summary = {{"config_hash", res.config_hash}, {"config", cfg.to_json()}, {"stages", stages},
                  {"exit_code", res.exit_code}};
  write_text(dir / "pipeline_report.json", dump_report(summary));
  return res;
}

}  // namespace dynlab
