#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dynlab/dynlab.hpp"

using namespace dynlab;
namespace fs = std::filesystem;

namespace {

std::vector<double> split_numbers(const std::string& s, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "not a number: '" + item + "'");
    }
  }
  return out;
}

// "exp", "exp:0.25", "sin", "cos", "poly:c0,c1,...", or a JSON function spec.
FunctionSpec parse_function(const std::string& s) {
  if (!s.empty() && s.front() == '{') {
    try {
      return function_from_json(json::parse(s));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
  }
  auto colon = s.find(':');
  std::string kind = s.substr(0, colon), rest = colon == std::string::npos ? "" : s.substr(colon + 1);
  if (kind == "exp") return FunctionSpec::scaled_exp(rest.empty() ? 1.0 : split_numbers(rest).at(0));
  if (kind == "sin") return FunctionSpec::sine();
  if (kind == "cos") return FunctionSpec::cosine();
  if (kind == "poly") {
    std::vector<cplx> c;
    for (double v : split_numbers(rest)) c.emplace_back(v, 0.0);
    return FunctionSpec::polynomial(c);
  }
  throw Error(ErrorKind::ConfigError, "unknown function '" + s + "'");
}

Window parse_window(const std::string& s) {
  auto v = split_numbers(s);
  if (v.size() != 4) throw Error(ErrorKind::ConfigError, "window must be x0,y0,x1,y1");
  return {v[0], v[1], v[2], v[3]};
}

struct Common {
  std::string config_path;
  std::string function;
  std::string output_dir;
  long long seed = -1;

  PipelineConfig load() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    if (!function.empty()) c.function = parse_function(function);
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    return c;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config; flags override its keys");
  sub->add_option("--function", c.function, "exp[:lambda] | sin | cos | poly:c0,c1,... | JSON spec");
  sub->add_option("--output-dir", c.output_dir, "directory for all outputs");
  sub->add_option("--seed", c.seed, "random seed");
}

fs::path prepare(const PipelineConfig& c) {
  fs::create_directories(c.output_dir);
  return fs::path(c.output_dir);
}

void emit(const fs::path& p, const std::string& content) {
  write_text(p, content);
  std::cout << p.string() << "\n";
}

json stamp(const PipelineConfig& c, const std::string& stage) {
  return {{"config_hash", c.hash()}, {"stage", stage}, {"function", c.function.name()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynlab: growth, value distribution and escaping-set dimension tools for entire functions"};
  app.require_subcommand(1);

  Common common;
  double r_min = 0, r_max = 0, r0 = 0, delta = 0, H = 1.0, radius = 0;
  int ppd = 0, resolution = 0, depth = -1, max_iter = 0, octaves = 5, samples_per_cell = 0, samples = 10000;
  int width = 0, height = 0, grid_density = 120;
  double eps = 0;
  std::string mode = "quadratic", zeros_arg, target = "boundary";
  std::vector<std::string> windows;

  auto grid_opts = [&](CLI::App* s) {
    s->add_option("--r-min", r_min, "smallest radius");
    s->add_option("--r-max", r_max, "largest radius");
    s->add_option("--points-per-decade", ppd, "radii per decade");
    s->add_option("--resolution", resolution, "samples per circle");
  };

  auto* profile = app.add_subcommand("profile", "M, L, T, n, N on a geometric radius grid (CSV)");
  add_common(profile, common);
  grid_opts(profile);

  auto* classify = app.add_subcommand("classify", "growth-condition verdicts (JSON); exit 0/2/3");
  add_common(classify, common);
  grid_opts(classify);

  auto* exclusion = app.add_subcommand("exclusion", "exclusion disks for the zeros of f or a given zero list");
  add_common(exclusion, common);
  exclusion->add_option("--radius", radius, "use the zeros of f in |z| <= radius");
  exclusion->add_option("--zeros", zeros_arg, "explicit zeros: x,y;x,y;...");
  exclusion->add_option("--H", H, "disk scale H")->check(CLI::PositiveNumber);
  exclusion->add_option("--mode", mode, "quadratic | linear")->check(CLI::IsMember({"quadratic", "linear"}));
  exclusion->add_option("--samples", samples, "Monte Carlo samples for verification");

  auto* construct = app.add_subcommand("construct", "inverse-branch cascade trace (JSON)");
  add_common(construct, common);
  construct->add_option("--r0", r0, "starting radius");
  construct->add_option("--delta", delta, "delta in (0, 2/7)");
  construct->add_option("--depth", depth, "number of levels");
  construct->add_option("--grid-density", grid_density, "candidate lattice density");

  auto* dimension = app.add_subcommand("dimension", "box-counting slope of the escaping-set boundary");
  add_common(dimension, common);
  dimension->add_option("--window", windows, "x0,y0,x1,y1 (repeatable)");
  dimension->add_option("--eps", eps, "finest cell side");
  dimension->add_option("--eps-octaves", octaves, "number of octaves above the finest scale");
  dimension->add_option("--max-iter", max_iter, "iteration budget per sample");
  dimension->add_option("--samples-per-cell", samples_per_cell, "samples per cell");
  dimension->add_option("--target", target, "boundary | escaping")->check(CLI::IsMember({"boundary", "escaping"}));

  auto* render = app.add_subcommand("render", "PGM image of first-passage times");
  add_common(render, common);
  render->add_option("--window", windows, "x0,y0,x1,y1");
  render->add_option("--width", width, "pixels")->required();
  render->add_option("--height", height, "pixels (default: keeps square pixels)");
  render->add_option("--max-iter", max_iter, "iteration budget per pixel");

  auto* pipeline = app.add_subcommand("pipeline", "profile, classify, construct, dimension and render");
  add_common(pipeline, common);
  grid_opts(pipeline);
  pipeline->add_option("--r0", r0, "construction start radius");
  pipeline->add_option("--delta", delta, "delta in (0, 2/7)");
  pipeline->add_option("--depth", depth, "number of cascade levels");
  pipeline->add_option("--window", windows, "x0,y0,x1,y1 (repeatable)");
  pipeline->add_option("--eps", eps, "finest cell side");
  pipeline->add_option("--eps-octaves", octaves, "number of octaves above the finest scale");
  pipeline->add_option("--max-iter", max_iter, "iteration budget per sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 4;
  }

  try {
    PipelineConfig cfg = common.load();
    if (r_min > 0) cfg.r_min = r_min;
    if (r_max > 0) cfg.r_max = r_max;
    if (ppd > 0) cfg.points_per_decade = ppd;
    if (resolution > 0) cfg.resolution = resolution;
    if (r0 > 0) cfg.r0 = r0;
    if (delta > 0) cfg.delta = delta;
    if (depth >= 0) cfg.depth = depth;
    if (max_iter > 0) cfg.max_iter = max_iter;
    if (samples_per_cell > 0) cfg.samples_per_cell = samples_per_cell;
    if (!windows.empty()) {
      cfg.windows.clear();
      for (const auto& w : windows) cfg.windows.push_back(parse_window(w));
    }
    if (eps > 0) cfg.epsilons = dyadic_scales(eps, octaves);
    if (!(*render) && !(*exclusion)) cfg.validate();

    if (*profile) {
      auto ps = scan_profiles(cfg.function, cfg.r_min, cfg.r_max, cfg.points_per_decade, cfg.resolution);
      emit(prepare(cfg) / "profiles.csv", profiles_csv(ps));
      return 0;
    }
    if (*classify) {
      auto ps = scan_profiles(cfg.function, cfg.r_min, cfg.r_max, cfg.points_per_decade, cfg.resolution);
      GrowthReport g = classify_conditions(ps);
      json j = stamp(cfg, "classify");
      j["report"] = to_json(g);
      emit(prepare(cfg) / "growth_report.json", dump_report(j));
      return g.exit_code();
    }
    if (*exclusion) {
      std::vector<cplx> zeros;
      if (!zeros_arg.empty()) {
        std::stringstream ss(zeros_arg);
        std::string item;
        while (std::getline(ss, item, ';')) {
          auto v = split_numbers(item);
          if (v.size() != 2) throw Error(ErrorKind::ConfigError, "zero must be x,y");
          zeros.emplace_back(v[0], v[1]);
        }
      } else {
        require(radius > 0, ErrorKind::ConfigError, "need --radius or --zeros");
        zeros = known_zeros(cfg.function, radius);
      }
      auto m = mode == "linear" ? ExclusionMode::LinearSum : ExclusionMode::QuadraticSum;
      ExclusionDiskSet set = fuchs_macintyre_disks(zeros, H, m);
      ExclusionVerification v = verify_exclusion(set, zeros, static_cast<std::size_t>(samples), cfg.seed);
      json j = stamp(cfg, "exclusion");
      j["disks"] = to_json(set);
      j["verification"] = to_json(v);
      emit(prepare(cfg) / "exclusion.json", dump_report(j));
      return v.holds ? 0 : 4;
    }
    if (*construct) {
      CascadeOptions opt;
      opt.seed = cfg.seed;
      opt.grid_density = grid_density;
      ConstructionTrace t = build_cascade(cfg.function, cfg.construction_radius(), cfg.delta, cfg.depth, opt);
      json j = stamp(cfg, "construct");
      j["trace"] = to_json(t);
      emit(prepare(cfg) / "construction_trace.json", dump_report(j));
      return t.all_hard_checks_hold() ? 0 : 4;
    }
    if (*dimension) {
      DimensionOptions opt;
      opt.max_iter = cfg.max_iter;
      opt.samples_per_cell = cfg.samples_per_cell;
      opt.seed = cfg.seed;
      BoxTarget tgt = target == "escaping" ? BoxTarget::FullEscaping : BoxTarget::EscapingBoundary;
      json curves = json::array();
      std::string csv;
      std::vector<BoxCountCurve> cs;
      for (const auto& w : cfg.windows) {
        BoxCountCurve c = box_count_fit(proxy_masks(cfg.function, w, cfg.epsilons, opt, tgt), opt.exclude_coarsest);
        c.window = w;
        c.target = tgt;
        curves.push_back(to_json(c));
        csv += boxcount_csv(c);
        cs.push_back(std::move(c));
      }
      double diff = 0.0;
      for (std::size_t a = 0; a < cs.size(); ++a)
        for (std::size_t b = a + 1; b < cs.size(); ++b) diff = std::max(diff, std::abs(cs[a].slope - cs[b].slope));
      json j = stamp(cfg, "dimension");
      j["curves"] = curves;
      j["max_slope_difference"] = diff;
      fs::path dir = prepare(cfg);
      emit(dir / "boxcount.json", dump_report(j));
      emit(dir / "boxcount.csv", csv);
      return 0;
    }
    if (*render) {
      const Window& w = cfg.windows.front();
      if (height <= 0) height = static_cast<int>(std::lround(width * w.height() / w.width()));
      emit(prepare(cfg) / "render.pgm", render_escape(cfg.function, w, width, height, cfg.max_iter));
      return 0;
    }
    if (*pipeline) {
      cfg.validate();
      PipelineResult r = run_pipeline(cfg);
      for (const auto& s : r.stages)
        std::cout << s.name << ": " << (s.ok ? "ok" : s.error_kind + ": " + s.message) << "\n";
      std::cout << "exit " << r.exit_code << "\n";
      return r.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}
