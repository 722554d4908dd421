/// Configuration-driven experiment runner: reads a JSON config, runs one
/// experiment, writes CSV data plus a JSON summary into the output directory.
/// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 non-convergence.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "flowvol/crofton.hpp"
#include "flowvol/io.hpp"
#include "flowvol/minimize.hpp"
#include "flowvol/surgery.hpp"

namespace fs = std::filesystem;
using namespace flowvol;

namespace {

struct RunContext {
  Json config;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::uint64_t hash = 0;

  std::vector<std::pair<std::string, std::string>> provenance(
      std::initializer_list<std::pair<std::string, std::string>> extra = {}) const {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"command", config.at("command").get<std::string>()},
        {"config_hash", std::to_string(hash)},
        {"seed", std::to_string(seed)},
        {"threads", std::to_string(max_threads())},
    };
    for (const auto& e : extra) kv.push_back(e);
    return kv;
  }

  std::ofstream open_csv(const std::string& name) const {
    std::ofstream os(out_dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file " + name);
    return os;
  }
};

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  throw SchemaError("config." + path + ": " + what);
}

const Json& require_key(const Json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) schema_fail(path.empty() ? key : path + "." + key, "missing");
  return j.at(key);
}

double require_number(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require_key(j, key, path);
  if (!v.is_number()) schema_fail(path.empty() ? key : path + "." + key, "expected a number");
  return v.get<double>();
}

Manifold parse_manifold(const Json& j) {
  if (!j.is_object()) schema_fail("manifold", "expected an object");
  try {
    return manifold_from_json(j);
  } catch (const Json::exception& e) {
    schema_fail("manifold", e.what());
  }
}

Point parse_point(const Manifold& m, const Json& j, const std::string& path) {
  if (!j.is_array()) schema_fail(path, "expected an array of coordinates");
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != m.ambient_dim())
    schema_fail(path, "wrong coordinate count");
  Vec x = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  return m.is_sphere() ? Point::on_sphere(m, x) : Point::on_torus(m, x);
}

UnitField parse_field(const Manifold& m, const Json& j, const std::string& path) {
  const std::string type = require_key(j, "type", path).get<std::string>();
  if (type == "hopf") return hopf_field(m);
  if (type == "pedersen") {
    Point base = j.contains("basepoint")
                     ? parse_point(m, j.at("basepoint"), path + ".basepoint")
                     : Point::on_sphere(m, Vec::Unit(m.ambient_dim(), 0) * m.radius);
    return pedersen_field(m, base);
  }
  if (type == "longitude") {
    Point base = j.contains("basepoint")
                     ? parse_point(m, j.at("basepoint"), path + ".basepoint")
                     : Point::on_sphere(m, Vec::Unit(m.ambient_dim(), m.dim) * m.radius);
    return longitude_field(m, base);
  }
  if (type == "constant") {
    const Json& d = require_key(j, "direction", path);
    const auto v = d.get<std::vector<double>>();
    return constant_field(m, Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (type == "grid") {
    const std::string file = require_key(j, "path", path).get<std::string>();
    std::ifstream is(file);
    if (!is) schema_fail(path + ".path", "cannot open " + file);
    Json data = Json::parse(is);
    return grid_field_from_json(data);
  }
  if (type == "perturbed") {
    UnitField base = parse_field(m, require_key(j, "base", path), path + ".base");
    const double h = require_number(j, "grid_h", path);
    const double amplitude = require_number(j, "amplitude", path);
    const auto seed = static_cast<std::uint64_t>(require_number(j, "seed", path));
    return perturb_field(grid_sample(base, h), amplitude, seed);
  }
  schema_fail(path + ".type", "unknown field type '" + type + "'");
}

PolePolicy parse_pole_policy(const Json& j) {
  const std::string s = j.value("pole_policy", "error");
  if (s == "error") return PolePolicy::Error;
  if (s == "exclude") return PolePolicy::Exclude;
  if (s == "extrapolate") return PolePolicy::ExcludeExtrapolate;
  schema_fail("pole_policy", "expected error|exclude|extrapolate");
}

DerivMode parse_deriv(const Json& j) {
  const std::string s = j.value("deriv", "auto");
  if (s == "auto") return DerivMode::Auto;
  if (s == "fd") return DerivMode::FiniteDifference;
  if (s == "analytic") return DerivMode::Analytic;
  schema_fail("deriv", "expected auto|fd|analytic");
}

// ---------------------------------------------------------------------------

int run_volume(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  Manifold m = parse_manifold(require_key(cfg, "manifold", ""));
  UnitField f = parse_field(m, require_key(cfg, "field", ""), "field");
  const double h = require_number(cfg, "h", "");
  VolumeOptions opt;
  opt.pole_policy = parse_pole_policy(cfg);
  opt.deriv = parse_deriv(cfg);
  opt.force_polar = cfg.value("polar", false);
  if (opt.force_polar && !f.poles.empty()) opt.polar_center = f.poles.front();
  VolumeReport rep = volume(f, h, opt);

  auto os = ctx.open_csv("volume.csv");
  CsvWriter csv(os);
  csv.provenance(ctx.provenance({{"h", format_double(h)}}));
  std::vector<std::string> cols = {"region", "h", "total"};
  for (std::size_t k = 0; k < rep.per_order.size(); ++k)
    cols.push_back("mass_order_" + std::to_string(k));
  csv.header(cols);
  std::vector<std::string> row = {rep.region, format_double(rep.h), format_double(rep.total)};
  for (double v : rep.per_order) row.push_back(format_double(v));
  csv.row_mixed(row);

  Json summary = volume_report_to_json(rep);
  summary["config_hash"] = ctx.hash;
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return 0;
}

int run_degree(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  Manifold m = parse_manifold(require_key(cfg, "manifold", ""));
  UnitField f = parse_field(m, require_key(cfg, "field", ""), "field");
  const int resolution = static_cast<int>(cfg.value("resolution", 256.0));
  std::vector<double> radii = require_key(cfg, "radii", "").get<std::vector<double>>();
  Point center = cfg.contains("center") ? parse_point(m, cfg.at("center"), "center")
                 : !f.poles.empty()     ? f.poles.front()
                                        : Point::on_sphere(m, Vec::Unit(m.ambient_dim(), 0));

  auto os = ctx.open_csv("degree.csv");
  CsvWriter csv(os);
  csv.provenance(ctx.provenance({{"resolution", std::to_string(resolution)}}));
  csv.header({"radius", "degree", "raw", "residual"});
  Json table = Json::array();
  for (double r : radii) {
    DegreeResult d = degree(slice(f, center, r, resolution));
    csv.row({r, static_cast<double>(d.degree), d.raw, d.residual});
    table.push_back({{"radius", r}, {"degree", d.degree}, {"raw", d.raw}});
  }
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["degrees"] = table;
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return 0;
}

int run_cone(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  Manifold m = parse_manifold(require_key(cfg, "manifold", ""));
  UnitField f = parse_field(m, require_key(cfg, "field", ""), "field");
  Point center = cfg.contains("center") ? parse_point(m, cfg.at("center"), "center")
                 : !f.poles.empty()     ? f.poles.front()
                                        : Point::on_sphere(m, Vec::Unit(m.ambient_dim(), 0));
  const double R = require_number(cfg, "R", "");
  const double tol = require_number(cfg, "tolerance", "");
  const int resolution = static_cast<int>(cfg.value("resolution", 40.0));
  const double h = require_number(cfg, "h", "");
  std::vector<double> lambdas = cfg.contains("lambda")
                                    ? cfg.at("lambda").get<std::vector<double>>()
                                    : default_lambda_sequence();
  ChartGraph g = pole_chart_graph(f, center);
  ConeLimitResult res = cone_limit(g, lambdas, R, tol, resolution);

  {
    auto os = ctx.open_csv("cone_defects.csv");
    CsvWriter csv(os);
    csv.provenance(ctx.provenance({{"R", format_double(R)}, {"tolerance", format_double(tol)}}));
    csv.header({"lambda", "defect"});
    for (std::size_t i = 1; i < res.lambdas.size(); ++i)
      csv.row({res.lambdas[i], res.defects[i - 1]});
  }
  if (cfg.contains("profile_radii")) {
    auto radii = cfg.at("profile_radii").get<std::vector<double>>();
    auto prof = monotonicity_profile(g, radii, h);
    auto os = ctx.open_csv("profile.csv");
    CsvWriter csv(os);
    csv.provenance(ctx.provenance({{"h", format_double(h)}}));
    csv.header({"R", "v0_over_R"});
    for (const auto& [r, v] : prof) csv.row({r, v});
  }
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["converged"] = res.converged;
  summary["defects"] = res.defects;
  if (res.converged) summary["boundary_slice"] = slice_to_json(res.cone.boundary);
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  if (!res.converged) {
    std::ofstream(ctx.out_dir / "nonconvergence.txt")
        << "cone_limit: defect sequence did not reach tolerance " << tol << "\n";
    return 4;
  }
  return 0;
}

ChartGraph parse_chart_graph(const Json& cfg, UnitField& field_holder, Manifold& m_holder) {
  const Json& gspec = require_key(cfg, "field", "");
  const std::string type = require_key(gspec, "type", "field").get<std::string>();
  if (type == "bubble-cone") {
    const double cap = gspec.value("cap_radius", 1.2);
    HCone cone;
    cone.boundary = bubble_pair_slice(cap, static_cast<int>(gspec.value("resolution", 96.0)));
    return cone.as_graph(1e6);
  }
  m_holder = parse_manifold(require_key(cfg, "manifold", ""));
  field_holder = parse_field(m_holder, gspec, "field");
  if (field_holder.poles.empty()) schema_fail("field", "needs a pole to slice around");
  return pole_chart_graph(field_holder, field_holder.poles.front());
}

int run_crofton(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  UnitField f;
  Manifold m;
  ChartGraph g = parse_chart_graph(cfg, f, m);
  const Json& region = require_key(cfg, "region", "");
  const Annulus annulus{require_number(region, "r0", "region"),
                        require_number(region, "r1", "region")};
  const double h_raster = require_number(cfg, "h_raster", "");
  const double cellsize = require_number(cfg, "cellsize", "");
  const int n_projections = static_cast<int>(require_number(cfg, "n_projections", ""));
  const double h_quad = cfg.value("h_quadrature", h_raster);
  std::vector<int> orders = cfg.contains("orders")
                                ? cfg.at("orders").get<std::vector<int>>()
                                : std::vector<int>{0, 1};

  GraphPatch patch = rasterize_graph(g, annulus, h_raster);
  Rng rng(ctx.seed);
  auto os = ctx.open_csv("crofton.csv");
  CsvWriter csv(os);
  csv.provenance(ctx.provenance({{"cellsize", format_double(cellsize)},
                                 {"h_raster", format_double(h_raster)}}));
  csv.header({"i", "n_projections", "cellsize", "estimate", "stderr", "quadrature_reference"});
  Json rows = Json::array();
  for (int i : orders) {
    CroftonEstimate est = crofton_mass_estimate(patch, i, n_projections, cellsize, rng);
    const double reference = flat_component_mass(g, annulus, i, h_quad, 128);
    csv.row({static_cast<double>(i), static_cast<double>(n_projections), cellsize, est.estimate,
             est.stderr_, reference});
    rows.push_back({{"i", i},
                    {"estimate", est.estimate},
                    {"stderr", est.stderr_},
                    {"reference", reference}});
  }
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["estimates"] = rows;
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return 0;
}

int run_surgery(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  UnitField f;
  Manifold m;
  ChartGraph g = parse_chart_graph(cfg, f, m);
  const double R = require_number(cfg, "R", "");
  const double h = require_number(cfg, "h", "");
  const double slice_r = cfg.value("slice_radius", 0.5 * R);
  const int slice_res = static_cast<int>(cfg.value("slice_resolution", 40.0));

  SphereSliceMap sl = slice(g, slice_r, slice_res);
  Homotopy H = contract_homotopy(sl);

  std::vector<double> radii;
  if (cfg.contains("radii")) {
    radii = cfg.at("radii").get<std::vector<double>>();
  } else {
    for (int j = 1; j <= 10; ++j) radii.push_back(R * std::pow(2.0, -j));
    std::reverse(radii.begin(), radii.end());
  }
  std::vector<GainCurveRow> curve = gain_curve(g, H, radii, R, h);

  // Theorem-style scaling laws on the cone extracted at this pole
  ConeLimitResult cl = cone_limit(g, default_lambda_sequence(), R, 1e-5, slice_res);
  std::vector<double> scaling_radii;
  if (cfg.contains("scaling_radii")) {
    scaling_radii = cfg.at("scaling_radii").get<std::vector<double>>();
  } else {
    for (int j = 0; j < 6; ++j) scaling_radii.push_back(16.0 * std::pow(2.0, j));
  }
  ScalingLaws laws = surgery_scaling(cl.cone, H, scaling_radii);

  double best_gain = -1e300, best_r = 0.0;
  {
    auto os = ctx.open_csv("gain_curve.csv");
    CsvWriter csv(os);
    csv.provenance(ctx.provenance(
        {{"R", format_double(R)}, {"h", format_double(h)},
         {"fence_A_fit", format_double(std::exp(laws.fence_fit.intercept))},
         {"cone_B_fit", format_double(std::exp(laws.cone_fit.intercept))}}));
    csv.header({"r", "v0_original", "v0_competitor", "gain"});
    for (const auto& row : curve) {
      csv.row({row.r, row.v0_original, row.v0_competitor, row.gain});
      if (row.gain > best_gain) {
        best_gain = row.gain;
        best_r = row.r;
      }
    }
  }
  {
    auto os = ctx.open_csv("scaling.csv");
    CsvWriter csv(os);
    csv.provenance(ctx.provenance({{"fence_slope", format_double(laws.fence_fit.slope)},
                                   {"cone_slope", format_double(laws.cone_fit.slope)}}));
    csv.header({"r", "fence_curtain_mass", "cone_full_mass"});
    for (std::size_t i = 0; i < laws.radii.size(); ++i)
      csv.row({laws.radii[i], laws.fence_mass[i], laws.cone_mass[i]});
  }
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["fence_slope"] = laws.fence_fit.slope;
  summary["cone_slope"] = laws.cone_fit.slope;
  summary["best_gain"] = best_gain;
  summary["best_r"] = best_r;
  summary["positive_gain_found"] = best_gain > 0.0;
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return 0;
}

int run_minimize(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  Manifold m = parse_manifold(require_key(cfg, "manifold", ""));
  UnitField f = parse_field(m, require_key(cfg, "field", ""), "field");
  if (f.mode != FieldMode::Grid) {
    const double h = require_number(cfg, "grid_h", "");
    f = grid_sample(f, h);
  }
  const int max_iter = static_cast<int>(cfg.value("max_iterations", 500.0));
  const double tol = cfg.value("tolerance", 1e-5);
  DescentState st = descend(make_descent_state(f), max_iter, tol);

  {
    auto os = ctx.open_csv("history.csv");
    CsvWriter csv(os);
    csv.provenance(ctx.provenance({{"max_iterations", std::to_string(max_iter)},
                                   {"tolerance", format_double(tol)}}));
    csv.header({"iteration", "volume"});
    for (std::size_t i = 0; i < st.volume_history.size(); ++i)
      csv.row({static_cast<double>(i), st.volume_history[i]});
  }
  std::ofstream(ctx.out_dir / "checkpoint.json") << grid_field_to_json(st.field).dump() << "\n";
  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["iterations"] = st.iterations;
  summary["final_volume"] = st.volume_history.back();
  summary["gradient_norm"] = st.gradient_norm;
  summary["converged"] = st.converged;
  summary["stalled"] = st.stalled;
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return st.stalled ? 4 : 0;
}

int run_pedersen(const RunContext& ctx) {
  const Json& cfg = ctx.config;
  const double h3 = cfg.value("h3", 0.03);
  const double h5 = cfg.value("h5", 0.12);
  const double splice_r = cfg.value("splice_r", 0.5);
  const bool with_s5 = cfg.value("s5", true);

  auto os = ctx.open_csv("pedersen.csv");
  CsvWriter csv(os);
  csv.provenance(ctx.provenance({{"h3", format_double(h3)}, {"h5", format_double(h5)}}));
  csv.header({"manifold", "field", "h", "total", "error_bar"});
  Json summary;
  summary["config_hash"] = ctx.hash;

  {
    Manifold s3 = Manifold::sphere(3, 1.0);
    UnitField hopf = hopf_field(s3);
    VolumeOptions opt;
    opt.deriv = DerivMode::FiniteDifference;
    const double v_hopf = volume(hopf, h3, opt).total;
    csv.row_mixed({"S^3", "hopf", format_double(h3), format_double(v_hopf), "0"});

    Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
    UnitField ped = pedersen_field(s3, x);
    VolumeOptions popt;
    popt.force_polar = true;
    FullComparison cmp = full_volume_comparison(ped, ped.poles[0], splice_r, h3, 48, popt);
    csv.row_mixed({"S^3", "pedersen", format_double(h3), format_double(cmp.original.total),
                   format_double(cmp.error_bar_original)});
    csv.row_mixed({"S^3", "competitor", format_double(h3), format_double(cmp.competitor.total),
                   format_double(cmp.error_bar_competitor)});
    summary["s3"] = {{"hopf", v_hopf},
                     {"pedersen", cmp.original.total},
                     {"competitor", cmp.competitor.total},
                     {"difference", cmp.difference()},
                     {"combined_error", cmp.combined_error()}};
  }
  if (with_s5) {
    Manifold s5 = Manifold::sphere(5, 1.0);
    UnitField hopf5 = hopf_field(s5);
    VolumeOptions opt;
    opt.deriv = DerivMode::FiniteDifference;
    opt.force_polar = true;
    opt.polar_direction_res = 10;
    opt.polar_center = Point::on_sphere(s5, Vec::Unit(6, 5));
    const double v_hopf5 = volume(hopf5, h5, opt).total;
    csv.row_mixed({"S^5", "hopf", format_double(h5), format_double(v_hopf5), "0"});

    Point x = Point::on_sphere(s5, Vec::Unit(6, 0));
    UnitField ped5 = pedersen_field(s5, x);
    VolumeOptions popt = opt;
    popt.pole_policy = PolePolicy::ExcludeExtrapolate;
    popt.polar_center = ped5.poles[0];
    const double v_ped5 = volume(ped5, h5, popt).total;
    csv.row_mixed({"S^5", "pedersen", format_double(h5), format_double(v_ped5), "0"});
    summary["s5"] = {{"hopf", v_hopf5}, {"pedersen", v_ped5}};
  }
  std::ofstream(ctx.out_dir / "summary.json") << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowvol: volumes, cones and surgery for unit vector fields"};
  std::string config_path, out_dir = ".";
  int threads = 0;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker cap (0 = hardware)");
  app.add_option("--seed", seed, "RNG seed");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  RunContext ctx;
  try {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "config error: cannot open " << config_path << "\n";
      return 2;
    }
    try {
      ctx.config = Json::parse(is);
    } catch (const Json::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    if (threads > 0) max_threads() = threads;
    ctx.out_dir = out_dir;
    fs::create_directories(ctx.out_dir);
    ctx.seed = seed;
    Json hashed = ctx.config;
    hashed["seed"] = seed;
    ctx.hash = config_hash(hashed);

    const std::string command = require_key(ctx.config, "command", "").get<std::string>();
    int rc;
    if (command == "volume") {
      rc = run_volume(ctx);
    } else if (command == "degree") {
      rc = run_degree(ctx);
    } else if (command == "cone") {
      rc = run_cone(ctx);
    } else if (command == "crofton") {
      rc = run_crofton(ctx);
    } else if (command == "surgery") {
      rc = run_surgery(ctx);
    } else if (command == "minimize") {
      rc = run_minimize(ctx);
    } else if (command == "pedersen") {
      rc = run_pedersen(ctx);
    } else {
      schema_fail("command", "unknown command '" + command + "'");
    }
    // timestamps live here, never in the data files
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    std::ofstream log(ctx.out_dir / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    log << "command=" << command << " config_hash=" << ctx.hash << " seconds=" << dt.count()
        << " finished_at=" << now << " exit=" << rc << "\n";
    return rc;
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}
