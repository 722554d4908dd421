#include "flowvol/surgery.hpp"

#include <cmath>
#include <numbers>

namespace flowvol {

namespace {
constexpr double kPi = std::numbers::pi;

Vec slerp(const Vec& u, const Vec& v, double t) {
  if (t <= 0.0) return u;
  if (t >= 1.0) return v;
  const double c = std::clamp(u.dot(v), -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-12) return u;
  if (theta > kPi - 1e-9) throw DomainError("slerp: antipodal endpoints");
  Vec w = (std::sin((1.0 - t) * theta) * u + std::sin(t * theta) * v) / std::sin(theta);
  return w / w.norm();
}

/// Largest image-free cap: candidate center on a net, radius = min distance
/// to the sampled image.
std::pair<Vec, double> largest_gap(const std::vector<Vec>& image, int m, int net_res) {
  SphereGrid net = unit_sphere_grid(m, net_res);
  Vec best_q;
  double best_gap = -1.0;
  for (const Vec& q : net.points) {
    double mind = kPi;
    for (const Vec& s : image) {
      const double d = std::acos(std::clamp(q.dot(s), -1.0, 1.0));
      if (d < mind) {
        mind = d;
        if (mind <= best_gap) break;
      }
    }
    if (mind > best_gap) {
      best_gap = mind;
      best_q = q;
    }
  }
  return {best_q, best_gap};
}

/// One fiberwise-averaging pass over a sphere lattice (azimuthal wrap, polar
/// clamp), renormalized.
std::vector<Vec> smooth_once(const SphereGrid& grid, const std::vector<Vec>& v, double step) {
  const auto& shape = grid.shape;
  const int ndim = static_cast<int>(shape.size());
  std::vector<std::int64_t> stride(ndim, 1);
  for (int d = ndim - 2; d >= 0; --d) stride[d] = stride[d + 1] * shape[d + 1];
  std::vector<Vec> out(v.size());
  for (std::size_t lin = 0; lin < v.size(); ++lin) {
    Vec avg = Vec::Zero(v[lin].size());
    int cnt = 0;
    for (int d = 0; d < ndim; ++d) {
      const std::int64_t pos = (static_cast<std::int64_t>(lin) / stride[d]) % shape[d];
      for (int s = -1; s <= 1; s += 2) {
        std::int64_t np = pos + s;
        if (d == ndim - 1) {
          np = (np + shape[d]) % shape[d];
        } else if (np < 0 || np >= shape[d]) {
          continue;
        }
        avg += v[lin + (np - pos) * stride[d]];
        ++cnt;
      }
    }
    Vec w = v[lin] + step * (avg / std::max(cnt, 1) - v[lin]);
    out[lin] = w / w.norm();
  }
  return out;
}

}  // namespace

Homotopy contract_homotopy(const SphereSliceMap& s, const ContractOptions& opt) {
  const DegreeResult deg = degree(s);
  if (deg.degree != 0)
    throw TopologyError("contract_homotopy: topological obstruction, slice degree is " +
                        std::to_string(deg.degree));
  const int m = s.m;

  // Flow snapshots; snapshot 0 is the slice itself (kept exact via s.eval).
  std::vector<std::vector<Vec>> snapshots;
  std::vector<Vec> cur = s.samples;
  auto gap = largest_gap(cur, m, opt.gap_search_res);
  int bursts = 0;
  while (gap.second < opt.gap_threshold) {
    if (++bursts > opt.max_bursts)
      throw NonConvergenceError("contract_homotopy: smoothing failed to open a gap");
    for (int it = 0; it < opt.flow_iters_per_burst; ++it)
      cur = smooth_once(s.grid, cur, opt.flow_step);
    snapshots.push_back(cur);
    gap = largest_gap(cur, m, opt.gap_search_res);
  }
  const Vec q = gap.first;
  const Vec p0 = -q;

  // Interpolators for the flow snapshots; the t-budget of the flow stage is
  // proportional to how far it actually moved points.
  auto interps = std::make_shared<std::vector<SphereLatticeInterp>>();
  for (auto& snap : snapshots) interps->emplace_back(s.grid, snap);
  double flow_disp = 0.0;
  {
    const std::vector<Vec>* prev = &s.samples;
    for (const auto& snap : snapshots) {
      double worst = 0.0;
      for (std::size_t i = 0; i < snap.size(); ++i)
        worst = std::max(worst,
                         std::acos(std::clamp((*prev)[i].dot(snap[i]), -1.0, 1.0)));
      flow_disp += worst;
      prev = &snap;
    }
  }
  const auto& final_samples = snapshots.empty() ? s.samples : snapshots.back();
  double geo_disp = 0.0;
  for (const Vec& v : final_samples)
    geo_disp = std::max(geo_disp, std::acos(std::clamp(v.dot(p0), -1.0, 1.0)));
  geo_disp = std::max(geo_disp, 1e-3);
  const double t_flow = flow_disp > 0.0 ? flow_disp / (flow_disp + geo_disp) : 0.0;
  const int n_snaps = static_cast<int>(snapshots.size());

  Homotopy H;
  H.m = m;
  H.p0 = p0;
  H.eval = [slice_eval = s.eval, interps, n_snaps, t_flow, p0](const Vec& omega,
                                                               double t) -> Vec {
    t = std::clamp(t, 0.0, 1.0);
    Vec base;
    if (n_snaps == 0 || t >= t_flow) {
      base = (n_snaps == 0) ? slice_eval(omega) : (*interps)[n_snaps - 1](omega);
      const double tau = (t_flow < 1.0) ? (t - t_flow) / (1.0 - t_flow) : 1.0;
      return slerp(base, p0, tau);
    }
    // flow stage: piecewise slerp through the snapshots
    const double u = t / t_flow * n_snaps;
    const int seg = std::min(static_cast<int>(u), n_snaps - 1);
    const double frac = u - seg;
    const Vec a = (seg == 0) ? slice_eval(omega) : (*interps)[seg - 1](omega);
    const Vec b = (*interps)[seg](omega);
    return slerp(a, b, frac);
  };
  return H;
}

ChartGraph fence_field(const Homotopy& H, double r) {
  if (!(r > 0.0)) throw ParameterError("fence_field: r must be > 0");
  ChartGraph g;
  g.n = H.m + 1;
  g.max_radius = r;
  g.eval = [H, r](const Vec& y) -> Vec {
    const double rho = y.norm();
    if (rho < 1e-300) return H.p0;
    return H.eval(y / rho, 1.0 - std::min(rho, r) / r);
  };
  return g;
}

Competitor build_competitor(const UnitField& f, const Point& x0, double r, int slice_resolution,
                            const ContractOptions& opt) {
  const Manifold m = f.manifold;
  if (!(r > 0.0) || r >= m.injectivity_radius())
    throw DomainError("build_competitor: cut radius outside (0, injectivity radius)");
  ChartGraph g = pole_chart_graph(f, x0);
  SphereSliceMap sl = slice(g, r, slice_resolution);
  Homotopy H = contract_homotopy(sl, opt);

  Competitor comp;
  comp.center = x0;
  comp.cut_radius = r;
  comp.fence = H;
  comp.p0 = H.p0;
  const Mat frame = tangent_frame(m, x0);
  comp.field.manifold = m;
  comp.field.mode = f.mode;
  comp.field.eval = [m, x0, frame, r, H, orig = f.eval](const Point& q) -> Vec {
    const double rho = geodesic_distance(m, x0, q);
    if (rho >= r) return orig(q);
    if (rho < 1e-12) return frame * H.p0;
    const Vec omega = frame.transpose() * geodesic_direction(m, x0, q);
    const Vec val = frame * H.eval(omega, 1.0 - rho / r);
    return transport_along_geodesic(m, x0, q, val);
  };
  // fence is pole-free; competitor poles are the original's outside the cut
  for (const Point& p : f.poles)
    if (geodesic_distance(m, x0, p) >= r) comp.field.poles.push_back(p);
  return comp;
}

double surgery_gain(const ChartGraph& g, const Homotopy& H, double r, double R, double h,
                    int direction_res) {
  if (!(r > 0.0) || !(r < R)) throw ParameterError("surgery_gain: need 0 < r < R");
  const int i = g.n - 1;
  const double v0_orig = limiting_volume_v0(g, R, h, direction_res);
  const double annulus = flat_component_mass(g, {r, R}, i, h, direction_res);
  // fence features live at scale r; keep its radial step proportional
  const double hf = std::min(h, r / 48.0);
  const double fence = flat_component_mass(fence_field(H, r), {0.0, r}, i, hf, direction_res);
  return v0_orig - (annulus + fence);
}

std::vector<GainCurveRow> gain_curve(const ChartGraph& g, const Homotopy& H,
                                     const std::vector<double>& radii, double R, double h,
                                     int direction_res) {
  const int i = g.n - 1;
  const double v0_orig = limiting_volume_v0(g, R, h, direction_res);
  std::vector<GainCurveRow> rows;
  rows.reserve(radii.size());
  for (double r : radii) {
    GainCurveRow row;
    row.r = r;
    row.v0_original = v0_orig;
    const double annulus = flat_component_mass(g, {r, R}, i, h, direction_res);
    const double hf = std::min(h, r / 48.0);
    const double fence = flat_component_mass(fence_field(H, r), {0.0, r}, i, hf, direction_res);
    row.v0_competitor = annulus + fence;
    row.gain = row.v0_original - row.v0_competitor;
    rows.push_back(row);
  }
  return rows;
}

double fence_curtain_mass(const Homotopy& H, double r, int omega_res, int t_res) {
  const int m = H.m;
  SphereGrid grid = unit_sphere_grid(m, omega_res);
  const double dt = 1.0 / t_res;
  const std::int64_t total = static_cast<std::int64_t>(grid.size()) * t_res;
  const double fd_omega = 1e-4;
  return parallel_sum(total, [&](std::int64_t idx) -> double {
    const std::int64_t gi = idx % static_cast<std::int64_t>(grid.size());
    const std::int64_t ti = idx / static_cast<std::int64_t>(grid.size());
    const double t = (ti + 0.5) * dt;
    const Vec& omega = grid.points[gi];
    const Mat frame = oriented_sphere_frame(omega);
    // Tangent vectors of the curtain (r omega, H(omega, t)) in R^{m+1} x R^{m+1}.
    Mat tang(2 * (m + 1), m + 1);
    for (int j = 0; j < m; ++j) {
      const Vec e = frame.col(j);
      const Vec wp = std::cos(fd_omega) * omega + std::sin(fd_omega) * e;
      const Vec wm = std::cos(fd_omega) * omega - std::sin(fd_omega) * e;
      tang.col(j).head(m + 1) = r * e;
      tang.col(j).tail(m + 1) = (H.eval(wp, t) - H.eval(wm, t)) / (2.0 * fd_omega);
    }
    const double ft = std::min(0.5 * dt, 0.5 * std::min(t, 1.0 - t));
    tang.col(m).head(m + 1).setZero();
    tang.col(m).tail(m + 1) = (H.eval(omega, t + ft) - H.eval(omega, t - ft)) / (2.0 * ft);
    const Mat gram = tang.transpose() * tang;
    return std::sqrt(std::max(0.0, gram.determinant())) * grid.weights[gi] * dt;
  });
}

ScalingLaws surgery_scaling(const HCone& cone, const Homotopy& H, const std::vector<double>& radii,
                            double h_rel, int direction_res) {
  ScalingLaws laws;
  laws.radii = radii;
  ChartGraph g = cone.as_graph();
  for (double r : radii) {
    laws.fence_mass.push_back(fence_curtain_mass(H, r));
    laws.cone_mass.push_back(flat_full_mass(g, {0.0, r}, h_rel * r, direction_res));
  }
  laws.fence_fit = fit_power_law(laws.radii, laws.fence_mass);
  laws.cone_fit = fit_power_law(laws.radii, laws.cone_mass);
  return laws;
}

SphereSliceMap bubble_pair_slice(double cap_radius, int resolution) {
  if (!(cap_radius > 0.0) || cap_radius >= kPi)
    throw ParameterError("bubble_pair_slice: cap radius outside (0, pi)");
  const double a = cap_radius;
  auto eval = [a](const Vec& om) -> Vec {
    Vec p0(3);
    p0 << 0, 0, 1;
    const double s = std::acos(std::clamp(om[0], -1.0, 1.0));
    if (s >= a) return p0;
    const double phi = std::atan2(om[2], om[1]);
    const double theta = 0.5 * kPi * (1.0 - std::cos(2.0 * kPi * s / a));
    Vec q1(3), q2(3);
    q1 << 1, 0, 0;
    q2 << 0, 1, 0;
    Vec out = std::cos(theta) * p0 + std::sin(theta) * (std::cos(phi) * q1 + std::sin(phi) * q2);
    return out / out.norm();
  };
  return SphereSliceMap::from_eval(2, 1.0, eval, resolution, 1e-5);
}

FullComparison full_volume_comparison(const UnitField& f, const Point& x0, double r, double h,
                                      int slice_resolution, const VolumeOptions& base_opt) {
  Competitor comp = build_competitor(f, x0, r, slice_resolution);
  VolumeOptions opt = base_opt;
  opt.pole_policy = PolePolicy::ExcludeExtrapolate;
  if (!opt.polar_center) opt.polar_center = x0;

  FullComparison out;
  out.original = volume(f, h, opt);
  // Exclusion radius near x0 must match even though the competitor is smooth
  // there: shared pole policy keeps the comparison honest.
  UnitField comp_excl = comp.field;
  comp_excl.poles.push_back(x0);
  out.competitor = volume(comp_excl, h, opt);
  const VolumeReport orig_coarse = volume(f, 2.0 * h, opt);
  UnitField comp_coarse = comp_excl;
  const VolumeReport competitor_coarse = volume(comp_coarse, 2.0 * h, opt);
  out.error_bar_original = std::abs(out.original.total - orig_coarse.total) / 3.0;
  out.error_bar_competitor = std::abs(out.competitor.total - competitor_coarse.total) / 3.0;
  return out;
}

}  // namespace flowvol
