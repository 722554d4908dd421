#include "flowvol/volume.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace flowvol {

double wedge_norm_sq(const Mat& J, int k) {
  const int n = static_cast<int>(J.cols());
  if (k < 0) throw ParameterError("wedge_norm_sq: negative order");
  if (k == 0) return 1.0;
  if (k > std::min<int>(static_cast<int>(J.rows()), n)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(J.transpose() * J, Eigen::EigenvaluesOnly);
  Vec lam = es.eigenvalues().cwiseMax(0.0);
  // Elementary symmetric functions via the stable recurrence
  // e_k^{(m)} = e_k^{(m-1)} + lam_m e_{k-1}^{(m-1)}.
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (int m = 0; m < lam.size(); ++m)
    for (int j = std::min(k, m + 1); j >= 1; --j) e[j] += lam[m] * e[j - 1];
  return e[k];
}

namespace {

double integrand_sqrt(const Mat& J, int top_order) {
  double s = 1.0;
  for (int k = 1; k <= top_order; ++k) s += wedge_norm_sq(J, k);
  return std::sqrt(s);
}

struct ManifoldQuadrature {
  QuadratureGrid grid;
  double h;
};

ManifoldQuadrature build_grid(const UnitField& f, double h, const VolumeOptions& opt) {
  const Manifold& m = f.manifold;
  if (m.is_sphere() && (m.dim > 3 || opt.force_polar)) {
    Point center = opt.polar_center ? *opt.polar_center
                  : !f.poles.empty() ? f.poles.front()
                                     : Point::on_sphere(m, Vec::Unit(m.ambient_dim(), 0) * m.radius);
    const double rho_max = m.injectivity_radius() * (1.0 - 1e-9);
    const int n_rho = std::max(8, static_cast<int>(std::round(rho_max / (h * m.radius))));
    return {sphere_polar_grid(m, center, 0.0, rho_max, n_rho, opt.polar_direction_res),
            rho_max / n_rho};
  }
  QuadratureGrid g = manifold_grid(m, h);
  return {std::move(g), h * (m.is_sphere() ? m.radius : 1.0)};
}

}  // namespace

VolumeReport volume(const UnitField& f, double h, const VolumeOptions& opt) {
  ManifoldQuadrature q = build_grid(f, h, opt);
  const int n = f.manifold.dim;
  const double fd = opt.fd_step > 0.0 ? opt.fd_step : q.h;
  const bool have_pole = !f.poles.empty();
  if (have_pole && opt.pole_policy == PolePolicy::Error)
    throw PoleError("volume: field has poles and pole policy is Error");

  // Per-order masses accumulated alongside the total; fixed chunk partition
  // keeps the reduction order independent of the worker count.
  auto accumulate = [&](double exclusion) {
    const std::int64_t N = static_cast<std::int64_t>(q.grid.points.size());
    const std::int64_t chunk = 8192;
    const std::int64_t nchunks = (N + chunk - 1) / chunk;
    std::vector<std::vector<double>> partial(nchunks, std::vector<double>(n + 1, 0.0));
    parallel_for(nchunks, [&](std::int64_t cix) {
      std::vector<KahanSum> acc(n + 1);
      const std::int64_t lo = cix * chunk, hi = std::min(N, lo + chunk);
      for (std::int64_t idx = lo; idx < hi; ++idx) {
        const Point& p = q.grid.points[idx];
        const double w = q.grid.weights[idx];
        if (have_pole && f.distance_to_poles(p) < exclusion) continue;
        const FieldJacobian J = covariant_derivative(f, p, fd, opt.deriv);
        double s = 1.0;
        for (int k = 1; k <= n - 1; ++k) {
          const double wk = wedge_norm_sq(J.matrix, k);
          s += wk;
          acc[k].add(w * std::sqrt(wk));
        }
        acc[0].add(w);  // order-0 mass = volume of region
        acc[n].add(w * std::sqrt(s));
      }
      for (int k = 0; k <= n; ++k) partial[cix][k] = acc[k].value();
    });
    std::vector<double> tot_parts(n + 1, 0.0);
    for (std::int64_t cix = 0; cix < nchunks; ++cix)
      for (int k = 0; k <= n; ++k) tot_parts[k] += partial[cix][k];
    return tot_parts;  // [0..n-1]: per-order, [n]: total
  };

  VolumeReport rep;
  rep.h = h;
  rep.region = f.manifold.describe();
  if (!have_pole || opt.pole_policy == PolePolicy::Error) {
    std::vector<double> parts = accumulate(0.0);
    rep.per_order.assign(parts.begin(), parts.begin() + n);
    rep.total = parts[n];
    return rep;
  }
  const double rho = 2.0 * fd;
  std::vector<double> at_rho = accumulate(rho);
  if (opt.pole_policy == PolePolicy::Exclude) {
    rep.per_order.assign(at_rho.begin(), at_rho.begin() + n);
    rep.total = at_rho[n];
    return rep;
  }
  // Linear Richardson in the exclusion radius: I(0) ~ 2 I(rho) - I(2 rho).
  std::vector<double> at_2rho = accumulate(2.0 * rho);
  rep.per_order.resize(n);
  for (int k = 0; k < n; ++k) rep.per_order[k] = 2.0 * at_rho[k] - at_2rho[k];
  rep.total = 2.0 * at_rho[n] - at_2rho[n];
  return rep;
}

double component_mass(const UnitField& f, int i, double h, const VolumeOptions& opt) {
  if (i == 0) {
    VolumeOptions o = opt;
    ManifoldQuadrature q = build_grid(f, h, o);
    return q.grid.total_weight();
  }
  VolumeReport rep = volume(f, h, opt);
  if (i < 0 || i >= static_cast<int>(rep.per_order.size()))
    throw ParameterError("component_mass: order out of range");
  return rep.per_order[i];
}

ChartGraph pole_chart_graph(const UnitField& f, const Point& x0) {
  const Manifold m = f.manifold;
  const Mat frame = tangent_frame(m, x0);
  const int n = m.dim;
  ChartGraph g;
  g.n = n;
  g.max_radius = m.injectivity_radius() * (1.0 - 1e-6);
  for (const Point& pole : f.poles) {
    const double d = geodesic_distance(m, x0, pole);
    if (d < 1e-12) {
      g.poles.push_back(Vec::Zero(n));
    } else if (d < g.max_radius) {
      g.poles.push_back(d * (frame.transpose() * geodesic_direction(m, x0, pole)));
    }
  }
  g.eval = [m, x0, frame, field = f.eval, n](const Vec& y) -> Vec {
    const double rho = y.norm();
    if (rho < 1e-300) throw PoleError("chart graph: evaluation at the chart center");
    const Vec dir = frame * (y / rho);
    const Point q = exp_map(m, x0, rho * dir);
    const Vec val = field(q);
    return frame.transpose() * transport_along_geodesic(m, q, x0, val);
  };
  return g;
}

ChartGraph dilate(const ChartGraph& g, double lambda, double R) {
  if (!(lambda > 0.0) || lambda > 1.0) throw ParameterError("dilate: lambda must be in (0, 1]");
  if (lambda * R > g.max_radius) throw DomainError("dilate: source graph too small");
  ChartGraph out;
  out.n = g.n;
  out.max_radius = R;
  out.eval = [inner = g.eval, lambda](const Vec& y) -> Vec { return inner(lambda * y); };
  for (const Vec& p : g.poles) out.poles.push_back(p / lambda);
  return out;
}

Mat chart_jacobian(const ChartGraph& g, const Vec& y, double fd) {
  const int n = g.n;
  double step = fd;
  for (const Vec& p : g.poles) step = std::min(step, 0.25 * (y - p).norm());
  if (!(step > 0.0)) throw PoleError("chart_jacobian: at a pole");
  Mat J(n, n);
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = step;
    J.col(i) = (g.eval(y + e) - g.eval(y - e)) / (2.0 * step);
  }
  return J;
}

namespace {

/// Polar quadrature of F(y) over a centered annulus; F evaluated through the
/// chart graph's finite-difference Jacobian.
double polar_quadrature(const ChartGraph& g, const Annulus& region, double h, int direction_res,
                        const std::function<double(const Mat&)>& F) {
  const int n = g.n;
  SphereGrid dirs = unit_sphere_grid(n - 1, direction_res);
  const double r0 = region.r0, r1 = region.r1;
  if (!(r1 > r0) || r0 < 0.0) throw ParameterError("polar_quadrature: bad annulus");
  if (r1 > g.max_radius) throw DomainError("polar_quadrature: region exceeds chart");
  const int n_rho = std::max(4, static_cast<int>(std::ceil((r1 - r0) / h)));
  const double drho = (r1 - r0) / n_rho;
  const std::int64_t total = static_cast<std::int64_t>(dirs.size()) * n_rho;
  return parallel_sum(total, [&](std::int64_t idx) -> double {
    const std::int64_t d = idx % static_cast<std::int64_t>(dirs.size());
    const std::int64_t k = idx / static_cast<std::int64_t>(dirs.size());
    const double rho = r0 + (k + 0.5) * drho;
    const Vec y = rho * dirs.points[d];
    const Mat J = chart_jacobian(g, y, std::min(h, 0.2 * rho));
    return F(J) * dirs.weights[d] * std::pow(rho, n - 1) * drho;
  });
}

}  // namespace

double flat_component_mass(const ChartGraph& g, const Annulus& region, int i, double h,
                           int direction_res) {
  if (i == 0) {
    const int n = g.n;
    return unit_ball_volume(n) * (std::pow(region.r1, n) - std::pow(region.r0, n));
  }
  return polar_quadrature(g, region, h, direction_res,
                          [i](const Mat& J) { return std::sqrt(wedge_norm_sq(J, i)); });
}

double flat_full_mass(const ChartGraph& g, const Annulus& region, double h, int direction_res) {
  const int top = g.n - 1;
  return polar_quadrature(g, region, h, direction_res,
                          [top](const Mat& J) { return integrand_sqrt(J, top); });
}

double limiting_volume_v0(const ChartGraph& g, double R, double h, int direction_res) {
  if (R > g.max_radius) throw DomainError("limiting_volume_v0: R exceeds chart");
  const int i = g.n - 1;
  const double rho = 2.0 * h;
  if (2.0 * rho >= R) throw ParameterError("limiting_volume_v0: h too coarse for R");
  const double at_rho = flat_component_mass(g, {rho, R}, i, h, direction_res);
  const double at_2rho = flat_component_mass(g, {2.0 * rho, R}, i, h, direction_res);
  return 2.0 * at_rho - at_2rho;
}

}  // namespace flowvol
