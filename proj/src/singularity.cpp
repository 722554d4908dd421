#include "flowvol/singularity.hpp"

#include <cmath>
#include <numbers>

namespace flowvol {

namespace {
constexpr double kPi = std::numbers::pi;

double angle_between(const Vec& u, const Vec& v) {
  return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
}

void check_sample_jumps(const SphereGrid& grid, const std::vector<Vec>& samples) {
  // Adjacent samples along each lattice axis must stay within pi/4.
  const auto& shape = grid.shape;
  if (shape.empty()) return;
  const int ndim = static_cast<int>(shape.size());
  std::vector<std::int64_t> stride(ndim, 1);
  for (int d = ndim - 2; d >= 0; --d) stride[d] = stride[d + 1] * shape[d + 1];
  const std::int64_t total = static_cast<std::int64_t>(samples.size());
  for (std::int64_t lin = 0; lin < total; ++lin) {
    for (int d = 0; d < ndim; ++d) {
      const std::int64_t pos = (lin / stride[d]) % shape[d];
      std::int64_t nb;
      if (pos + 1 < shape[d]) {
        nb = lin + stride[d];
      } else if (d == ndim - 1) {
        nb = lin - pos * stride[d];  // azimuthal wrap
      } else {
        continue;
      }
      if (angle_between(samples[lin], samples[nb]) > kPi / 4.0)
        throw ResolutionError("slice: adjacent samples jump by more than pi/4");
    }
  }
}

}  // namespace

SphereSliceMap SphereSliceMap::from_eval(int m, double radius, std::function<Vec(const Vec&)> eval,
                                         int resolution, double fd_hint) {
  SphereSliceMap s;
  s.m = m;
  s.radius = radius;
  s.eval = std::move(eval);
  s.grid = unit_sphere_grid(m, resolution);
  s.fd_hint = fd_hint;
  s.samples.reserve(s.grid.size());
  for (const Vec& omega : s.grid.points) s.samples.push_back(s.eval(omega));
  return s;
}

SphereLatticeInterp::SphereLatticeInterp(SphereGrid grid, std::vector<Vec> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size())
    throw ParameterError("SphereLatticeInterp: grid/value size mismatch");
  cell_ = 2.0 * kPi / grid_.shape.back();
}

Vec SphereLatticeInterp::operator()(const Vec& omega) const {
  const int m = grid_.m;
  const auto& shape = grid_.shape;
  // Lattice coordinates (t_0, ..., t_{d-1}) of omega; last axis is azimuthal
  // and wraps, the others clamp.
  std::vector<double> t(shape.size());
  if (m == 1) {
    double phi = std::atan2(omega[1], omega[0]);
    if (phi < 0.0) phi += 2.0 * kPi;
    t[0] = phi / (2.0 * kPi) * shape[0];
  } else if (m == 2) {
    const double dz = 2.0 / shape[0];
    t[0] = (omega[2] + 1.0) / dz - 0.5;
    double phi = std::atan2(omega[1], omega[0]);
    if (phi < 0.0) phi += 2.0 * kPi;
    t[1] = phi / (2.0 * kPi) * shape[1];
  } else {
    // hyperspherical angles
    double sprod = 1.0;
    const double dt = kPi / shape[0];
    for (int i = 0; i < m - 1; ++i) {
      const double c = std::clamp(omega[i] / std::max(sprod, 1e-300), -1.0, 1.0);
      const double th = std::acos(c);
      t[i] = th / dt - 0.5;
      sprod *= std::sin(th);
    }
    double phi = std::atan2(omega[m], omega[m - 1]);
    if (phi < 0.0) phi += 2.0 * kPi;
    t[m - 1] = phi / (2.0 * kPi) * shape[m - 1];
  }
  const int ndim = static_cast<int>(shape.size());
  std::vector<int> base(ndim);
  std::vector<double> frac(ndim);
  for (int d = 0; d < ndim; ++d) {
    const bool wrap = (d == ndim - 1);
    double td = t[d];
    if (wrap) {
      td -= shape[d] * std::floor(td / shape[d]);
      base[d] = static_cast<int>(std::floor(td)) % shape[d];
    } else {
      td = std::clamp(td, 0.0, static_cast<double>(shape[d] - 1) - 1e-12);
      base[d] = static_cast<int>(std::floor(td));
    }
    frac[d] = td - std::floor(td);
  }
  std::vector<std::int64_t> stride(ndim, 1);
  for (int d = ndim - 2; d >= 0; --d) stride[d] = stride[d + 1] * shape[d + 1];
  Vec out = Vec::Zero(m + 1);
  const int corners = 1 << ndim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::int64_t lin = 0;
    for (int d = 0; d < ndim; ++d) {
      const int bit = (c >> d) & 1;
      int k = base[d] + bit;
      if (d == ndim - 1) k %= shape[d];
      k = std::min(k, shape[d] - 1);
      lin += static_cast<std::int64_t>(k) * stride[d];
      w *= bit ? frac[d] : (1.0 - frac[d]);
    }
    if (w != 0.0) out += w * values_[static_cast<std::size_t>(lin)];
  }
  const double nrm = out.norm();
  if (nrm < 1e-14) throw DomainError("SphereLatticeInterp: degenerate cell");
  return out / nrm;
}

SphereSliceMap slice(const ChartGraph& g, double r, int resolution) {
  if (!(r > 0.0) || r > g.max_radius) throw DomainError("slice: r outside valid range");
  for (const Vec& p : g.poles)
    if (p.norm() > 1e-12 && std::abs(p.norm() - r) < 1e-9)
      throw DomainError("slice: sphere of radius r passes through another pole");
  auto eval = [g, r](const Vec& omega) -> Vec { return g.eval(r * omega); };
  SphereSliceMap s = SphereSliceMap::from_eval(g.n - 1, r, eval, resolution);
  return s;
}

SphereSliceMap slice(const UnitField& f, const Point& x0, double r, int resolution) {
  return slice(pole_chart_graph(f, x0), r, resolution);
}

double slice_sup_distance(const SphereSliceMap& a, const SphereSliceMap& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.grid.size(); ++i)
    worst = std::max(worst, angle_between(a.samples[i], b.eval(a.grid.points[i])));
  return worst;
}

DegreeResult degree(const SphereSliceMap& s, int quad_res) {
  check_sample_jumps(s.grid, s.samples);
  const int m = s.m;
  const SphereGrid* grid = &s.grid;
  SphereGrid own;
  if (quad_res > 0 && quad_res != s.grid.shape.front()) {
    own = unit_sphere_grid(m, quad_res);
    grid = &own;
  }
  const double delta = s.fd_hint;
  const double area = unit_sphere_area(m);
  const std::int64_t N = static_cast<std::int64_t>(grid->size());
  const double raw = parallel_sum(N, [&](std::int64_t i) -> double {
    const Vec& omega = grid->points[i];
    const Mat frame = oriented_sphere_frame(omega);
    Mat D(m + 1, m + 1);
    D.col(0) = s.eval(omega);
    for (int j = 0; j < m; ++j) {
      const Vec e = frame.col(j);
      const Vec wp = std::cos(delta) * omega + std::sin(delta) * e;
      const Vec wm = std::cos(delta) * omega - std::sin(delta) * e;
      D.col(j + 1) = (s.eval(wp) - s.eval(wm)) / (2.0 * delta);
    }
    return D.determinant() * grid->weights[i];
  }) / area;
  DegreeResult out;
  out.raw = raw;
  out.degree = static_cast<int>(std::lround(raw));
  out.residual = std::abs(raw - out.degree);
  if (out.residual > 0.2)
    throw ResolutionError("degree: raw quadrature value is not close to an integer");
  return out;
}

ChartGraph HCone::as_graph(double max_radius) const {
  ChartGraph g;
  g.n = boundary.m + 1;
  g.max_radius = max_radius;
  g.poles = {Vec::Zero(g.n)};
  g.eval = [b = boundary.eval](const Vec& y) -> Vec {
    const double r = y.norm();
    if (r < 1e-300) throw PoleError("h-cone: evaluation at the apex");
    return b(y / r);
  };
  return g;
}

std::vector<double> default_lambda_sequence() {
  std::vector<double> l;
  for (int mexp = 0; mexp <= 12; ++mexp) l.push_back(std::pow(2.0, -mexp));
  return l;
}

ConeLimitResult cone_limit(const ChartGraph& g, const std::vector<double>& lambdas, double R,
                           double tol, int resolution) {
  if (lambdas.size() < 2) throw ParameterError("cone_limit: need at least two dilations");
  for (std::size_t i = 0; i + 1 < lambdas.size(); ++i)
    if (!(lambdas[i + 1] < lambdas[i]))
      throw ParameterError("cone_limit: lambda sequence must be strictly decreasing");
  if (lambdas.front() > 1.0 || lambdas.front() * R > g.max_radius)
    throw DomainError("cone_limit: first dilation exceeds the chart");

  ConeLimitResult res;
  SphereSliceMap prev = slice(g, lambdas.front() * R, resolution);
  res.lambdas.push_back(lambdas.front());
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    SphereSliceMap cur = slice(g, lambdas[i] * R, resolution);
    res.lambdas.push_back(lambdas[i]);
    res.defects.push_back(slice_sup_distance(prev, cur));
    prev = std::move(cur);
    if (res.defects.back() < tol) {
      res.converged = true;
      break;
    }
  }
  res.cone.boundary = std::move(prev);
  res.cone.boundary.radius = 1.0;
  return res;
}

std::vector<std::pair<double, double>> monotonicity_profile(const ChartGraph& g,
                                                            const std::vector<double>& radii,
                                                            double h, int direction_res) {
  std::vector<std::pair<double, double>> profile;
  profile.reserve(radii.size());
  for (double R : radii)
    profile.emplace_back(R, limiting_volume_v0(g, R, h, direction_res) / R);
  return profile;
}

}  // namespace flowvol
