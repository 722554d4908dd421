#include "flowvol/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace flowvol {

namespace {
constexpr double kPi = std::numbers::pi;

// Height threshold of the stereographic partition of unity: w_north is 1 above
// x_{n+1}/a = +kPouCut, 0 below -kPouCut.
constexpr double kPouCut = 0.45;

double pou_north(double height_over_a) {
  return smoothstep((height_over_a + kPouCut) / (2.0 * kPouCut));
}

// Chart disk radius (in units of a) needed to cover height >= -kPouCut.
double chart_disk_radius() { return std::sqrt((1.0 + kPouCut) / (1.0 - kPouCut)) * 1.02; }
}  // namespace

Manifold Manifold::sphere(int n, double radius) {
  if (n < 2) throw ParameterError("Manifold::sphere: dim must be >= 2");
  if (!(radius > 0.0)) throw ParameterError("Manifold::sphere: radius must be > 0");
  Manifold m;
  m.kind = ManifoldKind::RoundSphere;
  m.dim = n;
  m.radius = radius;
  return m;
}

Manifold Manifold::torus(const Vec& periods) {
  if (periods.size() < 2) throw ParameterError("Manifold::torus: dim must be >= 2");
  for (int i = 0; i < periods.size(); ++i)
    if (!(periods[i] > 0.0)) throw ParameterError("Manifold::torus: periods must be > 0");
  Manifold m;
  m.kind = ManifoldKind::FlatTorus;
  m.dim = static_cast<int>(periods.size());
  m.periods = periods;
  return m;
}

double unit_sphere_area(int m) {
  // area(S^m) = 2 pi^{(m+1)/2} / Gamma((m+1)/2)
  return 2.0 * std::pow(kPi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

double unit_ball_volume(int n) { return unit_sphere_area(n - 1) / n; }

double Manifold::volume() const {
  if (kind == ManifoldKind::RoundSphere) return unit_sphere_area(dim) * std::pow(radius, dim);
  double v = 1.0;
  for (int i = 0; i < periods.size(); ++i) v *= periods[i];
  return v;
}

double Manifold::injectivity_radius() const {
  if (kind == ManifoldKind::RoundSphere) return kPi * radius;
  return 0.5 * periods.minCoeff();
}

std::string Manifold::describe() const {
  std::ostringstream os;
  if (kind == ManifoldKind::RoundSphere) {
    os << "S^" << dim << "(r=" << radius << ")";
  } else {
    os << "T^" << dim << "(";
    for (int i = 0; i < periods.size(); ++i) os << (i ? "," : "") << periods[i];
    os << ")";
  }
  return os.str();
}

Point Point::on_sphere(const Manifold& m, const Vec& x) {
  if (x.size() != m.ambient_dim()) throw ParameterError("Point::on_sphere: wrong ambient dim");
  Point p;
  p.chart = Chart::Embedded;
  p.embedded = x * (m.radius / x.norm());
  p.coords = p.embedded;
  return p;
}

Point Point::on_torus(const Manifold& m, const Vec& u) {
  if (u.size() != m.dim) throw ParameterError("Point::on_torus: wrong dim");
  Point p;
  p.chart = Chart::Fundamental;
  p.coords = u;
  for (int i = 0; i < m.dim; ++i) {
    const double L = m.periods[i];
    p.coords[i] = u[i] - L * std::floor(u[i] / L);
  }
  p.embedded = p.coords;
  return p;
}

Point Point::sphere_polar(const Manifold& m, double theta, double phi) {
  if (!m.is_sphere() || m.dim != 2) throw DomainError("sphere_polar: only S^2");
  if (theta <= 0.0 || theta >= kPi) throw DomainError("sphere_polar: theta outside (0, pi)");
  Point p;
  p.chart = Chart::Polar;
  p.coords = Vec(2);
  p.coords << theta, phi;
  p.embedded = Vec(3);
  const double a = m.radius;
  p.embedded << a * std::sin(theta) * std::cos(phi), a * std::sin(theta) * std::sin(phi),
      a * std::cos(theta);
  return p;
}

Point Point::sphere_stereo(const Manifold& m, Chart chart, const Vec& u) {
  if (!m.is_sphere()) throw DomainError("sphere_stereo: sphere manifolds only");
  if (chart != Chart::StereoNorth && chart != Chart::StereoSouth)
    throw ParameterError("sphere_stereo: chart must be stereographic");
  if (u.size() != m.dim) throw ParameterError("sphere_stereo: wrong chart dim");
  const double a = m.radius;
  const double q = u.squaredNorm() + a * a;
  Point p;
  p.chart = chart;
  p.coords = u;
  p.embedded = Vec(m.dim + 1);
  p.embedded.head(m.dim) = 2.0 * a * a / q * u;
  const double last = a * (a * a - u.squaredNorm()) / q;
  p.embedded[m.dim] = (chart == Chart::StereoNorth) ? last : -last;
  return p;
}

Mat metric_at(const Manifold& m, const Point& p) {
  if (m.kind == ManifoldKind::FlatTorus) {
    for (int i = 0; i < m.dim; ++i)
      if (p.coords[i] < 0.0 || p.coords[i] >= m.periods[i])
        throw DomainError("metric_at: point outside fundamental cell");
    return Mat::Identity(m.dim, m.dim);
  }
  const double a = m.radius;
  switch (p.chart) {
    case Chart::StereoNorth:
    case Chart::StereoSouth: {
      const double lam = 2.0 * a * a / (p.coords.squaredNorm() + a * a);
      return lam * lam * Mat::Identity(m.dim, m.dim);
    }
    case Chart::Polar: {
      if (m.dim != 2) throw DomainError("metric_at: polar chart is S^2 only");
      const double theta = p.coords[0];
      if (theta <= 0.0 || theta >= kPi) throw DomainError("metric_at: polar chart domain");
      Mat g = Mat::Zero(2, 2);
      g(0, 0) = a * a;
      g(1, 1) = a * a * std::sin(theta) * std::sin(theta);
      return g;
    }
    case Chart::Embedded:
      throw DomainError("metric_at: embedded points carry no chart frame");
    default:
      throw DomainError("metric_at: unsupported chart");
  }
}

double geodesic_distance(const Manifold& m, const Point& p, const Point& q) {
  if (m.is_sphere()) {
    const double a = m.radius;
    double c = p.embedded.dot(q.embedded) / (a * a);
    c = std::clamp(c, -1.0, 1.0);
    return a * std::acos(c);
  }
  double d2 = 0.0;
  for (int i = 0; i < m.dim; ++i) {
    const double L = m.periods[i];
    double d = std::abs(p.coords[i] - q.coords[i]);
    d = std::min(d, L - d);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

Point exp_map(const Manifold& m, const Point& p, const Vec& v) {
  if (m.kind == ManifoldKind::FlatTorus) return Point::on_torus(m, p.coords + v);
  const double a = m.radius;
  const double s = v.norm();
  if (s < 1e-300) return p;
  const Vec dir = v / s;
  Vec x = std::cos(s / a) * p.embedded + a * std::sin(s / a) * dir;
  return Point::on_sphere(m, x);
}

Vec geodesic_direction(const Manifold& m, const Point& p, const Point& q) {
  if (m.kind == ManifoldKind::FlatTorus) {
    Vec d(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      const double L = m.periods[i];
      double diff = q.coords[i] - p.coords[i];
      diff -= L * std::round(diff / L);
      d[i] = diff;
    }
    const double n = d.norm();
    if (n < 1e-300) throw DomainError("geodesic_direction: coincident points");
    return d / n;
  }
  const double a = m.radius;
  const double c = p.embedded.dot(q.embedded) / (a * a);
  Vec w = q.embedded - c * p.embedded;
  const double n = w.norm();
  if (n < 1e-12 * a) throw DomainError("geodesic_direction: q is p or its antipode");
  return w / n;
}

Vec transport_along_geodesic(const Manifold& m, const Point& p, const Point& q, const Vec& v) {
  if (m.kind == ManifoldKind::FlatTorus) return v;
  const double a = m.radius;
  const double dist = geodesic_distance(m, p, q);
  if (dist < 1e-14 * a) return v;
  const Vec e = geodesic_direction(m, p, q);  // throws on antipodes
  const double t = dist / a;
  // Tangent of the great circle rotates in the (p, e)-plane; the orthogonal
  // complement is carried unchanged in ambient coordinates.
  const double along = v.dot(e);
  const Vec perp = v - along * e;
  const Vec e_at_q = -std::sin(t) * p.embedded / a + std::cos(t) * e;
  return perp + along * e_at_q;
}

TangentVector parallel_transport_meridian(const Manifold& m, const TangentVector& v,
                                          const Point& q) {
  if (!m.is_sphere()) throw DomainError("parallel_transport_meridian: spheres only");
  const double a = m.radius;
  const double c = v.base.embedded.dot(q.embedded) / (a * a);
  if (c < -1.0 + 1e-12)
    throw PoleError("parallel_transport_meridian: q is the antipode of the basepoint");
  TangentVector out;
  out.base = q;
  out.v = transport_along_geodesic(m, v.base, q, v.v);
  return out;
}

Mat tangent_frame(const Manifold& m, const Point& p) {
  if (m.kind == ManifoldKind::FlatTorus) return Mat::Identity(m.dim, m.dim);
  const int N = m.dim + 1;
  const Vec x = p.embedded / m.radius;
  // Gram-Schmidt the coordinate axes against x, skipping the axis most
  // parallel to x. Deterministic and well conditioned.
  int skip = 0;
  double best = -1.0;
  for (int i = 0; i < N; ++i)
    if (std::abs(x[i]) > best) {
      best = std::abs(x[i]);
      skip = i;
    }
  Mat frame(N, m.dim);
  int col = 0;
  for (int i = 0; i < N; ++i) {
    if (i == skip) continue;
    Vec e = Vec::Zero(N);
    e[i] = 1.0;
    e -= e.dot(x) * x;
    for (int j = 0; j < col; ++j) e -= e.dot(frame.col(j)) * frame.col(j);
    frame.col(col++) = e / e.norm();
  }
  return frame;
}

QuadratureGrid manifold_grid(const Manifold& m, double h) {
  if (!(h > 0.0)) throw ParameterError("manifold_grid: h must be > 0");
  QuadratureGrid grid;
  grid.h = h;
  if (m.kind == ManifoldKind::FlatTorus) {
    std::vector<int> dims(m.dim);
    std::vector<double> steps(m.dim);
    std::int64_t total = 1;
    for (int i = 0; i < m.dim; ++i) {
      dims[i] = std::max(2, static_cast<int>(std::round(m.periods[i] / h)));
      steps[i] = m.periods[i] / dims[i];
      total *= dims[i];
    }
    grid.points.reserve(total);
    grid.weights.reserve(total);
    std::vector<int> ix(m.dim, 0);
    for (std::int64_t lin = 0; lin < total; ++lin) {
      Vec u(m.dim);
      double w = 1.0;
      std::int64_t rem = lin;
      for (int i = m.dim - 1; i >= 0; --i) {
        ix[i] = static_cast<int>(rem % dims[i]);
        rem /= dims[i];
        u[i] = (ix[i] + 0.5) * steps[i];
        w *= steps[i];
      }
      grid.points.push_back(Point::on_torus(m, u));
      grid.weights.push_back(w);
    }
    return grid;
  }
  // Sphere: two stereographic charts with smooth PoU weights.
  const double a = m.radius;
  const double rdisk = chart_disk_radius() * a;
  const int per_axis = std::max(4, static_cast<int>(std::ceil(2.0 * rdisk / (h * a))));
  const double step = 2.0 * rdisk / per_axis;
  std::int64_t total = 1;
  for (int i = 0; i < m.dim; ++i) total *= per_axis;
  for (Chart chart : {Chart::StereoNorth, Chart::StereoSouth}) {
    for (std::int64_t lin = 0; lin < total; ++lin) {
      Vec u(m.dim);
      std::int64_t rem = lin;
      for (int i = m.dim - 1; i >= 0; --i) {
        const int k = static_cast<int>(rem % per_axis);
        rem /= per_axis;
        u[i] = -rdisk + (k + 0.5) * step;
      }
      if (u.norm() > rdisk) continue;
      Point p = Point::sphere_stereo(m, chart, u);
      const double height = p.embedded[m.dim] / a;
      const double wn = pou_north(height);
      const double pou = (chart == Chart::StereoNorth) ? wn : 1.0 - wn;
      if (pou < 1e-14) continue;
      const double lam = 2.0 * a * a / (u.squaredNorm() + a * a);
      const double w = pou * std::pow(lam, m.dim) * std::pow(step, m.dim);
      grid.points.push_back(std::move(p));
      grid.weights.push_back(w);
    }
  }
  return grid;
}

SphereGrid unit_sphere_grid(int m, int resolution) {
  if (resolution < 2) throw ParameterError("unit_sphere_grid: resolution too small");
  SphereGrid g;
  g.m = m;
  if (m == 1) {
    const int N = resolution;
    g.shape = {N};
    const double dphi = 2.0 * kPi / N;
    for (int j = 0; j < N; ++j) {
      const double phi = j * dphi;
      Vec p(2);
      p << std::cos(phi), std::sin(phi);
      g.points.push_back(p);
      g.weights.push_back(dphi);
    }
    return g;
  }
  if (m == 2) {
    // Cylindrical lattice: midpoint in z, uniform phi. Total weight is 4 pi
    // exactly (Archimedes).
    const int Nz = resolution, Np = 2 * resolution;
    g.shape = {Nz, Np};
    const double dz = 2.0 / Nz, dphi = 2.0 * kPi / Np;
    for (int i = 0; i < Nz; ++i) {
      const double z = -1.0 + (i + 0.5) * dz;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      for (int j = 0; j < Np; ++j) {
        const double phi = j * dphi;
        Vec p(3);
        p << s * std::cos(phi), s * std::sin(phi), z;
        g.points.push_back(p);
        g.weights.push_back(dz * dphi);
      }
    }
    return g;
  }
  if (m == 3 || m == 4) {
    // Hyperspherical product midpoint: angles theta_1..theta_{m-1} in (0, pi),
    // phi in [0, 2 pi); weight prod sin^{m-j}(theta_j).
    const int Nt = resolution, Np = 2 * resolution;
    const double dt = kPi / Nt, dphi = 2.0 * kPi / Np;
    const int nang = m - 1;
    std::vector<int> dims(nang, Nt);
    g.shape = dims;
    g.shape.push_back(Np);
    std::int64_t tot = Np;
    for (int i = 0; i < nang; ++i) tot *= Nt;
    for (std::int64_t lin = 0; lin < tot; ++lin) {
      std::int64_t rem = lin;
      const int jp = static_cast<int>(rem % Np);
      rem /= Np;
      std::vector<double> th(nang);
      for (int i = nang - 1; i >= 0; --i) {
        th[i] = (static_cast<int>(rem % Nt) + 0.5) * dt;
        rem /= Nt;
      }
      const double phi = jp * dphi;
      Vec p(m + 1);
      double w = dphi;
      double sprod = 1.0;
      for (int i = 0; i < nang; ++i) {
        p[i] = sprod * std::cos(th[i]);
        w *= std::pow(std::sin(th[i]), m - 1 - i) * dt;
        sprod *= std::sin(th[i]);
      }
      p[nang] = sprod * std::cos(phi);
      p[nang + 1] = sprod * std::sin(phi);
      g.points.push_back(p);
      g.weights.push_back(w);
    }
    return g;
  }
  throw ParameterError("unit_sphere_grid: supported for S^1..S^4");
}

Mat oriented_sphere_frame(const Vec& omega) {
  const int N = static_cast<int>(omega.size());
  const int m = N - 1;
  int skip = 0;
  double best = -1.0;
  for (int i = 0; i < N; ++i)
    if (std::abs(omega[i]) > best) {
      best = std::abs(omega[i]);
      skip = i;
    }
  Mat frame(N, m);
  int col = 0;
  for (int i = 0; i < N; ++i) {
    if (i == skip) continue;
    Vec e = Vec::Zero(N);
    e[i] = 1.0;
    e -= e.dot(omega) * omega;
    for (int j = 0; j < col; ++j) e -= e.dot(frame.col(j)) * frame.col(j);
    frame.col(col++) = e / e.norm();
  }
  Mat full(N, N);
  full.col(0) = omega;
  full.rightCols(m) = frame;
  if (full.determinant() < 0.0) frame.col(m - 1) *= -1.0;
  return frame;
}

double geodesic_sphere_area(const Manifold& m, double r) {
  const int nm1 = m.dim - 1;
  if (m.kind == ManifoldKind::FlatTorus) return unit_sphere_area(nm1) * std::pow(r, nm1);
  const double a = m.radius;
  return unit_sphere_area(nm1) * std::pow(a * std::sin(r / a), nm1);
}

QuadratureGrid geodesic_sphere_grid(const Manifold& m, const Point& center, double r,
                                    int resolution) {
  if (!(r > 0.0) || r >= m.injectivity_radius())
    throw DomainError("geodesic_sphere_grid: radius outside (0, injectivity radius)");
  const int nm1 = m.dim - 1;
  SphereGrid dirs = unit_sphere_grid(nm1, resolution);
  const Mat frame = tangent_frame(m, center);
  const double scale = (m.kind == ManifoldKind::FlatTorus)
                           ? std::pow(r, nm1)
                           : std::pow(m.radius * std::sin(r / m.radius), nm1);
  QuadratureGrid grid;
  grid.h = r / resolution;
  grid.points.reserve(dirs.size());
  grid.weights.reserve(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vec ambient_dir = frame * dirs.points[i];
    grid.points.push_back(exp_map(m, center, r * ambient_dir));
    grid.weights.push_back(dirs.weights[i] * scale);
  }
  return grid;
}

QuadratureGrid sphere_polar_grid(const Manifold& m, const Point& center, double rho_min,
                                 double rho_max, int n_rho, int direction_res) {
  if (!m.is_sphere()) throw DomainError("sphere_polar_grid: spheres only");
  if (!(rho_min >= 0.0) || !(rho_max > rho_min) || rho_max > m.injectivity_radius())
    throw DomainError("sphere_polar_grid: bad radial range");
  const double a = m.radius;
  const int nm1 = m.dim - 1;
  SphereGrid dirs = unit_sphere_grid(nm1, direction_res);
  const Mat frame = tangent_frame(m, center);
  const double drho = (rho_max - rho_min) / n_rho;
  QuadratureGrid grid;
  grid.h = drho;
  grid.points.reserve(dirs.size() * n_rho);
  grid.weights.reserve(dirs.size() * n_rho);
  for (int k = 0; k < n_rho; ++k) {
    const double rho = rho_min + (k + 0.5) * drho;
    const double radial = std::pow(a * std::sin(rho / a), nm1) * drho;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const Vec ambient_dir = frame * dirs.points[i];
      grid.points.push_back(exp_map(m, center, rho * ambient_dir));
      grid.weights.push_back(dirs.weights[i] * radial);
    }
  }
  return grid;
}

}  // namespace flowvol
