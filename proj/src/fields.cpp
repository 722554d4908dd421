#include "flowvol/fields.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace flowvol {

namespace {

Mat complex_structure(int ambient) {
  Mat J = Mat::Zero(ambient, ambient);
  for (int k = 0; k + 1 < ambient; k += 2) {
    J(k, k + 1) = -1.0;
    J(k + 1, k) = 1.0;
  }
  return J;
}

/// Meridian translation of a fixed tangent vector v at basepoint x to q,
/// in closed form. Shared by the Pedersen and longitude constructions.
Vec meridian_translate(const Manifold& m, const Vec& x, const Vec& v, const Point& q) {
  const double a = m.radius;
  const double c = std::clamp(q.embedded.dot(x) / (a * a), -1.0, 1.0);
  if (c < -1.0 + 1e-12) throw PoleError("meridian field: evaluation at the antipodal pole");
  const Vec w = q.embedded - c * x;
  const double wn = w.norm();
  if (wn < 1e-14 * a) return v;  // q == basepoint
  const Vec e = w / wn;          // unit tangent at x toward q
  const double sint = wn / a;
  const double along = v.dot(e);
  return along * (-sint * x / a + c * e) + (v - along * e);
}

}  // namespace

std::size_t GridLattice::index(const std::vector<int>& ix) const {
  std::size_t lin = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) lin = lin * dims[d] + ix[d];
  return lin;
}

std::int64_t GridLattice::size() const {
  std::int64_t n = 1;
  for (int d : dims) n *= d;
  return n;
}

double UnitField::distance_to_poles(const Point& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Point& q : poles) best = std::min(best, geodesic_distance(manifold, p, q));
  return best;
}

Point GridFieldData::node_point(int lattice, std::int64_t linear) const {
  const GridLattice& lat = lattices[lattice];
  const int n = static_cast<int>(lat.dims.size());
  Vec u(n);
  std::int64_t rem = linear;
  for (int d = n - 1; d >= 0; --d) {
    u[d] = lat.origin[d] + (rem % lat.dims[d]) * lat.steps[d];
    rem /= lat.dims[d];
  }
  if (manifold.is_sphere()) return Point::sphere_stereo(manifold, lat.chart, u);
  return Point::on_torus(manifold, u);
}

Vec GridFieldData::eval(const Point& p) const {
  const int n = manifold.dim;
  int which = 0;
  Vec u;
  if (manifold.is_sphere()) {
    // Chart by hemisphere; both lattices extend through the equator band.
    const double height = p.embedded[n];
    which = (height >= 0.0) ? 0 : 1;
    const GridLattice& lat = lattices[which];
    const double a = manifold.radius;
    const Vec xp = p.embedded;
    const double denom = (lat.chart == Chart::StereoNorth) ? (a + xp[n]) : (a - xp[n]);
    u = a * xp.head(n) / denom;
  } else {
    u = p.coords;
  }
  const GridLattice& lat = lattices[which];
  std::vector<int> base(n);
  std::vector<double> frac(n);
  for (int d = 0; d < n; ++d) {
    double t = (u[d] - lat.origin[d]) / lat.steps[d];
    if (lat.periodic) {
      t -= lat.dims[d] * std::floor(t / lat.dims[d]);
      base[d] = static_cast<int>(std::floor(t)) % lat.dims[d];
    } else {
      t = std::clamp(t, 0.0, static_cast<double>(lat.dims[d] - 1) - 1e-12);
      base[d] = static_cast<int>(std::floor(t));
    }
    frac[d] = t - std::floor(t);
  }
  const int corners = 1 << n;
  Vec out = Vec::Zero(manifold.ambient_dim());
  std::vector<int> ix(n);
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      const int bit = (c >> d) & 1;
      int k = base[d] + bit;
      if (lat.periodic) k %= lat.dims[d];
      ix[d] = std::min(k, lat.dims[d] - 1);
      w *= bit ? frac[d] : (1.0 - frac[d]);
    }
    if (w == 0.0) continue;
    out += w * lat.samples[lat.index(ix)];
  }
  if (manifold.is_sphere()) {
    const Vec x = p.embedded / manifold.radius;
    out -= out.dot(x) * x;
  }
  const double norm = out.norm();
  if (norm < 1e-14) throw DomainError("grid field: degenerate interpolation (flipped samples?)");
  return out / norm;
}

FieldJacobian covariant_derivative(const UnitField& f, const Point& p, double h, DerivMode mode) {
  if (!(h > 0.0)) throw ParameterError("covariant_derivative: h must be > 0");
  if (!f.poles.empty() && f.distance_to_poles(p) < 2.0 * h)
    throw PoleError("covariant_derivative: within 2h of a pole");
  FieldJacobian out;
  out.base = p;
  out.frame = tangent_frame(f.manifold, p);
  const int n = f.manifold.dim;
  const bool analytic =
      (mode == DerivMode::Analytic) || (mode == DerivMode::Auto && f.has_analytic_jacobian());
  if (analytic) {
    if (!f.has_analytic_jacobian())
      throw ParameterError("covariant_derivative: no analytic jacobian available");
    out.matrix = f.analytic_jacobian(p, out.frame);
    return out;
  }
  out.matrix = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec e = out.frame.col(i);
    const Point qp = exp_map(f.manifold, p, h * e);
    const Point qm = exp_map(f.manifold, p, -h * e);
    const Vec vp = transport_along_geodesic(f.manifold, qp, p, f.eval(qp));
    const Vec vm = transport_along_geodesic(f.manifold, qm, p, f.eval(qm));
    const Vec d = (vp - vm) / (2.0 * h);
    out.matrix.col(i) = out.frame.transpose() * d;
  }
  return out;
}

UnitField hopf_field(const Manifold& m) {
  if (!m.is_sphere()) throw ParameterError("hopf_field: spheres only");
  if (m.dim % 2 == 0) throw ParameterError("hopf_field: requires an odd-dimensional sphere");
  const Mat J = complex_structure(m.ambient_dim());
  const double a = m.radius;
  UnitField f;
  f.manifold = m;
  f.mode = FieldMode::Analytic;
  f.eval = [J, a](const Point& p) -> Vec { return J * p.embedded / a; };
  f.analytic_jacobian = [J, a](const Point&, const Mat& frame) -> Mat {
    return frame.transpose() * J * frame / a;
  };
  return f;
}

UnitField pedersen_field(const Manifold& m, const Point& basepoint) {
  if (!m.is_sphere()) throw ParameterError("pedersen_field: spheres only");
  if (m.dim % 2 == 0) throw ParameterError("pedersen_field: requires an odd-dimensional sphere");
  const Mat J = complex_structure(m.ambient_dim());
  const Vec x = basepoint.embedded;
  const Vec v = J * x / m.radius;  // Hopf vector at the basepoint
  UnitField f;
  f.manifold = m;
  f.mode = FieldMode::Analytic;
  f.eval = [m, x, v](const Point& q) -> Vec { return meridian_translate(m, x, v, q); };
  f.poles = {Point::on_sphere(m, -x)};
  return f;
}

UnitField longitude_field(const Manifold& m, const Point& basepoint) {
  if (!m.is_sphere() || m.dim != 2) throw ParameterError("longitude_field: S^2 only");
  const Vec x = basepoint.embedded;
  const Vec v = tangent_frame(m, basepoint).col(0);
  UnitField f;
  f.manifold = m;
  f.mode = FieldMode::Analytic;
  f.eval = [m, x, v](const Point& q) -> Vec { return meridian_translate(m, x, v, q); };
  f.poles = {Point::on_sphere(m, -x)};
  return f;
}

UnitField constant_field(const Manifold& m, const Vec& direction) {
  if (m.kind != ManifoldKind::FlatTorus) throw ParameterError("constant_field: flat tori only");
  const Vec d = direction / direction.norm();
  UnitField f;
  f.manifold = m;
  f.mode = FieldMode::Analytic;
  f.eval = [d](const Point&) -> Vec { return d; };
  f.analytic_jacobian = [n = m.dim](const Point&, const Mat&) -> Mat { return Mat::Zero(n, n); };
  return f;
}

UnitField grid_sample(const UnitField& f, double h) {
  auto data = std::make_shared<GridFieldData>();
  data->manifold = f.manifold;
  data->poles = f.poles;
  const int n = f.manifold.dim;
  if (f.manifold.kind == ManifoldKind::FlatTorus) {
    GridLattice lat;
    lat.chart = Chart::Fundamental;
    lat.periodic = true;
    lat.dims.resize(n);
    lat.steps.resize(n);
    lat.origin = Vec::Zero(n);
    std::int64_t total = 1;
    for (int d = 0; d < n; ++d) {
      lat.dims[d] = std::max(3, static_cast<int>(std::round(f.manifold.periods[d] / h)));
      lat.steps[d] = f.manifold.periods[d] / lat.dims[d];
      lat.origin[d] = 0.5 * lat.steps[d];
      total *= lat.dims[d];
    }
    lat.samples.resize(total);
    data->lattices.push_back(std::move(lat));
    for (std::int64_t k = 0; k < total; ++k)
      data->lattices[0].samples[k] = f.eval(data->node_point(0, k));
  } else {
    const double a = f.manifold.radius;
    const double rdisk = std::sqrt((1.0 + 0.45) / (1.0 - 0.45)) * 1.02 * a;
    const int per_axis = std::max(4, static_cast<int>(std::ceil(2.0 * rdisk / (h * a))));
    const double step = 2.0 * rdisk / per_axis;
    for (Chart chart : {Chart::StereoNorth, Chart::StereoSouth}) {
      GridLattice lat;
      lat.chart = chart;
      lat.periodic = false;
      lat.dims.assign(n, per_axis);
      lat.steps.assign(n, step);
      lat.origin = Vec::Constant(n, -rdisk + 0.5 * step);
      lat.samples.resize(lat.size());
      data->lattices.push_back(std::move(lat));
    }
    for (int c = 0; c < 2; ++c) {
      GridLattice& lat = data->lattices[c];
      for (std::int64_t k = 0; k < lat.size(); ++k) {
        const Point p = data->node_point(c, k);
        // Near a pole the analytic evaluator may refuse; park a placeholder
        // pointing along the first frame direction (dead weight in quadrature).
        try {
          lat.samples[k] = f.eval(p);
        } catch (const PoleError&) {
          lat.samples[k] = tangent_frame(f.manifold, p).col(0);
        }
      }
    }
  }
  UnitField g;
  g.manifold = f.manifold;
  g.mode = FieldMode::Grid;
  g.poles = f.poles;
  g.grid = data;
  g.eval = [data](const Point& p) -> Vec { return data->eval(p); };
  return g;
}

UnitField perturb_field(const UnitField& f, double amplitude, std::uint64_t seed) {
  if (f.mode != FieldMode::Grid || !f.grid)
    throw ParameterError("perturb_field: grid-mode fields only");
  if (amplitude >= 1.0)
    std::cerr << "perturb_field: amplitude >= 1, renormalization may flip vectors\n";
  auto data = std::make_shared<GridFieldData>(*f.grid);
  if (amplitude != 0.0) {
    Rng rng(seed);
    const int amb = f.manifold.ambient_dim();
    // Smooth affine noise field in ambient coordinates, projected to the
    // tangent space at each node.
    Vec c(amb);
    Mat B(amb, amb);
    for (int i = 0; i < amb; ++i) {
      c[i] = rng.gaussian();
      for (int j = 0; j < amb; ++j) B(i, j) = rng.gaussian();
    }
    double max_norm = 1e-300;
    std::vector<std::vector<Vec>> noise(data->lattices.size());
    for (std::size_t l = 0; l < data->lattices.size(); ++l) {
      GridLattice& lat = data->lattices[l];
      noise[l].resize(lat.size());
      for (std::int64_t k = 0; k < lat.size(); ++k) {
        const Point p = data->node_point(static_cast<int>(l), k);
        Vec w = c + B * p.embedded;
        if (f.manifold.is_sphere()) {
          const Vec x = p.embedded / f.manifold.radius;
          w -= w.dot(x) * x;
        }
        noise[l][k] = w;
        max_norm = std::max(max_norm, w.norm());
      }
    }
    for (std::size_t l = 0; l < data->lattices.size(); ++l) {
      GridLattice& lat = data->lattices[l];
      for (std::int64_t k = 0; k < lat.size(); ++k) {
        Vec s = lat.samples[k] + (amplitude / max_norm) * noise[l][k];
        lat.samples[k] = s / s.norm();
      }
    }
  }
  UnitField g;
  g.manifold = f.manifold;
  g.mode = FieldMode::Grid;
  g.poles = f.poles;
  g.grid = data;
  g.eval = [data](const Point& p) -> Vec { return data->eval(p); };
  return g;
}

}  // namespace flowvol
