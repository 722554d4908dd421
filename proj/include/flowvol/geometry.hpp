#ifndef FLOWVOL_GEOMETRY_HPP_
#define FLOWVOL_GEOMETRY_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flowvol/numerics.hpp"

namespace flowvol {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ManifoldKind { RoundSphere, FlatTorus };

/// Charts carried by points. Sphere points are primarily embedded; the
/// stereographic and polar charts exist for metric queries and quadrature
/// lattices. Torus points live in the fundamental cell.
enum class Chart { Embedded, StereoNorth, StereoSouth, Polar, Fundamental };

struct Manifold {
  ManifoldKind kind = ManifoldKind::RoundSphere;
  int dim = 2;      // n >= 2
  double radius = 1.0;
  Vec periods;      // torus only, all > 0

  static Manifold sphere(int n, double radius = 1.0);
  static Manifold torus(const Vec& periods);

  int ambient_dim() const { return kind == ManifoldKind::RoundSphere ? dim + 1 : dim; }
  bool is_sphere() const { return kind == ManifoldKind::RoundSphere; }
  double volume() const;            // closed form
  double injectivity_radius() const;
  std::string describe() const;
};

/// Area of the unit m-sphere S^m in R^{m+1}.
double unit_sphere_area(int m);
/// Volume of the unit n-ball.
double unit_ball_volume(int n);

struct Point {
  Chart chart = Chart::Embedded;
  Vec coords;    // chart coordinates (torus: fundamental cell; sphere charts as tagged)
  Vec embedded;  // sphere: ambient R^{n+1}; torus: == coords

  static Point on_sphere(const Manifold& m, const Vec& x);           // embedded, renormalized
  static Point on_torus(const Manifold& m, const Vec& u);            // wrapped into cell
  static Point sphere_polar(const Manifold& m, double theta, double phi);  // n = 2 only
  static Point sphere_stereo(const Manifold& m, Chart chart, const Vec& u);
};

struct TangentVector {
  Point base;
  Vec v;  // ambient components; on spheres <v, x> = 0

  double norm() const { return v.norm(); }
};

/// Chart-frame metric at p; SPD. Torus: identity. Sphere stereographic:
/// conformal lambda^2 I; sphere polar (n = 2): diag(a^2, a^2 sin^2 theta).
Mat metric_at(const Manifold& m, const Point& p);

double geodesic_distance(const Manifold& m, const Point& p, const Point& q);

/// exp_p(v) for tangent v (ambient components).
Point exp_map(const Manifold& m, const Point& p, const Vec& v);

/// Unit tangent at p pointing along the minimizing geodesic toward q.
/// Sphere: undefined for q = +-p (throws DomainError).
Vec geodesic_direction(const Manifold& m, const Point& p, const Point& q);

/// Parallel transport of tangent vector v from p to q along the minimizing
/// geodesic (closed form on spheres; identity on flat tori).
Vec transport_along_geodesic(const Manifold& m, const Point& p, const Point& q, const Vec& v);

/// Transport along the great circle through p and -p (the meridian through q).
/// Errors when q = -p, the pole of the construction.
TangentVector parallel_transport_meridian(const Manifold& m, const TangentVector& v, const Point& q);

/// Orthonormal basis of T_p, as columns. Deterministic in p.
Mat tangent_frame(const Manifold& m, const Point& p);

struct QuadratureGrid {
  std::vector<Point> points;
  std::vector<double> weights;
  double h = 0.0;  // lattice spacing (resolution parameter)

  double total_weight() const {
    KahanSum s;
    for (double w : weights) s.add(w);
    return s.value();
  }
};

/// Quadrature grid over the whole manifold. Tori use a periodic midpoint
/// lattice; spheres use two stereographic charts blended by a smooth
/// partition of unity (order-2 convergent).
QuadratureGrid manifold_grid(const Manifold& m, double h);

/// Geodesic-polar grid on a sphere around `center`: radial midpoint rule times
/// a direction grid, dV = (a sin(rho/a))^{n-1} drho domega. Radii restricted to
/// [rho_min, rho_max]. Used for ball/annulus regions and high-dimensional spheres.
QuadratureGrid sphere_polar_grid(const Manifold& m, const Point& center, double rho_min,
                                 double rho_max, int n_rho, int direction_res);

/// Points + weights + frame data on the unit m-sphere in R^{m+1}.
/// m = 1: uniform angles (trapezoid, exact total). m = 2: cylindrical (z, phi)
/// lattice (exact total weight). m >= 3: hyperspherical product midpoint rule.
struct SphereGrid {
  int m = 1;
  std::vector<Vec> points;      // unit vectors in R^{m+1}
  std::vector<double> weights;  // sum -> area(S^m)
  std::vector<int> shape;       // lattice dimensions, row-major indexing

  std::size_t size() const { return points.size(); }
  double total_weight() const {
    KahanSum s;
    for (double w : weights) s.add(w);
    return s.value();
  }
};

SphereGrid unit_sphere_grid(int m, int resolution);

/// Oriented orthonormal tangent frame at omega in S^m: columns e_1..e_m with
/// det[omega, e_1, ..., e_m] = +1. Not continuous in omega; pointwise use only.
Mat oriented_sphere_frame(const Vec& omega);

/// Quadrature grid on the geodesic sphere of radius r about `center`.
/// Sum of weights converges (order 2) to the geodesic sphere area.
QuadratureGrid geodesic_sphere_grid(const Manifold& m, const Point& center, double r,
                                    int resolution);

/// Closed-form area of the geodesic sphere of radius r.
double geodesic_sphere_area(const Manifold& m, double r);

}  // namespace flowvol

#endif  // FLOWVOL_GEOMETRY_HPP_
