#ifndef FLOWVOL_VOLUME_HPP_
#define FLOWVOL_VOLUME_HPP_

#include <optional>
#include <string>
#include <vector>

#include "flowvol/fields.hpp"

namespace flowvol {

/// ||J^{wedge k}||^2: the k-th elementary symmetric function of the
/// eigenvalues of J^T J (sum of squared k x k minors). k = 0 gives 1;
/// k beyond the rank gives 0.
double wedge_norm_sq(const Mat& J, int k);

struct VolumeReport {
  double total = 0.0;
  std::vector<double> per_order;  // integral of ||nabla xi^{wedge k}|| for k = 0..n-1
  double h = 0.0;
  std::string region;
};

enum class PolePolicy { Error, Exclude, ExcludeExtrapolate };

struct VolumeOptions {
  PolePolicy pole_policy = PolePolicy::Error;
  DerivMode deriv = DerivMode::Auto;
  double fd_step = 0.0;  // 0: use grid h
  // Sphere quadrature: dims <= 3 default to the stereographic atlas; higher
  // dimensions (or set force_polar) use a geodesic-polar grid about `polar_center`.
  bool force_polar = false;
  std::optional<Point> polar_center;
  int polar_direction_res = 24;
};

/// Volume functional V(xi) = int sqrt(1 + sum_k ||nabla xi^{wedge k}||^2) dV
/// over the whole manifold. Per-order masses are reported alongside.
VolumeReport volume(const UnitField& f, double h, const VolumeOptions& opt = {});

/// Component mass M(T_i) = int ||nabla xi^{wedge i}|| dV over the manifold.
double component_mass(const UnitField& f, int i, double h, const VolumeOptions& opt = {});

// ---------------------------------------------------------------------------
// Flattened graphs near a pole: u : R^n -> S^{n-1} subset R^n in normal
// coordinates with radially parallel-transported fibers. All blow-up analysis
// (dilations, cones, the limiting functional) happens in this picture.

struct ChartGraph {
  int n = 2;  // base dim; fiber S^{n-1}
  std::function<Vec(const Vec&)> eval;
  std::vector<Vec> poles;  // usually {0}
  double max_radius = 1.0;

  Vec operator()(const Vec& y) const { return eval(y); }
};

/// Normal-coordinate graph of a manifold field about x0 (radial transport
/// frames). The pole set maps accordingly.
ChartGraph pole_chart_graph(const UnitField& f, const Point& x0);

/// Horizontal dilation: u_lambda(y) = u(lambda y) on the ball of radius R.
/// Requires lambda in (0, 1] and lambda R within the source graph.
ChartGraph dilate(const ChartGraph& g, double lambda, double R);

/// Flat Jacobian Du at y by central differences (step fd; shrinks near the
/// pole so the stencil never straddles it).
Mat chart_jacobian(const ChartGraph& g, const Vec& y, double fd);

struct Annulus {
  double r0 = 0.0;  // inner radius (0 = ball)
  double r1 = 1.0;
};

/// int_region ||Du^{wedge i}|| dy over a centered ball/annulus, polar quadrature.
double flat_component_mass(const ChartGraph& g, const Annulus& region, int i, double h,
                           int direction_res = 32);

/// Full flat mass int_region sqrt(1 + sum_k ||Du^{wedge k}||^2) dy.
double flat_full_mass(const ChartGraph& g, const Annulus& region, double h,
                      int direction_res = 32);

/// Limiting functional V0 = int_B(R) ||Du^{wedge(n-1)}|| dy with a pole
/// exclusion of radius 2h and Richardson extrapolation of the exclusion to 0.
double limiting_volume_v0(const ChartGraph& g, double R, double h, int direction_res = 32);

}  // namespace flowvol

#endif  // FLOWVOL_VOLUME_HPP_
