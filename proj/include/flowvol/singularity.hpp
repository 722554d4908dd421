#ifndef FLOWVOL_SINGULARITY_HPP_
#define FLOWVOL_SINGULARITY_HPP_

#include <utility>
#include <vector>

#include "flowvol/volume.hpp"

namespace flowvol {

/// Restriction of a field to a small sphere around a candidate pole, as a map
/// S^{m} -> S^{m} (m = n-1) in the radially transported reference frame at the
/// center. `eval` is exact (it closes over its source); `samples` hold the
/// lattice restriction used for defect comparisons and serialization.
struct SphereSliceMap {
  int m = 1;
  double radius = 0.0;
  std::function<Vec(const Vec&)> eval;
  SphereGrid grid;
  std::vector<Vec> samples;
  double fd_hint = 1e-5;  // finite-difference step suited to the evaluator

  static SphereSliceMap from_eval(int m, double radius, std::function<Vec(const Vec&)> eval,
                                  int resolution, double fd_hint = 1e-5);
};

/// Multilinear interpolation of unit vectors over a SphereGrid lattice,
/// renormalized on evaluation.
class SphereLatticeInterp {
 public:
  SphereLatticeInterp(SphereGrid grid, std::vector<Vec> values);
  Vec operator()(const Vec& omega) const;
  double cell_size() const { return cell_; }

 private:
  SphereGrid grid_;
  std::vector<Vec> values_;
  double cell_ = 0.1;
};

/// Slice of a chart graph at radius r.
SphereSliceMap slice(const ChartGraph& g, double r, int resolution);

/// Slice of a manifold field around x0 (flattens through pole_chart_graph).
SphereSliceMap slice(const UnitField& f, const Point& x0, double r, int resolution);

/// Sup (angular) distance between two slice maps over the first map's grid.
double slice_sup_distance(const SphereSliceMap& a, const SphereSliceMap& b);

struct DegreeResult {
  int degree = 0;
  double raw = 0.0;
  double residual = 0.0;  // |raw - degree|
};

/// Topological degree by quadrature of the pulled-back volume form,
/// deg = (1/area(S^m)) int det[s, Ds(e_1), ..., Ds(e_m)]. Raw values farther
/// than 0.2 from an integer raise ResolutionError.
DegreeResult degree(const SphereSliceMap& s, int quad_res = 0);

/// An h-cone: the radial extension u(y) = boundary(y / |y|).
struct HCone {
  SphereSliceMap boundary;
  ChartGraph as_graph(double max_radius = 1e6) const;
};

struct ConeLimitResult {
  bool converged = false;
  HCone cone;
  std::vector<double> lambdas;  // dilation parameters actually visited
  std::vector<double> defects;  // sup distance between successive dilated slices
};

/// Blow-up limit at the chart center: compares slices at radii lambda_m * R
/// until successive ones agree within `tol` in sup distance. Non-convergence
/// is a reported outcome, not an exception.
ConeLimitResult cone_limit(const ChartGraph& g, const std::vector<double>& lambdas, double R,
                           double tol, int resolution);

/// Default dilation sequence lambda_m = 2^{-m}, m = 0..12.
std::vector<double> default_lambda_sequence();

/// (R, V0(B(R)) / R) for each requested radius; constant for genuine h-cones,
/// nondecreasing (within tolerance) for pre-cone fields.
std::vector<std::pair<double, double>> monotonicity_profile(const ChartGraph& g,
                                                            const std::vector<double>& radii,
                                                            double h, int direction_res = 32);

}  // namespace flowvol

#endif  // FLOWVOL_SINGULARITY_HPP_
