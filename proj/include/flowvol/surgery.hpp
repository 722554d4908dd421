#ifndef FLOWVOL_SURGERY_HPP_
#define FLOWVOL_SURGERY_HPP_

#include "flowvol/singularity.hpp"

namespace flowvol {

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Null-homotopy of a degree-zero slice: H(., 0) is the slice (exactly),
/// H(., 1) the constant p0. Unit-norm everywhere by construction.
struct Homotopy {
  int m = 1;
  Vec p0;
  std::function<Vec(const Vec&, double)> eval;

  Vec operator()(const Vec& omega, double t) const { return eval(omega, t); }
};

struct ContractOptions {
  double gap_threshold = 0.15;  // radians of image-free cap needed to contract
  int gap_search_res = 24;      // candidate net on the target sphere
  double flow_step = 0.3;
  int flow_iters_per_burst = 2;
  int max_bursts = 600;
};

/// Contract a degree-zero slice to a constant. If the image omits a cap, a
/// geodesic homotopy pushes everything to the cap's antipode; surjective
/// slices are first smoothed (fiberwise averaging + renormalization) until a
/// cap opens. degree != 0 raises TopologyError; a flow that never opens a gap
/// raises NonConvergenceError.
Homotopy contract_homotopy(const SphereSliceMap& s, const ContractOptions& opt = {});

/// Fence graph G(y) = H(r y/|y|, 1 - |y|/r) on the ball B(r); matches the
/// slice at |y| = r and the constant p0 at the center. Pole-free.
ChartGraph fence_field(const Homotopy& H, double r);

/// Surgically modified field: original outside the geodesic ball B(x0, r),
/// fence inside, constant at the center.
struct Competitor {
  UnitField field;
  Point center;
  double cut_radius = 0.0;
  Homotopy fence;
  Vec p0;  // constant value in the chart frame at the center
};

Competitor build_competitor(const UnitField& f, const Point& x0, double r, int slice_resolution,
                            const ContractOptions& opt = {});

/// V0(original on B(R)) - V0(competitor on B(R)). The competitor's V0 splits
/// into the shared annulus plus the fence ball; positive gain demonstrates
/// non-minimality of the cone.
double surgery_gain(const ChartGraph& g, const Homotopy& H, double r, double R, double h,
                    int direction_res = 32);

/// Mass of the fence current over the sphere of radius r: the homotopy
/// curtain (r omega, H(omega, t)), t in [0,1]. Its leading term scales as
/// r^{n-1} (only the n-1 base dimensions stretch with r).
double fence_curtain_mass(const Homotopy& H, double r, int omega_res = 32, int t_res = 48);

struct ScalingLaws {
  std::vector<double> radii;
  std::vector<double> fence_mass;  // curtain mass, ~ A r^{n-1}
  std::vector<double> cone_mass;   // full mass of the cone graph over B(r), ~ B r^n
  LineFit fence_fit;
  LineFit cone_fit;
};

/// Log-log power-law fits of the two Theorem-5.1 masses on an h-cone.
ScalingLaws surgery_scaling(const HCone& cone, const Homotopy& H, const std::vector<double>& radii,
                            double h_rel = 0.02, int direction_res = 24);

struct GainCurveRow {
  double r = 0.0;
  double v0_original = 0.0;    // on B(R)
  double v0_competitor = 0.0;  // on B(R)
  double gain = 0.0;
};

std::vector<GainCurveRow> gain_curve(const ChartGraph& g, const Homotopy& H,
                                     const std::vector<double>& radii, double R, double h,
                                     int direction_res = 32);

struct FullComparison {
  VolumeReport original;
  VolumeReport competitor;
  double error_bar_original = 0.0;
  double error_bar_competitor = 0.0;

  double difference() const { return original.total - competitor.total; }
  double combined_error() const { return error_bar_original + error_bar_competitor; }
};

/// Cor 5.3 comparison: the full volume functional V on the Pedersen field and
/// on the surgery competitor spliced into it, shared resolution and pole
/// policy, with quadrature error bars from a coarse/fine pair.
FullComparison full_volume_comparison(const UnitField& f, const Point& x0, double r, double h,
                                      int slice_resolution, const VolumeOptions& base_opt = {});

/// Degree-zero test slice on S^2: constant p0 outside a cap of the given
/// radius around e_1, a pair of cancelling sheets inside (target polar angle
/// runs 0 -> pi -> 0 at fixed azimuth frame). Preimage pairs stay inside the
/// cap, so the cone over this slice is far from connection-optimal and the
/// surgery strictly improves it.
SphereSliceMap bubble_pair_slice(double cap_radius, int resolution);

}  // namespace flowvol

#endif  // FLOWVOL_SURGERY_HPP_
