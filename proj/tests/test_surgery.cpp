#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "flowvol/surgery.hpp"

using namespace flowvol;
constexpr double kPi = std::numbers::pi;

namespace {
struct Setup {
  Setup() { max_threads() = 2; }
} setup;

SphereSliceMap constant_slice(int m, int res) {
  Vec p0 = Vec::Unit(m + 1, m);
  return SphereSliceMap::from_eval(m, 1.0, [p0](const Vec&) { return p0; }, res);
}

ChartGraph pedersen_graph() {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  return pole_chart_graph(ped, ped.poles[0]);
}

double homotopy_unit_norm_defect(const Homotopy& H, int res) {
  SphereGrid grid = unit_sphere_grid(H.m, res);
  double worst = 0.0;
  for (double t : {0.0, 0.3, 0.55, 0.8, 1.0})
    for (const Vec& w : grid.points)
      worst = std::max(worst, std::abs(H.eval(w, t).norm() - 1.0));
  return worst;
}
}  // namespace

TEST_CASE("contract_homotopy: constant slice gives the constant homotopy") {
  SphereSliceMap s = constant_slice(2, 24);
  Homotopy H = contract_homotopy(s);
  SphereGrid grid = unit_sphere_grid(2, 16);
  for (double t : {0.0, 0.5, 1.0})
    for (const Vec& w : grid.points) {
      // image stays within the hemisphere swept from p0' to the constant
      CHECK((H.eval(w, t) - s.samples.front()).norm() <
            (H.eval(w, 1.0) - s.samples.front()).norm() + 1e-12);
    }
  // endpoints exact
  for (const Vec& w : grid.points) {
    CHECK((H.eval(w, 0.0) - s.samples.front()).norm() == 0.0);
    CHECK((H.eval(w, 1.0) - H.p0).norm() == 0.0);
  }
}

TEST_CASE("contract_homotopy: near-constant slice contracts geodesically") {
  // small perturbation of a constant: image in a hemisphere, no flow needed
  auto eval = [](const Vec& w) -> Vec {
    Vec p0(3);
    p0 << 0, 0, 1;
    Vec v = p0 + 0.2 * w[0] * Vec::Unit(3, 0);
    return v / v.norm();
  };
  SphereSliceMap s = SphereSliceMap::from_eval(2, 1.0, eval, 32);
  Homotopy H = contract_homotopy(s);
  CHECK(homotopy_unit_norm_defect(H, 16) < 1e-12);
  // max displacement below pi and endpoints exact
  SphereGrid grid = unit_sphere_grid(2, 16);
  for (const Vec& w : grid.points) {
    CHECK((H.eval(w, 0.0) - s.eval(w)).norm() < 1e-14);
    const double travel = std::acos(std::clamp(s.eval(w).dot(H.p0), -1.0, 1.0));
    CHECK(travel < kPi - 0.1);
  }
}

TEST_CASE("contract_homotopy refuses nonzero degree") {
  Manifold s2 = Manifold::sphere(2, 1.0);
  Point p = Point::on_sphere(s2, Vec::Unit(3, 2));
  UnitField lf = longitude_field(s2, p);
  SphereSliceMap sl = slice(lf, lf.poles[0], 0.4, 256);
  CHECK_THROWS_AS(contract_homotopy(sl), TopologyError);
}

TEST_CASE("fence field: boundary slice reproduced, constant limit at center") {
  ChartGraph g = pedersen_graph();
  SphereSliceMap sl = slice(g, 0.5, 40);
  Homotopy H = contract_homotopy(sl);
  const double r = 0.5;
  ChartGraph fence = fence_field(H, r);
  CHECK(fence.poles.empty());
  SphereGrid grid = unit_sphere_grid(2, 12);
  for (const Vec& w : grid.points) {
    CHECK((fence.eval(r * w) - sl.eval(w)).norm() < 1e-12);     // t = 0 endpoint
    CHECK((fence.eval(1e-9 * w) - H.p0).norm() < 1e-7);         // center limit
  }
  CHECK((fence.eval(Vec::Zero(3)) - H.p0).norm() == 0.0);
  CHECK_THROWS_AS(fence_field(H, -1.0), ParameterError);
}

TEST_CASE("homotopy validity: unit norm everywhere by construction") {
  ChartGraph g = pedersen_graph();
  SphereSliceMap sl = slice(g, 0.5, 40);
  Homotopy H = contract_homotopy(sl);
  CHECK(homotopy_unit_norm_defect(H, 20) < 1e-12);
}

TEST_CASE("fence slices keep degree zero for all homotopy times") {
  ChartGraph g = pedersen_graph();
  SphereSliceMap sl = slice(g, 0.5, 40);
  Homotopy H = contract_homotopy(sl);
  for (double t : {0.0, 0.35, 0.7, 0.95}) {
    auto section = SphereSliceMap::from_eval(
        2, 1.0, [&H, t](const Vec& w) { return H.eval(w, t); }, 320, 2e-3);
    CHECK(degree(section).degree == 0);
  }
}

TEST_CASE("curtain mass scales as r^{n-1}; cone mass as r^n") {
  ChartGraph g = pedersen_graph();
  ConeLimitResult cl = cone_limit(g, default_lambda_sequence(), 1.0, 1e-6, 40);
  REQUIRE(cl.converged);
  SphereSliceMap sl = slice(g, 0.5, 40);
  Homotopy H = contract_homotopy(sl);
  std::vector<double> radii;
  for (int j = 0; j < 6; ++j) radii.push_back(16.0 * std::pow(2.0, j));
  ScalingLaws laws = surgery_scaling(cl.cone, H, radii, 0.02, 24);
  CHECK(std::abs(laws.fence_fit.slope - 2.0) < 0.05);
  CHECK(std::abs(laws.cone_fit.slope - 3.0) < 0.05);
  // the r^{n-1} law: curtain mass / r^2 constant to 2 percent over the range
  const double c0 = laws.fence_mass.front() / (radii.front() * radii.front());
  const double c1 = laws.fence_mass.back() / (radii.back() * radii.back());
  CHECK(std::abs(c1 - c0) / c0 < 0.02);
}

TEST_CASE("build_competitor: splice exactness, no pole, boundary agreement") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  const Point pole = ped.poles[0];
  const double r = 0.5;
  Competitor comp = build_competitor(ped, pole, r, 40);

  CHECK(comp.field.poles.empty());  // fence is pole-free
  // bitwise agreement outside the cut ball
  Rng rng(3);
  int outside = 0;
  while (outside < 60) {
    Vec v(4);
    for (int i = 0; i < 4; ++i) v[i] = rng.gaussian();
    Point q = Point::on_sphere(s3, v);
    if (geodesic_distance(s3, pole, q) < r + 1e-9) continue;
    ++outside;
    const Vec a = comp.field.eval(q);
    const Vec b = ped.eval(q);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    CHECK(a[2] == b[2]);
    CHECK(a[3] == b[3]);
  }
  // boundary slices agree at |x| = r
  ChartGraph gc = pole_chart_graph(comp.field, pole);
  ChartGraph gp = pole_chart_graph(ped, pole);
  SphereSliceMap sc = slice(gc, r * (1.0 + 1e-12), 32);
  SphereSliceMap sp = slice(gp, r, 32);
  CHECK(slice_sup_distance(sc, sp) < 1e-6);
  // competitor value at the center is the homotopy constant
  const Mat frame = tangent_frame(s3, pole);
  CHECK((comp.field.eval(pole) - frame * comp.p0).norm() < 1e-12);
  // slices of the competitor inside the cut have degree 0
  SphereSliceMap inner = slice(gc, 0.3, 320);
  CHECK(degree(inner).degree == 0);
}

TEST_CASE("competitor of a smooth field converges to it as r -> 0") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  UnitField hopf = hopf_field(s3);
  Point c = Point::on_sphere(s3, Vec::Unit(4, 1));
  VolumeOptions opt;
  opt.deriv = DerivMode::FiniteDifference;
  const double v_ref = volume(hopf, 0.1, opt).total;
  double prev = 1e9;
  for (double r : {0.4, 0.2}) {
    Competitor comp = build_competitor(hopf, c, r, 32);
    const double v = volume(comp.field, 0.1, opt).total;
    CHECK(std::abs(v - v_ref) < prev);
    prev = std::abs(v - v_ref);
  }
  CHECK(prev < 0.05);
}

TEST_CASE("surgery gain is strictly positive on the bubble-pair cone") {
  SphereSliceMap sl = bubble_pair_slice(1.2, 96);
  CHECK(degree(sl).degree == 0);
  HCone cone;
  cone.boundary = sl;
  ChartGraph g = cone.as_graph(10.0);
  Homotopy H = contract_homotopy(sl);
  const double A = flat_component_mass(fence_field(H, 1.0), {0.0, 1.0}, 2, 0.005, 48);
  const double B = limiting_volume_v0(g, 1.0, 0.005, 48);
  CHECK(B > A + 1.0);  // genuine margin, not quadrature noise
  std::vector<GainCurveRow> curve = gain_curve(g, H, {0.125, 0.25, 0.5}, 1.0, 0.004, 96);
  bool found_positive = false;
  for (const auto& row : curve) {
    CHECK(row.gain == doctest::Approx(row.v0_original - row.v0_competitor));
    if (row.gain > 0.0) found_positive = true;
  }
  CHECK(found_positive);
  // gain approximately linear in r for an exact cone: doubling r doubles gain
  CHECK(curve[2].gain / curve[1].gain == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("pedersen cone: every fence loses (connection-optimal pole)") {
  // The slice sigma(u) = v - 2<v,u>u sends antipodal domain pairs to the same
  // value with cancelling orientations. By the coarea formula V0(filling) is
  // the total preimage length, and each preimage must connect two antipodal
  // boundary points, so V0 >= 2 * area(S^2) * r = 8 pi r with equality for
  // the radial cone. The constructed fence can therefore never win here.
  ChartGraph g = pedersen_graph();
  SphereSliceMap sl = slice(g, 0.5, 40);
  Homotopy H = contract_homotopy(sl);
  const double gain = surgery_gain(g, H, 0.5, 1.0, 0.01, 48);
  CHECK(gain < 0.0);
  // and V0 of the cone sits on the lower bound
  CHECK(limiting_volume_v0(g, 1.0, 0.005, 64) ==
        doctest::Approx(8.0 * kPi).epsilon(5e-3));
}

TEST_CASE("gain curve bookkeeping and parameter guards") {
  ChartGraph g = pedersen_graph();
  SphereSliceMap sl = slice(g, 0.5, 32);
  Homotopy H = contract_homotopy(sl);
  CHECK_THROWS_AS(surgery_gain(g, H, 1.5, 1.0, 0.01, 24), ParameterError);
  CHECK_THROWS_AS(surgery_gain(g, H, -0.1, 1.0, 0.01, 24), ParameterError);
}

TEST_CASE("full volume comparison: totals, error bars, competitor finiteness") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  VolumeOptions opt;
  opt.force_polar = true;
  opt.polar_direction_res = 20;
  FullComparison cmp = full_volume_comparison(ped, ped.poles[0], 0.5, 0.03, 32, opt);
  CHECK(std::isfinite(cmp.competitor.total));
  CHECK(cmp.original.total > 4.0 * kPi * kPi);  // Hopf minimizes on S^3
  CHECK(cmp.error_bar_original < 0.05 * cmp.original.total);
  // with the connection-optimal pole the spliced field costs more, beyond bars
  CHECK(cmp.difference() < -cmp.combined_error());
}
