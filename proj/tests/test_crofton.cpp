#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "flowvol/crofton.hpp"
#include "flowvol/fields.hpp"
#include "flowvol/singularity.hpp"

using namespace flowvol;
constexpr double kPi = std::numbers::pi;

namespace {
struct Setup {
  Setup() { max_threads() = 2; }
} setup;

/// Asymptotic Kolmogorov-Smirnov p-value for the statistic sqrt(n) D_n.
double ks_pvalue(double sqrt_n_d) {
  double q = 0.0;
  for (int j = 1; j <= 100; ++j)
    q += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * sqrt_n_d * sqrt_n_d);
  return std::clamp(q, 0.0, 1.0);
}

/// Smooth S^1-valued graph with constant gradient norm.
ChartGraph phase_graph(double ax, double ay) {
  ChartGraph g;
  g.n = 2;
  g.max_radius = 10.0;
  g.eval = [ax, ay](const Vec& y) -> Vec {
    const double ph = ax * y[0] + ay * y[1];
    Vec out(2);
    out << std::cos(ph), std::sin(ph);
    return out;
  };
  return g;
}
}  // namespace

TEST_CASE("sample_projection: shapes, orthonormality, determinism") {
  Rng rng(1);
  SplitProjection p = sample_projection(3, 3, 1, rng);
  CHECK(p.p1.rows() == 2);
  CHECK(p.p1.cols() == 3);
  CHECK(p.p2.rows() == 1);
  CHECK((p.p1 * p.p1.transpose() - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK((p.p2 * p.p2.transpose() - Mat::Identity(1, 1)).norm() < 1e-12);

  SplitProjection z = sample_projection(2, 2, 0, rng);
  CHECK(z.p2.rows() == 0);  // empty fiber map at order 0
  CHECK(z.p1.rows() == 2);

  Rng a(42), b(42);
  SplitProjection pa = sample_projection(4, 4, 2, a);
  SplitProjection pb = sample_projection(4, 4, 2, b);
  CHECK((pa.p1 - pb.p1).norm() == 0.0);
  CHECK((pa.p2 - pb.p2).norm() == 0.0);

  CHECK_THROWS_AS(sample_projection(2, 2, 3, rng), ParameterError);
}

TEST_CASE("projection rows are uniform on the sphere (Kolmogorov-Smirnov)") {
  // For p1 in O*(R^3, .), the first component of the first row is uniform
  // on [-1, 1] (Archimedes). KS against that CDF over 10^4 draws.
  Rng rng(2024);
  const int n_draws = 10000;
  std::vector<double> xs;
  xs.reserve(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    SplitProjection p = sample_projection(3, 3, 1, rng);
    xs.push_back(p.p1(0, 0));
  }
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    const double cdf = 0.5 * (xs[i] + 1.0);
    d = std::max(d, std::abs(cdf - (i + 1.0) / n_draws));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n_draws));
  }
  const double p = ks_pvalue(std::sqrt(static_cast<double>(n_draws)) * d);
  CHECK(p > 0.01);
}

TEST_CASE("beta constants: exact cases and frozen oracles") {
  Rng rng(7);
  // N = n: only full-rank projections
  CHECK(beta_constant(3, 3, 100, rng).value == 1.0);
  CHECK(beta_constant(4, 0, 100, rng).value == 1.0);
  CHECK_THROWS_AS(beta_constant(3, 2, 50, rng), ParameterError);

  // beta(2,1) = E|cos theta| = 2/pi (brute-force oracle: average of |cos|)
  BetaEstimate b21 = beta_constant(2, 1, 200000, rng);
  CHECK(std::abs(b21.value - 2.0 / kPi) < 3.0 * b21.stderr_);
  CHECK(b21.stderr_ < 2e-3);

  // beta(3,2) = 1/2: the angle between 2-planes in R^3 reduces to the normal
  // vector's |cos|, whose spherical mean is int_0^{pi/2} cos t sin t dt = 1/2,
  // confirmed by dense 1D quadrature below.
  double dense = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double z = -1.0 + 2.0 * (i + 0.5) / N;  // uniform height on S^2
    dense += std::abs(z) / N;
  }
  CHECK(dense == doctest::Approx(0.5).epsilon(1e-6));
  BetaEstimate b32 = beta_constant(3, 2, 200000, rng);
  CHECK(std::abs(b32.value - 0.5) < 3.0 * b32.stderr_);

  // plane independence: two disjoint sample streams agree within error bars
  Rng r2(1234);
  BetaEstimate again = beta_constant(3, 2, 200000, r2);
  CHECK(std::abs(again.value - b32.value) < 3.0 * (again.stderr_ + b32.stderr_));
}

TEST_CASE("rasterized graphs: lattice bookkeeping and Lipschitz estimate") {
  ChartGraph g = phase_graph(0.8, 0.3);
  GraphPatch patch = rasterize_graph(g, {0.2, 1.0}, 0.01);
  CHECK(patch.size() > 10000);
  const double grad = std::hypot(0.8, 0.3);
  CHECK(patch.lipschitz == doctest::Approx(std::sqrt(1.0 + grad * grad)).epsilon(0.05));
  // every stored sample is inside the annulus
  for (const Vec& x : patch.xs) {
    CHECK(x.norm() >= 0.2 - 1e-12);
    CHECK(x.norm() <= 1.0 + 1e-12);
  }
}

TEST_CASE("multiplicity, i = 0: one sheet over every covered cell") {
  ChartGraph g = phase_graph(0.3, 0.0);
  GraphPatch patch = rasterize_graph(g, {0.0, 0.8}, 0.01);
  Rng rng(5);
  SplitProjection p = sample_projection(2, 2, 0, rng);
  MultiplicityField field = multiplicity_count(patch, p, 0.05);
  for (const auto& kv : field.counts) CHECK(kv.second == 1);
  // total measure is the annulus area up to raster bias
  CHECK(field.total_measure() == doctest::Approx(kPi * 0.64).epsilon(0.05));
  CHECK_THROWS_AS(multiplicity_count(patch, p, 1e-4), ResolutionError);
}

TEST_CASE("multiplicity, i = 1: constant graphs have measure zero") {
  ChartGraph g;
  g.n = 2;
  g.max_radius = 10.0;
  Vec val(2);
  val << 0.0, 1.0;
  g.eval = [val](const Vec&) { return val; };
  GraphPatch patch = rasterize_graph(g, {0.0, 0.8}, 0.01);
  Rng rng(6);
  SplitProjection p = sample_projection(2, 2, 1, rng);
  MultiplicityField field = multiplicity_count(patch, p, 0.05);
  // degenerate image: a 1-dimensional set, so its raster measure is O(cell)
  CHECK(field.total_measure() < 0.35);
}

TEST_CASE("crofton estimate, i = 0: recovers the region volume") {
  ChartGraph g = phase_graph(0.8, 0.3);
  GraphPatch patch = rasterize_graph(g, {0.2, 1.0}, 0.008);
  Rng rng(9);
  CroftonEstimate est = crofton_mass_estimate(patch, 0, 200, 0.025, rng);
  const double exact = kPi * (1.0 - 0.04);
  CHECK(std::abs(est.estimate - exact) <= 3.0 * est.stderr_ + 0.05 * exact);
}

TEST_CASE("crofton estimate, i = 1: cross-validates quadrature (phase graph)") {
  ChartGraph g = phase_graph(0.8, 0.3);
  const Annulus region{0.2, 1.0};
  GraphPatch patch = rasterize_graph(g, region, 0.0074);
  const double reference = flat_component_mass(g, region, 1, 0.01, 128);
  Rng rng(10);
  CroftonEstimate est = crofton_mass_estimate(patch, 1, 2000, 0.02, rng);
  CHECK(std::abs(est.estimate - reference) <= 3.0 * est.stderr_ + 0.05 * reference);
  CHECK(est.stderr_ / est.estimate < 0.05);
}

TEST_CASE("crofton estimate, i = 1: longitude annulus") {
  Manifold s2 = Manifold::sphere(2, 1.0);
  Point p = Point::on_sphere(s2, Vec::Unit(3, 2));
  UnitField lf = longitude_field(s2, p);
  ChartGraph g = pole_chart_graph(lf, lf.poles[0]);
  const Annulus region{0.4, 0.9};
  GraphPatch patch = rasterize_graph(g, region, 0.00117);
  const double reference = flat_component_mass(g, region, 1, 0.005, 128);
  Rng rng(11);
  CroftonEstimate est = crofton_mass_estimate(patch, 1, 300, 0.0125, rng);
  CHECK(std::abs(est.estimate - reference) <= 3.0 * est.stderr_ + 0.05 * reference);
}

TEST_CASE("single projections are mass-decreasing") {
  ChartGraph g = phase_graph(0.8, 0.3);
  const Annulus region{0.2, 1.0};
  GraphPatch patch = rasterize_graph(g, region, 0.01);
  const double graph_mass = flat_full_mass(g, region, 0.01, 128);
  Rng rng(13);
  for (int i : {0, 1}) {
    for (int trial = 0; trial < 10; ++trial) {
      SplitProjection p = sample_projection(2, 2, i, rng);
      const double measure = multiplicity_count(patch, p, 0.05).total_measure();
      CHECK(measure <= graph_mass * 1.05);
    }
  }
}

TEST_CASE("estimator consistency: error shrinks with more projections and finer cells") {
  ChartGraph g = phase_graph(0.9, -0.2);
  const Annulus region{0.2, 1.0};
  const double reference = flat_component_mass(g, region, 1, 0.01, 128);
  Rng rng(17);
  GraphPatch coarse = rasterize_graph(g, region, 0.016);
  GraphPatch fine = rasterize_graph(g, region, 0.006);
  double err_coarse =
      std::abs(crofton_mass_estimate(coarse, 1, 300, 0.12, rng).estimate - reference);
  double err_fine =
      std::abs(crofton_mass_estimate(fine, 1, 2400, 0.04, rng).estimate - reference);
  CHECK(err_fine < err_coarse);
}
