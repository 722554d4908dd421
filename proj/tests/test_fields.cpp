#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "flowvol/fields.hpp"
#include "flowvol/io.hpp"

using namespace flowvol;
constexpr double kPi = std::numbers::pi;

namespace {
struct Setup {
  Setup() { max_threads() = 2; }
} setup;

Point random_sphere_point(const Manifold& m, Rng& rng) {
  Vec x(m.ambient_dim());
  for (int i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
  return Point::on_sphere(m, x);
}
}  // namespace

TEST_CASE("hopf field: definition, tangency, unit norm") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  UnitField hopf = hopf_field(s3);
  Point e1 = Point::on_sphere(s3, Vec::Unit(4, 0));
  Vec xi = hopf.eval(e1);
  CHECK(xi[0] == doctest::Approx(0.0));
  CHECK(xi[1] == doctest::Approx(1.0));
  CHECK(xi[2] == doctest::Approx(0.0));
  CHECK(xi[3] == doctest::Approx(0.0));

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    Point p = random_sphere_point(s3, rng);
    Vec v = hopf.eval(p);
    CHECK(std::abs(v.dot(p.embedded)) < 1e-12);
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(hopf_field(Manifold::sphere(2, 1.0)), ParameterError);
  CHECK_THROWS_AS(hopf_field(Manifold::sphere(4, 1.0)), ParameterError);
}

TEST_CASE("pedersen field: basepoint value, transport oracle, pole error") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  UnitField hopf = hopf_field(s3);

  // equals the Hopf vector at the basepoint (zero-length transport)
  CHECK((ped.eval(x) - hopf.eval(x)).norm() < 1e-13);

  // at a generic point q, matches meridian transport of v from x
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    Point q = random_sphere_point(s3, rng);
    if (geodesic_distance(s3, q, ped.poles[0]) < 1e-3) continue;
    Vec expected =
        transport_along_geodesic(s3, x, q, hopf.eval(x));
    CHECK((ped.eval(q) - expected).norm() < 1e-10);
    CHECK(std::abs(ped.eval(q).norm() - 1.0) < 1e-12);
  }

  // pole: evaluation at -x errors
  CHECK(ped.poles.size() == 1);
  CHECK((ped.poles[0].embedded + x.embedded).norm() < 1e-12);
  CHECK_THROWS_AS(ped.eval(ped.poles[0]), PoleError);
}

TEST_CASE("pedersen agrees with hopf along the Hopf fiber through the basepoint") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  UnitField hopf = hopf_field(s3);
  const Vec v = hopf.eval(x);
  for (double t : {0.2, 0.8, 1.5, 2.9}) {
    Point q = exp_map(s3, x, t * v);
    CHECK((ped.eval(q) - hopf.eval(q)).norm() < 1e-10);
  }
}

TEST_CASE("pedersen slice around the pole covers the fiber (eps-net shrinks)") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  const Point pole = ped.poles[0];
  const Mat frame = tangent_frame(s3, pole);

  auto coverage = [&](int res) {
    // sample field values on a small geodesic sphere, measure the worst
    // distance from a net on the fiber sphere S^2 to the sampled image
    QuadratureGrid sph = geodesic_sphere_grid(s3, pole, 0.1, res);
    std::vector<Vec> image;
    image.reserve(sph.points.size());
    for (const Point& q : sph.points) image.push_back(ped.eval(q));
    SphereGrid net = unit_sphere_grid(2, 12);
    double worst = 0.0;
    for (const Vec& z : net.points) {
      const Vec target = frame * z;
      double best = kPi;
      for (const Vec& s : image)
        best = std::min(best, std::acos(std::clamp(s.dot(target), -1.0, 1.0)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  const double eps_coarse = coverage(8);
  const double eps_fine = coverage(16);
  CHECK(eps_fine < eps_coarse);
  CHECK(eps_fine < 0.35);
}

TEST_CASE("longitude field: basepoint value, norm, pole bookkeeping") {
  Manifold s2 = Manifold::sphere(2, 1.0);
  Point p = Point::on_sphere(s2, Vec::Unit(3, 2));
  UnitField lf = longitude_field(s2, p);
  const Vec v = tangent_frame(s2, p).col(0);
  CHECK((lf.eval(p) - v).norm() < 1e-13);
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    Point q = random_sphere_point(s2, rng);
    if (geodesic_distance(s2, q, lf.poles[0]) < 1e-3) continue;
    CHECK(std::abs(lf.eval(q).norm() - 1.0) < 1e-12);
    CHECK(std::abs(lf.eval(q).dot(q.embedded)) < 1e-12);
  }
  CHECK_THROWS_AS(lf.eval(lf.poles[0]), PoleError);
  CHECK_THROWS_AS(longitude_field(Manifold::sphere(3, 1.0), p), ParameterError);
}

TEST_CASE("covariant derivative: constant torus field vanishes") {
  Vec periods(3);
  periods << 1.0, 1.0, 1.0;
  Manifold t3 = Manifold::torus(periods);
  Vec d(3);
  d << 1.0, 2.0, -1.0;
  UnitField f = constant_field(t3, d);
  Vec u(3);
  u << 0.25, 0.5, 0.125;
  Point p = Point::on_torus(t3, u);
  FieldJacobian fd = covariant_derivative(f, p, 0.01, DerivMode::FiniteDifference);
  CHECK(fd.matrix.norm() < 1e-12);
  FieldJacobian an = covariant_derivative(f, p, 0.01, DerivMode::Analytic);
  CHECK(an.matrix.norm() == 0.0);
}

TEST_CASE("covariant derivative of hopf: wedge data and FD convergence") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  UnitField hopf = hopf_field(s3);
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Point p = random_sphere_point(s3, rng);
    FieldJacobian an = covariant_derivative(hopf, p, 0.01, DerivMode::Analytic);
    // ||nabla xi||^2 = 2 at every point (frozen from the J x derivation)
    CHECK(an.matrix.squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
    // rank 2 with both singular values 1
    Eigen::JacobiSVD<Mat> svd(an.matrix);
    CHECK(svd.singularValues()[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(svd.singularValues()[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(svd.singularValues()[2] == doctest::Approx(0.0));
  }
  // FD converges to analytic at order 2
  Point p = random_sphere_point(s3, rng);
  FieldJacobian an = covariant_derivative(hopf, p, 0.01, DerivMode::Analytic);
  auto fd_err = [&](double h) {
    FieldJacobian fd = covariant_derivative(hopf, p, h, DerivMode::FiniteDifference);
    return (fd.matrix - an.matrix).cwiseAbs().maxCoeff();
  };
  const double e1 = fd_err(0.02), e2 = fd_err(0.01);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e2 < 1e-4);
}

TEST_CASE("differentiated unit-norm constraint: xi^T (nabla xi) -> 0 at O(h)") {
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  Rng rng(41);
  for (double h : {0.02, 0.01}) {
    for (int trial = 0; trial < 5; ++trial) {
      Point p = random_sphere_point(s3, rng);
      if (ped.distance_to_poles(p) < 0.3) continue;
      FieldJacobian J = covariant_derivative(ped, p, h, DerivMode::FiniteDifference);
      Vec xi_frame = J.frame.transpose() * ped.eval(p);
      CHECK((xi_frame.transpose() * J.matrix).norm() < 10.0 * h);
    }
  }
}

TEST_CASE("pole proximity guard") {
  Manifold s2 = Manifold::sphere(2, 1.0);
  Point p = Point::on_sphere(s2, Vec::Unit(3, 2));
  UnitField lf = longitude_field(s2, p);
  const double h = 0.05;
  Point near_pole = exp_map(s2, lf.poles[0], 1.5 * h * tangent_frame(s2, lf.poles[0]).col(0));
  CHECK_THROWS_AS(covariant_derivative(lf, near_pole, h), PoleError);
}

TEST_CASE("grid sampling and interpolation reproduce smooth fields") {
  Vec periods(3);
  periods << 1.0, 1.0, 1.0;
  Manifold t3 = Manifold::torus(periods);
  Vec d(3);
  d << 0.0, 0.0, 1.0;
  UnitField f = constant_field(t3, d);
  UnitField g = grid_sample(f, 1.0 / 8);
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    Vec u(3);
    u << rng.uniform(), rng.uniform(), rng.uniform();
    Point p = Point::on_torus(t3, u);
    CHECK((g.eval(p) - d).norm() < 1e-13);
  }

  Manifold s3 = Manifold::sphere(3, 1.0);
  UnitField hopf = hopf_field(s3);
  UnitField hg = grid_sample(hopf, 0.15);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Point p = random_sphere_point(s3, rng);
    worst = std::max(worst, (hg.eval(p) - hopf.eval(p)).norm());
    CHECK(std::abs(hg.eval(p).norm() - 1.0) < 1e-12);
  }
  CHECK(worst < 0.02);  // interpolation error at this spacing
}

TEST_CASE("perturb_field: identity at zero amplitude, unit norm, determinism") {
  Vec periods(3);
  periods << 1.0, 1.0, 1.0;
  Manifold t3 = Manifold::torus(periods);
  Vec d(3);
  d << 1.0, 0.0, 0.0;
  UnitField g = grid_sample(constant_field(t3, d), 1.0 / 8);

  UnitField zero = perturb_field(g, 0.0, 99);
  for (std::size_t k = 0; k < zero.grid->lattices[0].samples.size(); ++k)
    CHECK((zero.grid->lattices[0].samples[k] - g.grid->lattices[0].samples[k]).norm() == 0.0);

  UnitField a = perturb_field(g, 0.2, 7);
  UnitField b = perturb_field(g, 0.2, 7);
  double max_dev = 0.0;
  for (std::size_t k = 0; k < a.grid->lattices[0].samples.size(); ++k) {
    CHECK(std::abs(a.grid->lattices[0].samples[k].norm() - 1.0) < 1e-14);
    CHECK((a.grid->lattices[0].samples[k] - b.grid->lattices[0].samples[k]).norm() == 0.0);
    max_dev =
        std::max(max_dev, (a.grid->lattices[0].samples[k] - g.grid->lattices[0].samples[k]).norm());
  }
  CHECK(max_dev > 0.05);  // the perturbation actually moved something
  CHECK(max_dev < 0.45);

  UnitField c = perturb_field(g, 0.2, 8);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.grid->lattices[0].samples.size(); ++k)
    diff = std::max(diff, (a.grid->lattices[0].samples[k] - c.grid->lattices[0].samples[k]).norm());
  CHECK(diff > 1e-4);  // different seeds differ

  CHECK_THROWS_AS(perturb_field(constant_field(t3, d), 0.1, 1), ParameterError);
}

TEST_CASE("grid field JSON round trip") {
  Vec periods(2);
  periods << 1.0, 2.0;
  Manifold t2 = Manifold::torus(periods);
  Vec d(2);
  d << 1.0, 1.0;
  UnitField g = perturb_field(grid_sample(constant_field(t2, d), 0.125), 0.1, 42);
  Json j = grid_field_to_json(g);
  UnitField back = grid_field_from_json(j);
  REQUIRE(back.grid->lattices.size() == g.grid->lattices.size());
  for (std::size_t k = 0; k < g.grid->lattices[0].samples.size(); ++k)
    CHECK((back.grid->lattices[0].samples[k] - g.grid->lattices[0].samples[k]).norm() < 1e-15);

  // documented layout: flat row-major vector array
  CHECK(j.at("lattices").at(0).at("vectors").size() ==
        g.grid->lattices[0].samples.size() * 2);
}

TEST_CASE("isometry equivariance of the pedersen construction") {
  // A rotation commuting with the complex structure maps the Hopf vector at x
  // to the Hopf vector at Rx, so ped_{Rx}(Rq) = R ped_x(q).
  Manifold s3 = Manifold::sphere(3, 1.0);
  Point x = Point::on_sphere(s3, Vec::Unit(4, 0));
  UnitField ped = pedersen_field(s3, x);
  const double th = 0.7, ph = -0.4;
  Mat R = Mat::Zero(4, 4);
  R(0, 0) = std::cos(th);
  R(0, 1) = -std::sin(th);
  R(1, 0) = std::sin(th);
  R(1, 1) = std::cos(th);
  R(2, 2) = std::cos(ph);
  R(2, 3) = -std::sin(ph);
  R(3, 2) = std::sin(ph);
  R(3, 3) = std::cos(ph);
  UnitField ped_r = pedersen_field(s3, Point::on_sphere(s3, R * x.embedded));
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    Vec xi(4);
    for (int k = 0; k < 4; ++k) xi[k] = rng.gaussian();
    Point q = Point::on_sphere(s3, xi);
    if (ped.distance_to_poles(q) < 1e-2) continue;
    Point Rq = Point::on_sphere(s3, R * q.embedded);
    CHECK((ped_r.eval(Rq) - R * ped.eval(q)).norm() < 1e-10);
  }
}
