#ifndef FLOWVOL_FIELDS_HPP_
#define FLOWVOL_FIELDS_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "flowvol/geometry.hpp"

namespace flowvol {

enum class FieldMode { Analytic, Grid };
enum class DerivMode { Auto, FiniteDifference, Analytic };

/// Lattice of unit-vector samples backing a grid-mode field. Tori use one
/// periodic lattice over the fundamental cell; spheres use one lattice per
/// stereographic chart.
struct GridLattice {
  Chart chart = Chart::Fundamental;
  std::vector<int> dims;
  std::vector<double> steps;
  Vec origin;                // coordinates of node (0,...,0)
  bool periodic = false;
  std::vector<Vec> samples;  // ambient components, row-major over dims

  std::size_t index(const std::vector<int>& ix) const;
  std::int64_t size() const;
};

struct GridFieldData {
  Manifold manifold;
  std::vector<GridLattice> lattices;
  std::vector<Point> poles;
  double spacing() const { return lattices.front().steps.front(); }

  Point node_point(int lattice, std::int64_t linear) const;
  Vec eval(const Point& p) const;  // multilinear + tangent projection + renormalize
};

/// A section of the unit tangent bundle: evaluator plus pole bookkeeping.
/// Evaluators return ambient components (sphere: orthogonal to the position).
struct UnitField {
  Manifold manifold;
  FieldMode mode = FieldMode::Analytic;
  std::function<Vec(const Point&)> eval;
  // Optional closed-form covariant derivative: matrix of nabla xi in the given
  // orthonormal tangent frame (columns of `frame`).
  std::function<Mat(const Point&, const Mat& frame)> analytic_jacobian;
  std::vector<Point> poles;
  std::shared_ptr<const GridFieldData> grid;

  bool has_analytic_jacobian() const { return static_cast<bool>(analytic_jacobian); }
  double distance_to_poles(const Point& p) const;
};

/// Covariant derivative of xi at p in an orthonormal tangent frame:
/// J(j,i) = <E_j, nabla_{E_i} xi>. Finite differences transport samples back
/// to p before differencing, so the matrix is frame-covariant.
struct FieldJacobian {
  Point base;
  Mat frame;   // ambient columns E_1..E_n
  Mat matrix;  // n x n
};

FieldJacobian covariant_derivative(const UnitField& f, const Point& p, double h,
                                   DerivMode mode = DerivMode::Auto);

/// xi(x) = J x / a with J the standard complex structure pairing coordinates
/// (1,2),(3,4),...; smooth, no poles. Odd-dimensional spheres only.
UnitField hopf_field(const Manifold& m);

/// Parallel translation of the Hopf vector at `basepoint` along meridians;
/// single pole at the antipode.
UnitField pedersen_field(const Manifold& m, const Point& basepoint);

/// S^2 version of the meridian-translation construction with an arbitrary
/// initial vector; pole of degree 2 at the antipode.
UnitField longitude_field(const Manifold& m, const Point& basepoint);

/// Constant field on a flat torus.
UnitField constant_field(const Manifold& m, const Vec& direction);

/// Sample an analytic field onto a grid-mode field at lattice spacing h.
UnitField grid_sample(const UnitField& f, double h);

/// Seeded smooth tangent noise, then fiberwise renormalization. Deterministic
/// per seed; amplitude >= 1 emits a warning (renormalization may flip vectors).
UnitField perturb_field(const UnitField& f, double amplitude, std::uint64_t seed);

}  // namespace flowvol

#endif  // FLOWVOL_FIELDS_HPP_
