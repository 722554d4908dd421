#ifndef FLOWVOL_MINIMIZE_HPP_
#define FLOWVOL_MINIMIZE_HPP_

#include "flowvol/volume.hpp"

namespace flowvol {

/// One tangent vector per grid sample (ambient components, tangent to the
/// unit fiber at the sample).
struct TangentPerturbation {
  std::vector<std::vector<Vec>> vectors;  // [lattice][sample]

  double l2_norm() const;
  double dot(const TangentPerturbation& other) const;
};

/// Discrete volume of a grid-mode field: lattice quadrature of the volume
/// integrand with transported central differences at the lattice spacing.
double discrete_volume(const UnitField& f);

/// Finite-difference gradient of the discrete volume with respect to each
/// sample, projected onto the fiber tangent at that sample.
TangentPerturbation volume_gradient(const UnitField& f, double eps = 1e-4);

/// Move every sample along the perturbation and renormalize fiberwise.
UnitField apply_perturbation(const UnitField& f, const TangentPerturbation& dir, double scale);

struct DescentState {
  UnitField field;  // grid mode
  double step = 1.0;
  int iterations = 0;
  std::vector<double> volume_history;
  double gradient_norm = 0.0;
  bool stalled = false;
  bool converged = false;
};

DescentState make_descent_state(const UnitField& grid_field);

/// Projected gradient descent with Armijo backtracking; every accepted step
/// strictly decreases the discrete volume, every iterate is renormalized.
/// 50 consecutive line-search failures produce a stall report (state.stalled).
DescentState descend(DescentState state, int max_iterations, double tolerance);

}  // namespace flowvol

#endif  // FLOWVOL_MINIMIZE_HPP_
