#ifndef FLOWVOL_CROFTON_HPP_
#define FLOWVOL_CROFTON_HPP_

#include <unordered_map>

#include "flowvol/volume.hpp"

namespace flowvol {

/// A split orthogonal projection p = p1 x p2 from R^n x R^k preserving i
/// vertical directions: p1 : R^n -> R^{n-i}, p2 : R^k -> R^i, rows orthonormal.
struct SplitProjection {
  Mat p1;
  Mat p2;
  int order = 0;  // i
};

/// Uniform (rotation-invariant) draw via QR of Gaussian matrices.
SplitProjection sample_projection(int n, int k, int i, Rng& rng);

struct BetaEstimate {
  double value = 1.0;
  double stderr_ = 0.0;
  int samples = 0;
};

/// beta(N, n) = E || p_* P || over uniform orthogonal projections
/// p : R^N -> R^n, P a fixed reference n-plane (plane-independent by
/// invariance). Exact special cases: beta(N, 0) = 1, beta(N, N) = 1.
BetaEstimate beta_constant(int N, int n, int samples, Rng& rng);

/// Rasterized samples of a chart graph over a centered annulus: the raw
/// material for multiplicity counting. Samples sit on an axis-aligned source
/// lattice of spacing h, restricted to the annulus and away from poles.
struct GraphPatch {
  int n = 2;
  int k = 2;
  double h = 0.0;
  Annulus region;
  std::vector<int> dims;            // source lattice shape
  std::vector<std::int32_t> ids;    // lattice linear index -> sample id (-1 outside)
  std::vector<Vec> xs;              // base positions
  std::vector<Vec> us;              // fiber values
  double lipschitz = 1.0;           // sup sqrt(1 + ||Du||^2), estimated

  std::size_t size() const { return xs.size(); }
};

GraphPatch rasterize_graph(const ChartGraph& g, const Annulus& region, double h);

/// Integer multiplicity counts of the projected graph on a target lattice.
struct MultiplicityField {
  double cellsize = 0.0;
  int n = 2;
  std::unordered_map<std::int64_t, std::int32_t> counts;  // packed cell -> sheet count

  double total_measure() const {
    double c = 0.0;
    for (const auto& kv : counts) c += kv.second;
    return c * std::pow(cellsize, n);
  }
};

/// Sheet counting: for every target cell, the number of connected source
/// patches (theta = 1) projecting into it. Requires
/// cellsize >= 2 * lipschitz * h so patches stay raster-connected.
MultiplicityField multiplicity_count(const GraphPatch& patch, const SplitProjection& proj,
                                     double cellsize);

struct CroftonEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double beta_product = 1.0;
  int projections = 0;
};

/// Monte-Carlo Crofton estimate of the order-i component mass of the graph:
/// mean over projections of int N(p|T, y) dy divided by beta(n, n-i) beta(k, i).
CroftonEstimate crofton_mass_estimate(const GraphPatch& patch, int i, int n_projections,
                                      double cellsize, Rng& rng, int beta_samples = 200000);

}  // namespace flowvol

#endif  // FLOWVOL_CROFTON_HPP_
