#include "flowvol/crofton.hpp"

#include <Eigen/QR>
#include <cmath>
#include <unordered_set>

namespace flowvol {

namespace {

/// Haar-distributed orthonormal rows: QR of a Gaussian matrix with the sign
/// convention fixed by the R diagonal.
Mat haar_frame(int rows, int cols, Rng& rng) {
  Mat G(cols, rows);  // tall; Q gives orthonormal columns = our rows
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j) G(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ() * Mat::Identity(cols, rows);
  Mat R = Q.transpose() * G;
  for (int j = 0; j < rows; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q.transpose();
}

struct Dsu {
  std::vector<std::int32_t> parent;
  explicit Dsu(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::int32_t>(i);
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  }
};

std::int64_t pack_cell(const std::vector<int>& c) {
  // 21 bits per axis, offset-binary; plenty for any raster here.
  std::int64_t key = 0;
  for (int v : c) key = (key << 21) | static_cast<std::int64_t>(v + (1 << 20));
  return key;
}

}  // namespace

SplitProjection sample_projection(int n, int k, int i, Rng& rng) {
  if (i < 0 || i > std::min(n, k)) throw ParameterError("sample_projection: bad order");
  SplitProjection p;
  p.order = i;
  p.p1 = haar_frame(n - i, n, rng);
  p.p2 = (i == 0) ? Mat(0, k) : haar_frame(i, k, rng);
  return p;
}

BetaEstimate beta_constant(int N, int n, int samples, Rng& rng) {
  if (n > N || n < 0) throw ParameterError("beta_constant: need 0 <= n <= N");
  BetaEstimate b;
  if (n == 0 || n == N) {
    b.value = 1.0;
    b.samples = samples;
    return b;
  }
  if (samples < 100) throw ParameterError("beta_constant: needs at least 100 samples");
  // ||p_* P|| for P = span(e_1..e_n) is |det| of the first n columns of p.
  KahanSum sum, sumsq;
  for (int s = 0; s < samples; ++s) {
    const Mat p = haar_frame(n, N, rng);
    const double v = std::abs(p.leftCols(n).determinant());
    sum.add(v);
    sumsq.add(v * v);
  }
  b.samples = samples;
  b.value = sum.value() / samples;
  const double var = std::max(0.0, sumsq.value() / samples - b.value * b.value);
  b.stderr_ = std::sqrt(var / samples);
  return b;
}

GraphPatch rasterize_graph(const ChartGraph& g, const Annulus& region, double h) {
  if (!(h > 0.0)) throw ParameterError("rasterize_graph: h must be > 0");
  GraphPatch patch;
  patch.n = g.n;
  patch.k = g.n;
  patch.h = h;
  patch.region = region;
  const int per_axis = static_cast<int>(std::ceil(2.0 * region.r1 / h)) + 1;
  patch.dims.assign(g.n, per_axis);
  std::int64_t total = 1;
  for (int d = 0; d < g.n; ++d) total *= per_axis;
  patch.ids.assign(total, -1);
  double max_grad = 0.0;
  for (std::int64_t lin = 0; lin < total; ++lin) {
    Vec x(g.n);
    std::int64_t rem = lin;
    for (int d = g.n - 1; d >= 0; --d) {
      x[d] = -region.r1 + static_cast<double>(rem % per_axis) * h;
      rem /= per_axis;
    }
    const double r = x.norm();
    if (r < region.r0 || r > region.r1) continue;
    bool near_pole = false;
    for (const Vec& p : g.poles) near_pole = near_pole || (x - p).norm() < 2.0 * h;
    if (near_pole) continue;
    patch.ids[lin] = static_cast<std::int32_t>(patch.xs.size());
    patch.xs.push_back(x);
    patch.us.push_back(g.eval(x));
  }
  // Lipschitz bound of x -> (x, u(x)) from sampled differences.
  std::vector<std::int64_t> stride(g.n, 1);
  for (int d = g.n - 2; d >= 0; --d) stride[d] = stride[d + 1] * per_axis;
  for (std::int64_t lin = 0; lin < total; ++lin) {
    if (patch.ids[lin] < 0) continue;
    for (int d = 0; d < g.n; ++d) {
      const std::int64_t pos = (lin / stride[d]) % per_axis;
      if (pos + 1 >= per_axis) continue;
      const std::int32_t nb = patch.ids[lin + stride[d]];
      if (nb < 0) continue;
      const double du = (patch.us[patch.ids[lin]] - patch.us[nb]).norm();
      max_grad = std::max(max_grad, du / h);
    }
  }
  patch.lipschitz = std::sqrt(1.0 + max_grad * max_grad);
  return patch;
}

MultiplicityField multiplicity_count(const GraphPatch& patch, const SplitProjection& proj,
                                     double cellsize) {
  if (cellsize < 2.0 * patch.lipschitz * patch.h)
    throw ResolutionError("multiplicity_count: cellsize below 2 * Lipschitz * h");
  const int n = patch.n;
  const int i = proj.order;
  const std::size_t ns = patch.size();
  // Target coordinates y = (p1 x, p2 u) and their integer cells.
  std::vector<std::int64_t> cell_of(ns);
  std::vector<int> cell_coords(ns * n);
  std::vector<std::int64_t> lin_of(ns);  // sample -> source lattice index
  std::vector<int> c(n);
  for (std::size_t s = 0; s < ns; ++s) {
    Vec y(n);
    y.head(n - i) = proj.p1 * patch.xs[s];
    if (i > 0) y.tail(i) = proj.p2 * patch.us[s];
    for (int d = 0; d < n; ++d) {
      c[d] = static_cast<int>(std::floor(y[d] / cellsize));
      cell_coords[s * n + d] = c[d];
    }
    cell_of[s] = pack_cell(c);
  }
  std::vector<std::int64_t> stride(n, 1);
  for (int d = n - 2; d >= 0; --d) stride[d] = stride[d + 1] * patch.dims[d + 1];
  for (std::int64_t lin = 0; lin < static_cast<std::int64_t>(patch.ids.size()); ++lin)
    if (patch.ids[lin] >= 0) lin_of[patch.ids[lin]] = lin;

  std::unordered_map<std::int64_t, std::vector<std::int32_t>> buckets;
  buckets.reserve(ns);
  for (std::size_t s = 0; s < ns; ++s) buckets[cell_of[s]].push_back(static_cast<std::int32_t>(s));

  // Per-cell local sheet count: flood source-adjacent samples whose cells lie
  // within one cell of the center (the halo bridges raster chatter along cell
  // boundaries without gluing branches through remote folds). A component
  // counts if it touches the center cell.
  MultiplicityField field;
  field.cellsize = cellsize;
  field.n = n;
  std::vector<std::uint32_t> stamp(ns, 0);
  std::uint32_t cur = 0;
  std::vector<std::int32_t> queue;
  for (const auto& [cell, members] : buckets) {
    ++cur;
    const int* cc = cell_coords.data() + members.front() * n;
    auto in_halo = [&](std::int32_t t) {
      for (int d = 0; d < n; ++d)
        if (std::abs(cell_coords[t * n + d] - cc[d]) > 1) return false;
      return true;
    };
    std::int32_t components = 0;
    for (std::int32_t m : members) {
      if (stamp[m] == cur) continue;
      ++components;
      queue.clear();
      queue.push_back(m);
      stamp[m] = cur;
      while (!queue.empty()) {
        const std::int32_t s = queue.back();
        queue.pop_back();
        const std::int64_t lin = lin_of[s];
        for (int d = 0; d < n; ++d) {
          const std::int64_t pos = (lin / stride[d]) % patch.dims[d];
          for (int sgn : {-1, +1}) {
            if ((sgn < 0 && pos == 0) || (sgn > 0 && pos + 1 >= patch.dims[d])) continue;
            const std::int32_t t = patch.ids[lin + sgn * stride[d]];
            if (t < 0 || stamp[t] == cur || !in_halo(t)) continue;
            stamp[t] = cur;
            queue.push_back(t);
          }
        }
      }
    }
    field.counts[cell] = components;
  }
  return field;
}

CroftonEstimate crofton_mass_estimate(const GraphPatch& patch, int i, int n_projections,
                                      double cellsize, Rng& rng, int beta_samples) {
  if (n_projections < 2) throw ParameterError("crofton_mass_estimate: need >= 2 projections");
  const int n = patch.n, k = patch.k;
  // Projections drawn sequentially so the parallel pass stays deterministic.
  std::vector<SplitProjection> projs;
  projs.reserve(n_projections);
  for (int p = 0; p < n_projections; ++p) projs.push_back(sample_projection(n, k, i, rng));
  Rng beta_rng = rng.fork(0xbe7a);
  const BetaEstimate b1 = beta_constant(n, n - i, (n - i == n || n - i == 0) ? 100 : beta_samples,
                                        beta_rng);
  const BetaEstimate b2 =
      beta_constant(k, i, (i == 0 || i == k) ? 100 : beta_samples, beta_rng);
  std::vector<double> integrals(n_projections, 0.0);
  parallel_for(n_projections, [&](std::int64_t p) {
    integrals[p] = multiplicity_count(patch, projs[p], cellsize).total_measure();
  });
  const MeanStderr ms = mean_stderr(integrals);
  CroftonEstimate est;
  est.projections = n_projections;
  est.beta_product = b1.value * b2.value;
  est.estimate = ms.mean / est.beta_product;
  est.stderr_ = ms.stderr_ / est.beta_product;
  return est;
}

}  // namespace flowvol
