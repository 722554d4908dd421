#include "flowvol/minimize.hpp"

#include <cmath>
#include <unordered_map>

namespace flowvol {

namespace {

/// Quadrature nodes aligned with the sample lattices. Torus nodes carry the
/// cell measure; sphere chart nodes carry PoU * conformal weights.
struct NodeSet {
  std::vector<Point> points;
  std::vector<double> weights;
  std::vector<double> integrand;  // cached per node
  double fd = 0.0;
};

double pou_north_weight(double height_over_a) {
  return smoothstep((height_over_a + 0.45) / 0.9);
}

NodeSet build_nodes(const GridFieldData& data) {
  NodeSet ns;
  const Manifold& m = data.manifold;
  ns.fd = data.spacing();
  for (std::size_t l = 0; l < data.lattices.size(); ++l) {
    const GridLattice& lat = data.lattices[l];
    for (std::int64_t k = 0; k < lat.size(); ++k) {
      const Point p = data.node_point(static_cast<int>(l), k);
      double w;
      if (m.is_sphere()) {
        const double a = m.radius;
        const double height = p.embedded[m.dim] / a;
        const double wn = pou_north_weight(height);
        const double pou = (lat.chart == Chart::StereoNorth) ? wn : 1.0 - wn;
        if (pou < 1e-14 || p.coords.norm() > std::sqrt((1.0 + 0.45) / (1.0 - 0.45)) * 1.02 * a)
          continue;
        const double lam = 2.0 * a * a / (p.coords.squaredNorm() + a * a);
        w = pou * std::pow(lam, m.dim);
        for (double s : lat.steps) w *= s;
      } else {
        w = 1.0;
        for (double s : lat.steps) w *= s;
      }
      ns.points.push_back(p);
      ns.weights.push_back(w);
    }
  }
  ns.integrand.assign(ns.points.size(), 0.0);
  return ns;
}

double node_integrand(const UnitField& f, const Point& p, double fd) {
  const FieldJacobian J = covariant_derivative(f, p, fd, DerivMode::FiniteDifference);
  double s = 1.0;
  for (int k = 1; k <= f.manifold.dim - 1; ++k) s += wedge_norm_sq(J.matrix, k);
  return std::sqrt(s);
}

/// Sample -> dependent node indices, by a conservative ambient-distance bound
/// on the FD stencil plus interpolation support.
struct DependencyMap {
  std::vector<std::vector<std::vector<std::int32_t>>> deps;  // [lattice][sample] -> nodes
};

DependencyMap build_dependencies(const GridFieldData& data, const NodeSet& ns) {
  const Manifold& m = data.manifold;
  const int amb = m.ambient_dim();
  DependencyMap dm;
  dm.deps.resize(data.lattices.size());

  if (m.kind == ManifoldKind::FlatTorus) {
    // Exact sparsity: node p sees sample k iff some FD stencil point of p
    // interpolates through k's cell, i.e. |p_d - x_{k,d}| < step_d + h on
    // every axis (wrap-aware).
    const GridLattice& lat = data.lattices[0];
    const int n = m.dim;
    dm.deps[0].resize(lat.size());
    // nodes are the same lattice layout; locate by index arithmetic
    std::vector<std::int64_t> stride(n, 1);
    for (int d = n - 2; d >= 0; --d) stride[d] = stride[d + 1] * lat.dims[d + 1];
    for (std::int64_t k = 0; k < lat.size(); ++k) {
      const Point sp = data.node_point(0, k);
      auto& out = dm.deps[0][k];
      // window of lattice offsets per axis: the stencil shifts one step, the
      // interpolation cell one more
      std::vector<std::vector<int>> windows(n);
      for (int d = 0; d < n; ++d) {
        const int w = static_cast<int>(std::ceil((ns.fd - 1e-12) / lat.steps[d]));
        for (int o = -w; o <= w; ++o) windows[d].push_back(o);
      }
      std::vector<int> ix(n);
      std::int64_t rem = k;
      for (int d = n - 1; d >= 0; --d) {
        ix[d] = static_cast<int>(rem % lat.dims[d]);
        rem /= lat.dims[d];
      }
      std::vector<std::size_t> cursor(n, 0);
      for (;;) {
        std::int64_t node = 0;
        for (int d = 0; d < n; ++d) {
          int j = (ix[d] + windows[d][cursor[d]] + lat.dims[d]) % lat.dims[d];
          node = node * lat.dims[d] + j;
        }
        out.push_back(static_cast<std::int32_t>(node));
        int d = n - 1;
        while (d >= 0 && ++cursor[d] == windows[d].size()) cursor[d--] = 0;
        if (d < 0) break;
      }
      (void)sp;
    }
    return dm;
  }

  // Spheres: conservative ambient-ball reach covering the FD stencil plus the
  // interpolation cell under the worst stereographic stretch.
  double cell = 0.0;
  for (const auto& lat : data.lattices)
    for (double s : lat.steps) cell = std::max(cell, s);
  const double reach = ns.fd + 2.2 * cell * std::sqrt(static_cast<double>(m.dim)) + 1e-9;
  const double hcell = reach;
  std::unordered_map<std::int64_t, std::vector<std::int32_t>> cells;
  auto cell_coords = [&](const Vec& x, std::vector<std::int64_t>& c) {
    c.resize(amb);
    for (int d = 0; d < amb; ++d) c[d] = static_cast<std::int64_t>(std::floor(x[d] / hcell));
  };
  auto pack = [&](const std::vector<std::int64_t>& c) {
    std::int64_t key = 0;
    for (std::int64_t v : c) key = key * 0x1f1f1f1f1ll + (v + (1ll << 20));
    return key;
  };
  std::vector<std::int64_t> cbuf;
  for (std::size_t i = 0; i < ns.points.size(); ++i) {
    cell_coords(ns.points[i].embedded, cbuf);
    cells[pack(cbuf)].push_back(static_cast<std::int32_t>(i));
  }
  const std::int64_t nbhd = static_cast<std::int64_t>(std::pow(3.0, amb));
  for (std::size_t l = 0; l < data.lattices.size(); ++l) {
    const GridLattice& lat = data.lattices[l];
    dm.deps[l].resize(lat.size());
    for (std::int64_t k = 0; k < lat.size(); ++k) {
      const Point p = data.node_point(static_cast<int>(l), k);
      cell_coords(p.embedded, cbuf);
      auto& out = dm.deps[l][k];
      for (std::int64_t nb = 0; nb < nbhd; ++nb) {
        std::vector<std::int64_t> cc = cbuf;
        std::int64_t rem = nb;
        for (int d = 0; d < amb; ++d) {
          cc[d] += (rem % 3) - 1;
          rem /= 3;
        }
        auto it = cells.find(pack(cc));
        if (it == cells.end()) continue;
        for (std::int32_t node : it->second)
          if ((ns.points[node].embedded - p.embedded).norm() <= reach) out.push_back(node);
      }
    }
  }
  return dm;
}

Mat fiber_tangent_basis(const Manifold& m, const Point& p, const Vec& xi) {
  const int amb = m.ambient_dim();
  const int nb = m.dim - 1;
  std::vector<Vec> constraints;
  constraints.push_back(xi / xi.norm());
  if (m.is_sphere()) constraints.push_back(p.embedded / m.radius);
  Mat basis(amb, nb);
  int col = 0;
  for (int i = 0; i < amb && col < nb; ++i) {
    Vec e = Vec::Zero(amb);
    e[i] = 1.0;
    for (const Vec& c : constraints) e -= e.dot(c) * c;
    for (int j = 0; j < col; ++j) e -= e.dot(basis.col(j)) * basis.col(j);
    const double nrm = e.norm();
    if (nrm < 1e-6) continue;
    basis.col(col++) = e / nrm;
  }
  if (col != nb) throw DomainError("fiber_tangent_basis: degenerate completion");
  return basis;
}

struct Workspace {
  std::shared_ptr<GridFieldData> data;
  UnitField field;
  NodeSet nodes;

  explicit Workspace(const GridFieldData& src) : data(std::make_shared<GridFieldData>(src)) {
    field.manifold = data->manifold;
    field.mode = FieldMode::Grid;
    field.grid = data;
    field.eval = [d = data](const Point& p) -> Vec { return d->eval(p); };
    nodes = build_nodes(*data);
  }

  void refresh_all() {
    for (std::size_t i = 0; i < nodes.points.size(); ++i)
      nodes.integrand[i] = node_integrand(field, nodes.points[i], nodes.fd);
  }

  double total() const {
    KahanSum s;
    for (std::size_t i = 0; i < nodes.points.size(); ++i)
      s.add(nodes.weights[i] * nodes.integrand[i]);
    return s.value();
  }
};

}  // namespace

double TangentPerturbation::l2_norm() const {
  double s = 0.0;
  for (const auto& lat : vectors)
    for (const Vec& v : lat) s += v.squaredNorm();
  return std::sqrt(s);
}

double TangentPerturbation::dot(const TangentPerturbation& other) const {
  double s = 0.0;
  for (std::size_t l = 0; l < vectors.size(); ++l)
    for (std::size_t k = 0; k < vectors[l].size(); ++k) s += vectors[l][k].dot(other.vectors[l][k]);
  return s;
}

double discrete_volume(const UnitField& f) {
  if (f.mode != FieldMode::Grid || !f.grid) throw ParameterError("discrete_volume: grid fields only");
  Workspace ws(*f.grid);
  ws.refresh_all();
  return ws.total();
}

TangentPerturbation volume_gradient(const UnitField& f, double eps) {
  if (f.mode != FieldMode::Grid || !f.grid) throw ParameterError("volume_gradient: grid fields only");
  const GridFieldData& data = *f.grid;
  TangentPerturbation grad;
  grad.vectors.resize(data.lattices.size());
  for (std::size_t l = 0; l < data.lattices.size(); ++l)
    grad.vectors[l].assign(data.lattices[l].size(),
                           Vec::Zero(data.manifold.ambient_dim()));

  // Flattened sample list; static partition over worker-local clones keeps
  // results independent of scheduling.
  std::vector<std::pair<int, std::int64_t>> samples;
  for (std::size_t l = 0; l < data.lattices.size(); ++l)
    for (std::int64_t k = 0; k < data.lattices[l].size(); ++k)
      samples.emplace_back(static_cast<int>(l), k);

  Workspace base(data);
  base.refresh_all();
  const DependencyMap dm = build_dependencies(data, base.nodes);

  const int workers = std::max(1, std::min<int>(max_threads(), 8));
  std::vector<std::thread> pool;
  const std::size_t per = (samples.size() + workers - 1) / workers;
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    Workspace ws(data);
    ws.nodes.integrand = base.nodes.integrand;
    for (std::size_t s = lo; s < hi; ++s) {
      const auto [l, k] = samples[s];
      const auto& dep = dm.deps[l][k];
      if (dep.empty()) continue;
      const Point sp = ws.data->node_point(l, k);
      const Vec orig = ws.data->lattices[l].samples[k];
      const Mat basis = fiber_tangent_basis(data.manifold, sp, orig);
      Vec g = Vec::Zero(data.manifold.ambient_dim());
      for (int b = 0; b < basis.cols(); ++b) {
        double diff = 0.0;
        for (int sgn : {+1, -1}) {
          Vec moved = orig + sgn * eps * basis.col(b);
          ws.data->lattices[l].samples[k] = moved / moved.norm();
          KahanSum part;
          for (std::int32_t node : dep)
            part.add(ws.nodes.weights[node] *
                     node_integrand(ws.field, ws.nodes.points[node], ws.nodes.fd));
          diff += sgn * part.value();
        }
        ws.data->lattices[l].samples[k] = orig;
        g += (diff / (2.0 * eps)) * basis.col(b);
      }
      grad.vectors[l][k] = g;
    }
  };
  if (workers == 1 || samples.size() < 64) {
    run_range(0, samples.size());
  } else {
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(samples.size(), w * per);
      const std::size_t hi = std::min(samples.size(), lo + per);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return grad;
}

UnitField apply_perturbation(const UnitField& f, const TangentPerturbation& dir, double scale) {
  if (f.mode != FieldMode::Grid || !f.grid) throw ParameterError("apply_perturbation: grid fields only");
  auto data = std::make_shared<GridFieldData>(*f.grid);
  for (std::size_t l = 0; l < data->lattices.size(); ++l)
    for (std::int64_t k = 0; k < data->lattices[l].size(); ++k) {
      Vec s = data->lattices[l].samples[k] + scale * dir.vectors[l][k];
      data->lattices[l].samples[k] = s / s.norm();
    }
  UnitField out;
  out.manifold = f.manifold;
  out.mode = FieldMode::Grid;
  out.poles = f.poles;
  out.grid = data;
  out.eval = [data](const Point& p) -> Vec { return data->eval(p); };
  return out;
}

DescentState make_descent_state(const UnitField& grid_field) {
  if (grid_field.mode != FieldMode::Grid || !grid_field.grid)
    throw ParameterError("make_descent_state: grid fields only");
  if (!grid_field.poles.empty())
    throw ParameterError("descend: pole-bearing fields are out of scope");
  DescentState st;
  st.field = grid_field;
  st.volume_history.push_back(discrete_volume(grid_field));
  return st;
}

DescentState descend(DescentState state, int max_iterations, double tolerance) {
  double value = state.volume_history.empty() ? discrete_volume(state.field)
                                              : state.volume_history.back();
  if (state.volume_history.empty()) state.volume_history.push_back(value);
  constexpr double kArmijo = 1e-4;
  for (int it = 0; it < max_iterations; ++it) {
    TangentPerturbation g = volume_gradient(state.field);
    const double gnorm = g.l2_norm();
    state.gradient_norm = gnorm;
    if (gnorm < tolerance) {
      state.converged = true;
      return state;
    }
    int failures = 0;
    bool accepted = false;
    double alpha = state.step;
    while (failures < 50) {
      UnitField trial = apply_perturbation(state.field, g, -alpha);
      const double trial_value = discrete_volume(trial);
      if (trial_value <= value - kArmijo * alpha * gnorm * gnorm) {
        state.field = std::move(trial);
        value = trial_value;
        state.volume_history.push_back(value);
        state.step = std::min(alpha * 1.5, 1e3);
        accepted = true;
        break;
      }
      alpha *= 0.5;
      ++failures;
    }
    ++state.iterations;
    if (!accepted) {
      state.stalled = true;  // stall report
      return state;
    }
  }
  return state;
}

}  // namespace flowvol
