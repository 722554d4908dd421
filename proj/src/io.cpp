#include "flowvol/io.hpp"

#include <charconv>

namespace flowvol {

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::uint64_t config_hash(const Json& config) {
  const std::string canon = config.dump(-1, ' ', false, nlohmann::detail::error_handler_t::replace);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void CsvWriter::provenance(const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) os_ << "# " << k << "=" << v << "\n";
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os_ << (i ? "," : "") << cols[i];
  os_ << "\n";
}

void CsvWriter::row(const std::vector<double>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) os_ << (i ? "," : "") << format_double(vals[i]);
  os_ << "\n";
}

void CsvWriter::row_mixed(const std::vector<std::string>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) os_ << (i ? "," : "") << vals[i];
  os_ << "\n";
}

Json manifold_to_json(const Manifold& m) {
  Json j;
  if (m.is_sphere()) {
    j["kind"] = "round-sphere";
    j["dim"] = m.dim;
    j["radius"] = m.radius;
  } else {
    j["kind"] = "flat-torus";
    j["periods"] = std::vector<double>(m.periods.data(), m.periods.data() + m.periods.size());
  }
  return j;
}

Manifold manifold_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "round-sphere")
    return Manifold::sphere(j.at("dim").get<int>(), j.value("radius", 1.0));
  if (kind == "flat-torus") {
    const auto p = j.at("periods").get<std::vector<double>>();
    Vec periods = Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
    return Manifold::torus(periods);
  }
  throw SchemaError("manifold.kind: expected 'round-sphere' or 'flat-torus'");
}

namespace {
std::string chart_name(Chart c) {
  switch (c) {
    case Chart::Fundamental: return "fundamental";
    case Chart::StereoNorth: return "stereo-north";
    case Chart::StereoSouth: return "stereo-south";
    default: throw ParameterError("chart_name: unsupported lattice chart");
  }
}
Chart chart_from_name(const std::string& s) {
  if (s == "fundamental") return Chart::Fundamental;
  if (s == "stereo-north") return Chart::StereoNorth;
  if (s == "stereo-south") return Chart::StereoSouth;
  throw SchemaError("lattice.chart: unknown chart '" + s + "'");
}
}  // namespace

Json grid_field_to_json(const UnitField& f) {
  if (f.mode != FieldMode::Grid || !f.grid)
    throw ParameterError("grid_field_to_json: grid fields only");
  const GridFieldData& data = *f.grid;
  Json j;
  j["manifold"] = manifold_to_json(data.manifold);
  j["lattices"] = Json::array();
  for (const GridLattice& lat : data.lattices) {
    Json jl;
    jl["chart"] = chart_name(lat.chart);
    jl["dims"] = lat.dims;
    jl["steps"] = lat.steps;
    jl["origin"] = std::vector<double>(lat.origin.data(), lat.origin.data() + lat.origin.size());
    jl["periodic"] = lat.periodic;
    std::vector<double> flat;
    flat.reserve(lat.samples.size() * data.manifold.ambient_dim());
    for (const Vec& v : lat.samples)
      for (int d = 0; d < v.size(); ++d) flat.push_back(v[d]);
    jl["vectors"] = std::move(flat);
    j["lattices"].push_back(std::move(jl));
  }
  j["poles"] = Json::array();
  for (const Point& p : data.poles)
    j["poles"].push_back(
        std::vector<double>(p.embedded.data(), p.embedded.data() + p.embedded.size()));
  return j;
}

UnitField grid_field_from_json(const Json& j) {
  auto data = std::make_shared<GridFieldData>();
  data->manifold = manifold_from_json(j.at("manifold"));
  const int amb = data->manifold.ambient_dim();
  for (const Json& jl : j.at("lattices")) {
    GridLattice lat;
    lat.chart = chart_from_name(jl.at("chart").get<std::string>());
    lat.dims = jl.at("dims").get<std::vector<int>>();
    lat.steps = jl.at("steps").get<std::vector<double>>();
    const auto o = jl.at("origin").get<std::vector<double>>();
    lat.origin = Eigen::Map<const Vec>(o.data(), static_cast<Eigen::Index>(o.size()));
    lat.periodic = jl.at("periodic").get<bool>();
    const auto flat = jl.at("vectors").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(lat.size()) * amb)
      throw SchemaError("lattices.vectors: wrong length for dims");
    lat.samples.resize(lat.size());
    for (std::int64_t k = 0; k < lat.size(); ++k) {
      Vec v = Eigen::Map<const Vec>(flat.data() + k * amb, amb);
      lat.samples[k] = v / v.norm();
    }
    data->lattices.push_back(std::move(lat));
  }
  if (j.contains("poles"))
    for (const Json& jp : j.at("poles")) {
      const auto x = jp.get<std::vector<double>>();
      Vec v = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
      data->poles.push_back(data->manifold.is_sphere() ? Point::on_sphere(data->manifold, v)
                                                       : Point::on_torus(data->manifold, v));
    }
  UnitField f;
  f.manifold = data->manifold;
  f.mode = FieldMode::Grid;
  f.poles = data->poles;
  f.grid = data;
  f.eval = [data](const Point& p) -> Vec { return data->eval(p); };
  return f;
}

Json volume_report_to_json(const VolumeReport& r) {
  Json j;
  j["total"] = r.total;
  j["per_order"] = r.per_order;
  j["h"] = r.h;
  j["region"] = r.region;
  return j;
}

Json slice_to_json(const SphereSliceMap& s) {
  Json j;
  j["m"] = s.m;
  j["radius"] = s.radius;
  j["shape"] = s.grid.shape;
  std::vector<double> pts, vals;
  for (const Vec& p : s.grid.points)
    for (int d = 0; d < p.size(); ++d) pts.push_back(p[d]);
  for (const Vec& v : s.samples)
    for (int d = 0; d < v.size(); ++d) vals.push_back(v[d]);
  j["points"] = std::move(pts);
  j["values"] = std::move(vals);
  return j;
}

}  // namespace flowvol
