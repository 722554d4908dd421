#ifndef FLOWVOL_IO_HPP_
#define FLOWVOL_IO_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "flowvol/fields.hpp"
#include "flowvol/singularity.hpp"
#include "flowvol/volume.hpp"

// vendored single-header nlohmann/json lives at vendor/json.hpp
#include "json.hpp"

namespace flowvol {

using Json = nlohmann::json;

/// Locale-independent shortest round-trip formatting.
std::string format_double(double x);

/// FNV-1a over the canonical (sorted-key) dump; stable across runs.
std::uint64_t config_hash(const Json& config);

/// CSV with a leading provenance comment block. Timestamps never appear here;
/// they live in the sidecar log only.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void provenance(const std::vector<std::pair<std::string, std::string>>& kv);
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<double>& vals);
  void row_mixed(const std::vector<std::string>& vals);

 private:
  std::ostream& os_;
};

Json manifold_to_json(const Manifold& m);
Manifold manifold_from_json(const Json& j);

/// Grid fields: manifold descriptor, lattice spec, flat row-major array of
/// unit vectors in embedded coordinates, pole list.
Json grid_field_to_json(const UnitField& f);
UnitField grid_field_from_json(const Json& j);

Json volume_report_to_json(const VolumeReport& r);

Json slice_to_json(const SphereSliceMap& s);

}  // namespace flowvol

#endif  // FLOWVOL_IO_HPP_
