#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msrom/errors.hpp"
#include "msrom/grid.hpp"

namespace msrom {

/// Strictly positive cell-wise constant coefficient on a nx x ny cell grid.
class PermeabilityField {
 public:
  PermeabilityField(int nx, int ny, std::vector<double> values);
  static PermeabilityField constant(int nx, int ny, double value);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double min() const { return min_; }
  double max() const { return max_; }
  double operator[](int cell) const { return values_[cell]; }
  double at(int ci, int cj) const { return values_[cj * nx_ + ci]; }
  const std::vector<double>& values() const { return values_; }

 private:
  int nx_, ny_;
  std::vector<double> values_;  // row-major by cell
  double min_, max_;
};

/// One record of the raster container: a W x H grid of doubles. Values are
/// not required to be positive here; PermeabilityField construction checks.
struct RasterRecord {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major
};

/// Raster container: per record a text header "msrom-field v1 <W> <H>\n"
/// followed by W*H little-endian 64-bit floats, row-major.
void write_raster_records(const std::string& path,
                          const std::vector<RasterRecord>& records);
std::vector<RasterRecord> read_raster_records(const std::string& path);

void write_field(const std::string& path, const PermeabilityField& field);

/// Reads a field from the binary raster container or, failing the magic
/// check, from CSV (ny rows of nx comma-separated positive decimals).
/// Dimensions must match the mesh's fine grid.
PermeabilityField ingest_raster(const std::string& path, const TwoScaleMesh& mesh);

/// Background-1 field with randomly placed channels and square inclusions of
/// value `contrast`, so max/min == contrast exactly.
PermeabilityField synth_high_contrast(const TwoScaleMesh& mesh, double contrast,
                                      std::uint64_t pattern_seed);

}  // namespace msrom
