#include "msrom/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "msrom/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster container assumes a little-endian host");

namespace msrom {

PermeabilityField::PermeabilityField(int nx, int ny, std::vector<double> values)
    : nx_(nx), ny_(ny), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != nx_ * ny_)
    throw ConfigError("field: expected " + std::to_string(nx_ * ny_) +
                      " cell values, got " + std::to_string(values_.size()));
  min_ = values_[0];
  max_ = values_[0];
  for (double v : values_) {
    if (!(v > 0.0))
      throw ConfigError("field: nonpositive value " + std::to_string(v));
    min_ = std::min(min_, v);
    max_ = std::max(max_, v);
  }
}

PermeabilityField PermeabilityField::constant(int nx, int ny, double value) {
  return PermeabilityField(nx, ny, std::vector<double>(static_cast<std::size_t>(nx) * ny, value));
}

namespace {
constexpr const char* kMagic = "msrom-field";
constexpr const char* kVersion = "v1";
}  // namespace

void write_raster_records(const std::string& path,
                          const std::vector<RasterRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& rec : records) {
    out << kMagic << ' ' << kVersion << ' ' << rec.width << ' ' << rec.height << '\n';
    out.write(reinterpret_cast<const char*>(rec.values.data()),
              static_cast<std::streamsize>(rec.values.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<RasterRecord> read_raster_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<RasterRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream hdr(line);
    std::string magic, version;
    RasterRecord rec;
    hdr >> magic >> version >> rec.width >> rec.height;
    if (!hdr || magic != kMagic)
      throw IoError(path + ": bad raster header '" + line + "'");
    if (version != kVersion)
      throw IoError(path + ": unsupported raster version " + version);
    if (rec.width <= 0 || rec.height <= 0)
      throw IoError(path + ": bad raster dimensions");
    rec.values.resize(static_cast<std::size_t>(rec.width) * rec.height);
    in.read(reinterpret_cast<char*>(rec.values.data()),
            static_cast<std::streamsize>(rec.values.size() * sizeof(double)));
    if (!in) throw IoError(path + ": truncated raster payload");
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw IoError(path + ": no raster records");
  return records;
}

void write_field(const std::string& path, const PermeabilityField& field) {
  write_raster_records(path, {RasterRecord{field.nx(), field.ny(), field.values()}});
}

namespace {

PermeabilityField ingest_csv(const std::string& path, const TwoScaleMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(mesh.num_cells()));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    int cols = 0;
    while (std::getline(ls, tok, ',')) {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(tok, &pos);
      } catch (const std::exception&) {
        throw IoError(path + ": non-numeric CSV entry '" + tok + "'");
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != mesh.nx())
      throw IoError(path + ": CSV row " + std::to_string(rows) + " has " +
                    std::to_string(cols) + " entries, expected " +
                    std::to_string(mesh.nx()));
    ++rows;
  }
  if (rows != mesh.ny())
    throw IoError(path + ": CSV has " + std::to_string(rows) +
                  " rows, expected " + std::to_string(mesh.ny()));
  return PermeabilityField(mesh.nx(), mesh.ny(), std::move(values));
}

}  // namespace

PermeabilityField ingest_raster(const std::string& path, const TwoScaleMesh& mesh) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    std::string head(std::strlen(kMagic), '\0');
    probe.read(head.data(), static_cast<std::streamsize>(head.size()));
    if (!(probe && head == kMagic)) return ingest_csv(path, mesh);
  }
  const auto records = read_raster_records(path);
  if (records.size() != 1)
    throw IoError(path + ": expected a single-record field file, found " +
                  std::to_string(records.size()) + " records");
  const auto& rec = records.front();
  if (rec.width != mesh.nx() || rec.height != mesh.ny())
    throw ConfigError(path + ": raster is " + std::to_string(rec.width) + "x" +
                      std::to_string(rec.height) + " but fine grid is " +
                      std::to_string(mesh.nx()) + "x" + std::to_string(mesh.ny()));
  return PermeabilityField(mesh.nx(), mesh.ny(), rec.values);
}

PermeabilityField synth_high_contrast(const TwoScaleMesh& mesh, double contrast,
                                      std::uint64_t pattern_seed) {
  if (!(contrast >= 1.0))
    throw ConfigError("synthetic field: contrast must be >= 1");
  const int nx = mesh.nx(), ny = mesh.ny();
  std::vector<double> values(static_cast<std::size_t>(nx) * ny, 1.0);
  std::mt19937_64 gen(derive_seed(pattern_seed, 0xf1e1dULL));
  auto randint = [&](int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  // Horizontal channels of 1-2 cell thickness with gaps, plus a few square
  // inclusions; mirrors the channelized high-contrast media used as test
  // coefficients.
  const int nchannels = std::max(2, ny / 12);
  for (int c = 0; c < nchannels; ++c) {
    const int row = randint(1, ny - 2);
    const int thick = randint(1, 2);
    const int start = randint(0, nx / 3);
    const int stop = randint(2 * nx / 3, nx - 1);
    for (int t = 0; t < thick; ++t) {
      const int cj = std::min(row + t, ny - 1);
      for (int ci = start; ci <= stop; ++ci) values[cj * nx + ci] = contrast;
    }
  }
  const int nblocks = std::max(2, (nx * ny) / 400);
  for (int b = 0; b < nblocks; ++b) {
    const int size = randint(1, std::max(1, std::min(nx, ny) / 10));
    const int ci0 = randint(0, nx - size);
    const int cj0 = randint(0, ny - size);
    for (int cj = cj0; cj < cj0 + size; ++cj)
      for (int ci = ci0; ci < ci0 + size; ++ci) values[cj * nx + ci] = contrast;
  }
  // Both phases must be present for the max/min ratio contract.
  values[0] = 1.0;
  values[static_cast<std::size_t>(nx) * ny - 1] = contrast;
  return PermeabilityField(nx, ny, std::move(values));
}

}  // namespace msrom
