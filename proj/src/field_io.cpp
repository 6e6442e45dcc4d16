#include "ksflow/field_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace ksflow {

static_assert(std::endian::native == std::endian::little,
              "field blob I/O assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'K', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("field blob: truncated stream");
  return v;
}
}  // namespace

void write_field_blob(std::ostream& out, const GridSpec& grid, std::span<const double> values) {
  if (values.size() != grid.cell_count())
    throw std::invalid_argument("write_field_blob: value count does not match grid");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(grid.mode));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(grid.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.points));
  put<double>(out, grid.half_width);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_field_blob: write failed");
}

void write_field_blob(const std::string& path, const GridSpec& grid,
                      std::span<const double> values) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_field_blob: cannot open " + path);
  write_field_blob(f, grid, values);
}

FieldBlob read_field_blob(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("field blob: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("field blob: unsupported version " + std::to_string(version));
  FieldBlob blob;
  blob.grid.mode = static_cast<GridMode>(get<std::uint8_t>(in));
  blob.grid.dim = get<std::uint8_t>(in);
  blob.grid.points = static_cast<int>(get<std::uint32_t>(in));
  blob.grid.half_width = get<double>(in);
  blob.grid.validate();
  blob.values.resize(blob.grid.cell_count());
  in.read(reinterpret_cast<char*>(blob.values.data()),
          static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("field blob: truncated payload");
  return blob;
}

FieldBlob read_field_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_field_blob: cannot open " + path);
  return read_field_blob(f);
}

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_field_csv(std::ostream& out, const GridSpec& grid, std::span<const double> values) {
  if (values.size() != grid.cell_count())
    throw std::invalid_argument("write_field_csv: value count does not match grid");
  out << "index,x0,x1,x2,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto x = grid.cell_center(i);
    out << i << ',' << format_double(x[0]) << ',' << format_double(x[1]) << ','
        << format_double(x[2]) << ',' << format_double(values[i]) << '\n';
  }
}

void write_field_csv(const std::string& path, const GridSpec& grid,
                     std::span<const double> values) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_field_csv: cannot open " + path);
  write_field_csv(f, grid, values);
}

}  // namespace ksflow
