#pragma once

#include <iosfwd>
#include <string>

#include "ksflow/field.hpp"

namespace ksflow {

// Flat little-endian blob: magic "KFLD", version u32, mode u8, d u8, N u32,
// L f64, then f64 cell values in row-major order.
void write_field_blob(std::ostream& out, const GridSpec& grid, std::span<const double> values);
void write_field_blob(const std::string& path, const GridSpec& grid,
                      std::span<const double> values);

struct FieldBlob {
  GridSpec grid;
  std::vector<double> values;
};

FieldBlob read_field_blob(std::istream& in);
FieldBlob read_field_blob(const std::string& path);

// cell index, coordinates, value — one row per cell, for inspection.
void write_field_csv(std::ostream& out, const GridSpec& grid, std::span<const double> values);
void write_field_csv(const std::string& path, const GridSpec& grid,
                     std::span<const double> values);

// Shortest round-trippable decimal form of a double (deterministic output).
std::string format_double(double x);

}  // namespace ksflow
