#pragma once

#include <filesystem>
#include <string>

#include "flowrecon/grid.hpp"
#include "flowrecon/sampling.hpp"

namespace flowrecon {

/// FRC1 snapshot container: a directory holding meta.json
/// (nx, ny, dx, dy, count, dtype="f64", layout="u-block,v-block,row-major",
/// endianness="little") and data.bin with count*2N little-endian doubles,
/// snapshot-major, each snapshot in flatten_state order.
void write_frc1(const std::filesystem::path& dir, const FlowSeries& series);
FlowSeries read_frc1(const std::filesystem::path& dir);

/// Sensor layout JSON: {"locations": [[i, j], ...]}.
void write_sensor_layout(const std::filesystem::path& file, const SensorLayout& layout);
SensorLayout read_sensor_layout(const std::filesystem::path& file);

/// Measurement CSV: header "i,j,u,v", one row per sensor in layout order.
void write_measurements_csv(const std::filesystem::path& file, const SensorLayout& layout,
                            const std::vector<double>& m);
std::pair<SensorLayout, std::vector<double>> read_measurements_csv(
    const std::filesystem::path& file);

/// Doubles formatted with enough digits to round-trip exactly; used by every
/// CSV writer so that identical runs produce byte-identical files.
std::string format_double(double value);

} // namespace flowrecon
