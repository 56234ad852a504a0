#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "lsc/volume.hpp"

namespace lsc {

/// Parses a flat `key=value` text file. Blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

/// Assembles a volume from a directory of 2D raw slices.
///
/// The directory holds a sidecar `stack.txt` with keys `nx`, `ny`, `dtype`
/// (`u8`, `i16`, `u16` or `f32`, little-endian), `spacing_x`, `spacing_y`,
/// `spacing_z` and optional `origin_x`, `origin_y`, `origin_z`. Every `*.raw`
/// file is one slice of nx*ny values; slices are stacked along z in
/// filename-sorted order.
Volume import_raw_stack(const std::filesystem::path& dir);

}  // namespace lsc
