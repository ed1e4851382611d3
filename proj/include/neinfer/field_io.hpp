#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace neinfer {

/// Per-cell scalar field as stored on disk:
///
///     # field <name> <nx> <ny> <nz>
///     <value>          (nx*ny*nz lines, row-major, x fastest)
///
/// Blank lines after the header are ignored.
struct CellField {
    std::string name;
    std::array<int, 3> dims{1, 1, 1};
    std::vector<double> values;
    std::vector<std::size_t> value_lines;  // 1-based source line of each value (read only)
};

/// Throws IngestionError (with file and line) on a malformed header, a
/// non-numeric value, or a value count that differs from nx*ny*nz.
CellField read_field(const std::filesystem::path& path);

/// Writes with 17 significant digits so a round trip is exact.
void write_field(const std::filesystem::path& path, const CellField& field);

}  // namespace neinfer
