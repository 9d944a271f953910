#pragma once

#include "anisoflow/grid.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace anisoflow {

/// Formats a double with 17 significant digits.
std::string format_double(double v);

/// Header line `# anisoflow-field v1 dim=<d> n=<n1[,n2]> L=<L1[,L2]>`, then one value per line.
void write_field(std::ostream& out, const Grid& grid, const Field& field);
void write_field(const std::filesystem::path& path, const Grid& grid, const Field& field);

struct FieldSnapshot {
    int dim = 0;
    std::vector<int> nodes_per_axis;
    std::vector<double> lengths;
    Field values;
};

FieldSnapshot read_field_snapshot(std::istream& in);

/// Reads a snapshot and checks that its header matches `grid`.
Field read_field(const std::filesystem::path& path, const Grid& grid);

}  // namespace anisoflow
