#include "anisoflow/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace anisoflow {

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        if constexpr (std::is_same_v<T, int>) {
            out.push_back(std::stoi(item, &used));
        } else {
            out.push_back(std::stod(item, &used));
        }
        if (used != item.size()) {
            throw std::runtime_error("field snapshot: bad list entry '" + item + "'");
        }
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ',';
        if constexpr (std::is_same_v<T, int>) {
            s += std::to_string(values[i]);
        } else {
            s += format_double(values[i]);
        }
    }
    return s;
}

}  // namespace

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_field(std::ostream& out, const Grid& grid, const Field& field)
{
    grid.check_field(field, "write_field");
    out << "# anisoflow-field v1 dim=" << grid.dim() << " n=" << join(grid.nodes_per_axis())
        << " L=" << join(grid.lengths()) << '\n';
    for (Eigen::Index i = 0; i < field.size(); ++i) {
        out << format_double(field[i]) << '\n';
    }
}

void write_field(const std::filesystem::path& path, const Grid& grid, const Field& field)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    write_field(out, grid, field);
}

FieldSnapshot read_field_snapshot(std::istream& in)
{
    std::string header;
    if (!std::getline(in, header)) {
        throw std::runtime_error("field snapshot: empty input");
    }
    std::istringstream hs(header);
    std::string hash, magic, version;
    hs >> hash >> magic >> version;
    if (hash != "#" || magic != "anisoflow-field" || version != "v1") {
        throw std::runtime_error("field snapshot: bad header '" + header + "'");
    }
    FieldSnapshot snap;
    std::string token;
    bool have_dim = false, have_n = false, have_l = false;
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("field snapshot: bad header token '" + token + "'");
        }
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "dim") {
            snap.dim = std::stoi(value);
            have_dim = true;
        } else if (key == "n") {
            snap.nodes_per_axis = parse_list<int>(value);
            have_n = true;
        } else if (key == "L") {
            snap.lengths = parse_list<double>(value);
            have_l = true;
        } else {
            throw std::runtime_error("field snapshot: unknown header key '" + key + "'");
        }
    }
    if (!have_dim || !have_n || !have_l) {
        throw std::runtime_error("field snapshot: header needs dim, n and L");
    }
    long expected = 1;
    for (int n : snap.nodes_per_axis) expected *= n;

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(expected));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(line, &used);
        if (used != line.size() || !std::isfinite(v)) {
            throw std::runtime_error("field snapshot: bad value '" + line + "'");
        }
        values.push_back(v);
    }
    if (static_cast<long>(values.size()) != expected) {
        throw std::runtime_error("field snapshot: expected " + std::to_string(expected) + " values, got "
                                 + std::to_string(values.size()));
    }
    snap.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return snap;
}

Field read_field(const std::filesystem::path& path, const Grid& grid)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open field file " + path.string());
    }
    FieldSnapshot snap = read_field_snapshot(in);
    if (snap.dim != grid.dim() || snap.nodes_per_axis != grid.nodes_per_axis()) {
        throw std::runtime_error("field file " + path.string() + " does not match the grid");
    }
    for (int k = 0; k < grid.dim(); ++k) {
        if (std::abs(snap.lengths[k] - grid.lengths()[k]) > 1e-12 * grid.lengths()[k]) {
            throw std::runtime_error("field file " + path.string() + " has different axis lengths");
        }
    }
    return snap.values;
}

}  // namespace anisoflow
