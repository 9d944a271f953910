#pragma once

#include "anisoflow/control.hpp"
#include "anisoflow/studies.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace anisoflow {

/// Configuration error; key() names the offending `section.key`.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key))
    {
    }
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct InitialSpec {
    enum class Kind { Constant, RandomUniform, TanhCircle, File };
    Kind kind = Kind::Constant;
    double value = 0.0;
    double low = -1.0, high = 1.0;
    std::optional<std::uint64_t> seed;  ///< falls back to the run seed
    std::vector<double> center;
    double radius = 0.25, width = 0.05;
    std::filesystem::path file;
};

struct ControlSpec {
    enum class Kind { Zero, Constant, Files };
    Kind kind = Kind::Zero;
    double value = 0.0;
    std::filesystem::path dir;  ///< u_0001.field ... u_NNNN.field
};

struct ProblemSpec {
    enum class TargetKind { FinalTime, Distributed };
    enum class TargetSource { File, Reference };
    double lambda = 1e-3;
    TargetKind target_kind = TargetKind::FinalTime;
    TargetSource target_source = TargetSource::Reference;
    std::filesystem::path target_file;  ///< final-time target
    std::filesystem::path target_dir;   ///< distributed: yq_0001.field ...
    double reference_amplitude = 1.0;   ///< handcrafted control a cos(pi x_1 / L_1)
    int reference_steps = 256;
};

struct StudySpec {
    int levels = 4;
    int base_steps = 16;
    double rate_min = 0.8, rate_max = 1.2;
    double ratio_window = 1.5;
    double growth_window = 1.5;
    int pairs = 5;
    double amplitude = 0.1;
};

/// Fully typed run configuration, built from the INI text plus overrides.
struct RunConfig {
    int dim = 1;
    std::vector<int> nodes;
    std::vector<double> lengths;
    double final_time = 1.0;
    int steps = 10;
    std::vector<double> breakpoints;  ///< explicit partition, overrides T/N when set

    Anisotropy::Kind aniso_kind = Anisotropy::Kind::Isotropic;
    double delta = 0.0;
    std::vector<std::vector<double>> matrices;

    Potential::Kind pot_kind = Potential::Kind::DoubleWell;
    double penalty = 100.0;
    double cutoff = 2.0;
    Potential::Kind truncation_base = Potential::Kind::DoubleWell;

    InitialSpec initial;
    ControlSpec control;
    ProblemSpec problem;
    StepConfig solver;
    OptimizeOptions optimizer;
    StudySpec study;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 1;

    /// FNV-1a hash of the effective key=value set.
    std::uint64_t hash = 0;
    std::string canonical_text;

    [[nodiscard]] Grid make_grid() const;
    [[nodiscard]] Anisotropy make_anisotropy() const;
    [[nodiscard]] Potential make_potential() const;
    [[nodiscard]] TimePartition make_partition() const;
    [[nodiscard]] Field make_initial(const Grid& grid) const;
    [[nodiscard]] ControlSequence make_control(const Grid& grid, int steps) const;
};

/// Parses INI text and applies `section.key=value` overrides. Throws
/// ConfigError naming the key for unknown keys, malformed values and
/// invariant violations (including the uniqueness step-size rule).
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       const std::filesystem::path& base_dir = ".");

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::uint64_t fnv1a(const std::string& text);

}  // namespace anisoflow
