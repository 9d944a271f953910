#include "anisoflow/config.hpp"

#include "anisoflow/field_io.hpp"
#include "anisoflow/initializers.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace anisoflow {

namespace {

namespace pt = boost::property_tree;

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = {
        "seed",
        "grid.dim", "grid.nodes", "grid.lengths",
        "time.T", "time.N", "time.breakpoints",
        "anisotropy.kind", "anisotropy.delta", "anisotropy.matrices",
        "potential.kind", "potential.penalty", "potential.cutoff", "potential.base",
        "initial.kind", "initial.value", "initial.low", "initial.high", "initial.seed", "initial.center",
        "initial.radius", "initial.width", "initial.file",
        "control.kind", "control.value", "control.dir",
        "problem.lambda", "problem.target_kind", "problem.target_source", "problem.target_file",
        "problem.target_dir", "problem.reference_amplitude", "problem.reference_steps",
        "solver.newton_tol", "solver.max_newton_iters", "solver.max_descent_iters", "solver.linear_tol",
        "solver.enforce_uniqueness", "solver.armijo_slope", "solver.armijo_backtrack", "solver.armijo_min_step",
        "optimize.method", "optimize.max_iters", "optimize.grad_tol", "optimize.lbfgs_memory",
        "optimize.armijo_slope", "optimize.armijo_backtrack", "optimize.armijo_min_step",
        "study.levels", "study.base_N", "study.rate_min", "study.rate_max", "study.ratio_window",
        "study.growth_window", "study.pairs", "study.amplitude",
        "output.dir",
    };
    return keys;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

class KeyValues {
public:
    explicit KeyValues(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

    [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] double real(const std::string& key, double fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_real(key, it->second);
    }

    [[nodiscard]] long integer(const std::string& key, long fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != it->second.size()) {
            throw ConfigError(key, "expected an integer, got '" + it->second + "'");
        }
        return v;
    }

    [[nodiscard]] std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            if (!it->second.empty() && it->second[0] != '-') v = std::stoull(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != it->second.size()) {
            throw ConfigError(key, "expected a non-negative integer, got '" + it->second + "'");
        }
        return v;
    }

    [[nodiscard]] bool boolean(const std::string& key, bool fallback) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "off" || v == "no" || v == "0") return false;
        throw ConfigError(key, "expected a boolean, got '" + v + "'");
    }

    [[nodiscard]] std::vector<double> reals(const std::string& key, const std::string& text) const
    {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
        return out;
    }

    [[nodiscard]] std::vector<double> reals(const std::string& key) const { return reals(key, str(key, "")); }

    template <typename E>
    E choice(const std::string& key, E fallback, const std::map<std::string, E>& options) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto o = options.find(it->second);
        if (o == options.end()) {
            std::string allowed;
            for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : ", ") + name;
            throw ConfigError(key, "unknown value '" + it->second + "' (allowed: " + allowed + ")");
        }
        return o->second;
    }

    [[nodiscard]] const std::map<std::string, std::string>& all() const { return values_; }

private:
    static double parse_real(const std::string& key, const std::string& text)
    {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size() || !std::isfinite(v)) {
            throw ConfigError(key, "expected a finite number, got '" + text + "'");
        }
        return v;
    }

    std::map<std::string, std::string> values_;
};

std::map<std::string, std::string> flatten(const std::string& text)
{
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", std::string("config syntax error: ") + e.what());
    }
    std::map<std::string, std::string> flat;
    for (const auto& [section, child] : tree) {
        if (child.empty()) {
            flat[section] = trim(child.data());
            continue;
        }
        for (const auto& [key, leaf] : child) {
            if (!leaf.empty()) throw ConfigError(section + "." + key, "nested sections are not supported");
            flat[section + "." + key] = trim(leaf.data());
        }
    }
    return flat;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value)
{
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

void require_file(const std::string& key, const std::filesystem::path& p)
{
    if (!std::filesystem::exists(p)) throw ConfigError(key, "file '" + p.string() + "' does not exist");
}

}  // namespace

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const std::filesystem::path& base_dir)
{
    auto flat = flatten(text);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(o, "override must look like section.key=value");
        flat[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
    }
    for (const auto& [key, _] : flat) {
        if (!known_keys().count(key)) throw ConfigError(key, "unknown configuration key");
    }
    const KeyValues kv(std::move(flat));

    RunConfig cfg;
    // Where the results go does not change what is computed.
    for (const auto& [key, value] : kv.all())
        if (key != "output.dir") cfg.canonical_text += key + "=" + value + "\n";
    cfg.hash = fnv1a(cfg.canonical_text);
    cfg.seed = kv.unsigned_integer("seed", 1);

    // grid
    cfg.dim = static_cast<int>(kv.integer("grid.dim", 1));
    if (cfg.dim != 1 && cfg.dim != 2) throw ConfigError("grid.dim", "must be 1 or 2");
    if (!kv.has("grid.nodes")) throw ConfigError("grid.nodes", "required");
    for (double v : kv.reals("grid.nodes")) {
        if (v != std::floor(v)) throw ConfigError("grid.nodes", "node counts must be integers");
        cfg.nodes.push_back(static_cast<int>(v));
    }
    cfg.lengths = kv.has("grid.lengths") ? kv.reals("grid.lengths") : std::vector<double>(cfg.dim, 1.0);
    if (static_cast<int>(cfg.nodes.size()) != cfg.dim) throw ConfigError("grid.nodes", "need one count per axis");
    if (static_cast<int>(cfg.lengths.size()) != cfg.dim) throw ConfigError("grid.lengths", "need one length per axis");
    try {
        (void)cfg.make_grid();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("grid", e.what());
    }

    // time
    cfg.final_time = kv.real("time.T", 1.0);
    cfg.steps = static_cast<int>(kv.integer("time.N", 10));
    if (kv.has("time.breakpoints")) cfg.breakpoints = kv.reals("time.breakpoints");
    if (!(cfg.final_time > 0.0)) throw ConfigError("time.T", "must be positive");
    if (cfg.steps < 1) throw ConfigError("time.N", "must be at least 1");
    try {
        (void)cfg.make_partition();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("time.breakpoints", e.what());
    }

    // anisotropy
    cfg.aniso_kind = kv.choice<Anisotropy::Kind>(
        "anisotropy.kind", Anisotropy::Kind::Isotropic,
        {{"isotropic", Anisotropy::Kind::Isotropic}, {"matrix_family", Anisotropy::Kind::MatrixFamily}});
    cfg.delta = kv.real("anisotropy.delta", 0.0);
    if (kv.has("anisotropy.matrices")) {
        std::stringstream ss(kv.str("anisotropy.matrices", ""));
        std::string item;
        while (std::getline(ss, item, '|')) cfg.matrices.push_back(kv.reals("anisotropy.matrices", trim(item)));
    }
    if (cfg.aniso_kind == Anisotropy::Kind::MatrixFamily && cfg.matrices.empty()) {
        throw ConfigError("anisotropy.matrices", "matrix_family needs at least one matrix");
    }
    try {
        (void)cfg.make_anisotropy();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("anisotropy", e.what());
    }

    // potential
    const std::map<std::string, Potential::Kind> pot_kinds = {{"zero", Potential::Kind::Zero},
                                                              {"double_well", Potential::Kind::DoubleWell},
                                                              {"moreau_yosida", Potential::Kind::MoreauYosida},
                                                              {"truncated", Potential::Kind::Truncated}};
    cfg.pot_kind = kv.choice("potential.kind", Potential::Kind::DoubleWell, pot_kinds);
    cfg.penalty = kv.real("potential.penalty", 100.0);
    cfg.cutoff = kv.real("potential.cutoff", 2.0);
    cfg.truncation_base = kv.choice<Potential::Kind>(
        "potential.base", Potential::Kind::DoubleWell,
        {{"zero", Potential::Kind::Zero}, {"double_well", Potential::Kind::DoubleWell}});
    Potential pot = Potential::zero();
    try {
        pot = cfg.make_potential();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("potential", e.what());
    }

    // initial state
    cfg.initial.kind = kv.choice<InitialSpec::Kind>("initial.kind", InitialSpec::Kind::Constant,
                                                    {{"constant", InitialSpec::Kind::Constant},
                                                     {"random_uniform", InitialSpec::Kind::RandomUniform},
                                                     {"tanh_circle", InitialSpec::Kind::TanhCircle},
                                                     {"file", InitialSpec::Kind::File}});
    cfg.initial.value = kv.real("initial.value", 0.0);
    cfg.initial.low = kv.real("initial.low", -1.0);
    cfg.initial.high = kv.real("initial.high", 1.0);
    if (kv.has("initial.seed")) cfg.initial.seed = kv.unsigned_integer("initial.seed", 0);
    if (kv.has("initial.center")) {
        cfg.initial.center = kv.reals("initial.center");
    } else {
        for (double l : cfg.lengths) cfg.initial.center.push_back(0.5 * l);
    }
    cfg.initial.radius = kv.real("initial.radius", 0.25);
    cfg.initial.width = kv.real("initial.width", 0.05);
    if (cfg.initial.kind == InitialSpec::Kind::RandomUniform && !(cfg.initial.high > cfg.initial.low)) {
        throw ConfigError("initial.high", "must exceed initial.low");
    }
    if (cfg.initial.kind == InitialSpec::Kind::TanhCircle) {
        if (!(cfg.initial.radius > 0.0)) throw ConfigError("initial.radius", "must be positive");
        if (!(cfg.initial.width > 0.0)) throw ConfigError("initial.width", "must be positive");
        if (static_cast<int>(cfg.initial.center.size()) != cfg.dim) {
            throw ConfigError("initial.center", "need one coordinate per axis");
        }
    }
    if (cfg.initial.kind == InitialSpec::Kind::File) {
        if (!kv.has("initial.file")) throw ConfigError("initial.file", "required for initial.kind = file");
        cfg.initial.file = resolve(base_dir, kv.str("initial.file", ""));
        require_file("initial.file", cfg.initial.file);
    }

    // control
    cfg.control.kind = kv.choice<ControlSpec::Kind>(
        "control.kind", ControlSpec::Kind::Zero,
        {{"zero", ControlSpec::Kind::Zero}, {"constant", ControlSpec::Kind::Constant}, {"files", ControlSpec::Kind::Files}});
    cfg.control.value = kv.real("control.value", 0.0);
    if (cfg.control.kind == ControlSpec::Kind::Files) {
        if (!kv.has("control.dir")) throw ConfigError("control.dir", "required for control.kind = files");
        cfg.control.dir = resolve(base_dir, kv.str("control.dir", ""));
        const int steps = cfg.make_partition().steps();
        for (int j = 1; j <= steps; ++j) {
            char name[32];
            std::snprintf(name, sizeof name, "u_%04d.field", j);
            require_file("control.dir", cfg.control.dir / name);
        }
    }

    // optimal control problem
    cfg.problem.lambda = kv.real("problem.lambda", 1e-3);
    if (!(cfg.problem.lambda > 0.0)) throw ConfigError("problem.lambda", "must be positive");
    cfg.problem.target_kind = kv.choice<ProblemSpec::TargetKind>(
        "problem.target_kind", ProblemSpec::TargetKind::FinalTime,
        {{"final_time", ProblemSpec::TargetKind::FinalTime}, {"distributed", ProblemSpec::TargetKind::Distributed}});
    cfg.problem.target_source = kv.choice<ProblemSpec::TargetSource>(
        "problem.target_source", ProblemSpec::TargetSource::Reference,
        {{"file", ProblemSpec::TargetSource::File}, {"reference", ProblemSpec::TargetSource::Reference}});
    cfg.problem.reference_amplitude = kv.real("problem.reference_amplitude", 1.0);
    cfg.problem.reference_steps = static_cast<int>(kv.integer("problem.reference_steps", 256));
    if (cfg.problem.reference_steps < 1) throw ConfigError("problem.reference_steps", "must be at least 1");
    if (cfg.problem.target_source == ProblemSpec::TargetSource::File) {
        if (cfg.problem.target_kind == ProblemSpec::TargetKind::FinalTime) {
            if (!kv.has("problem.target_file")) throw ConfigError("problem.target_file", "required");
            cfg.problem.target_file = resolve(base_dir, kv.str("problem.target_file", ""));
            require_file("problem.target_file", cfg.problem.target_file);
        } else {
            if (!kv.has("problem.target_dir")) throw ConfigError("problem.target_dir", "required");
            cfg.problem.target_dir = resolve(base_dir, kv.str("problem.target_dir", ""));
            require_file("problem.target_dir", cfg.problem.target_dir);
        }
    }

    // solver
    cfg.solver.newton_tol = kv.real("solver.newton_tol", cfg.solver.newton_tol);
    cfg.solver.max_newton_iters = static_cast<int>(kv.integer("solver.max_newton_iters", cfg.solver.max_newton_iters));
    cfg.solver.max_descent_iters = static_cast<int>(kv.integer("solver.max_descent_iters", cfg.solver.max_descent_iters));
    cfg.solver.linear_tol = kv.real("solver.linear_tol", cfg.solver.linear_tol);
    cfg.solver.enforce_uniqueness = kv.boolean("solver.enforce_uniqueness", cfg.solver.enforce_uniqueness);
    cfg.solver.armijo_slope = kv.real("solver.armijo_slope", cfg.solver.armijo_slope);
    cfg.solver.armijo_backtrack = kv.real("solver.armijo_backtrack", cfg.solver.armijo_backtrack);
    cfg.solver.armijo_min_step = kv.real("solver.armijo_min_step", cfg.solver.armijo_min_step);
    try {
        cfg.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("solver", e.what());
    }

    // optimizer
    cfg.optimizer.method = kv.choice<OptimizeOptions::Method>(
        "optimize.method", OptimizeOptions::Method::SteepestDescent,
        {{"steepest_descent", OptimizeOptions::Method::SteepestDescent},
         {"gd", OptimizeOptions::Method::SteepestDescent},
         {"lbfgs", OptimizeOptions::Method::Lbfgs}});
    cfg.optimizer.max_iters = static_cast<int>(kv.integer("optimize.max_iters", cfg.optimizer.max_iters));
    cfg.optimizer.grad_tol = kv.real("optimize.grad_tol", cfg.optimizer.grad_tol);
    cfg.optimizer.lbfgs_memory = static_cast<int>(kv.integer("optimize.lbfgs_memory", cfg.optimizer.lbfgs_memory));
    cfg.optimizer.armijo_slope = kv.real("optimize.armijo_slope", cfg.optimizer.armijo_slope);
    cfg.optimizer.armijo_backtrack = kv.real("optimize.armijo_backtrack", cfg.optimizer.armijo_backtrack);
    cfg.optimizer.armijo_min_step = kv.real("optimize.armijo_min_step", cfg.optimizer.armijo_min_step);
    if (cfg.optimizer.max_iters < 0) throw ConfigError("optimize.max_iters", "must be non-negative");
    if (!(cfg.optimizer.grad_tol >= 0.0)) throw ConfigError("optimize.grad_tol", "must be non-negative");
    if (cfg.optimizer.lbfgs_memory < 1) throw ConfigError("optimize.lbfgs_memory", "must be at least 1");

    // studies
    cfg.study.levels = static_cast<int>(kv.integer("study.levels", cfg.study.levels));
    cfg.study.base_steps = static_cast<int>(kv.integer("study.base_N", cfg.study.base_steps));
    cfg.study.rate_min = kv.real("study.rate_min", cfg.study.rate_min);
    cfg.study.rate_max = kv.real("study.rate_max", cfg.study.rate_max);
    cfg.study.ratio_window = kv.real("study.ratio_window", cfg.study.ratio_window);
    cfg.study.growth_window = kv.real("study.growth_window", cfg.study.growth_window);
    cfg.study.pairs = static_cast<int>(kv.integer("study.pairs", cfg.study.pairs));
    cfg.study.amplitude = kv.real("study.amplitude", cfg.study.amplitude);
    if (cfg.study.levels < 2 || cfg.study.levels > 12) throw ConfigError("study.levels", "must be in [2, 12]");
    if (cfg.study.base_steps < 1) throw ConfigError("study.base_N", "must be at least 1");
    if (cfg.study.pairs < 1) throw ConfigError("study.pairs", "must be at least 1");

    cfg.output_dir = kv.str("output.dir", "out");

    // Step-size policy: uniqueness of every implicit step.
    const double tau = cfg.make_partition().max_tau();
    const double c_psi = pot.semiconvexity();
    if (cfg.solver.enforce_uniqueness && !tau_regime(tau, c_psi).unique) {
        throw ConfigError(kv.has("time.breakpoints") ? "time.breakpoints" : "time.N",
                          "tau = " + format_double(tau) + " violates the uniqueness step-size rule tau < 1/C_psi = "
                              + format_double(1.0 / c_psi));
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides, path.parent_path().empty() ? "." : path.parent_path());
}

Grid RunConfig::make_grid() const
{
    return build_grid(dim, nodes, lengths);
}

Anisotropy RunConfig::make_anisotropy() const
{
    if (aniso_kind == Anisotropy::Kind::Isotropic) return Anisotropy::isotropic(dim);
    std::vector<SpaceMatrix> mats;
    for (const auto& entries : matrices) {
        if (static_cast<int>(entries.size()) != dim * dim) {
            throw std::invalid_argument("each matrix needs " + std::to_string(dim * dim) + " entries");
        }
        SpaceMatrix g(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) g(r, c) = entries[r * dim + c];
        mats.push_back(g);
    }
    return Anisotropy::matrix_family(std::move(mats), delta);
}

Potential RunConfig::make_potential() const
{
    switch (pot_kind) {
    case Potential::Kind::Zero:
        return Potential::zero();
    case Potential::Kind::DoubleWell:
        return Potential::double_well();
    case Potential::Kind::MoreauYosida:
        return Potential::moreau_yosida(penalty);
    case Potential::Kind::Truncated:
        return build_truncation(truncation_base == Potential::Kind::Zero ? Potential::zero() : Potential::double_well(),
                                cutoff);
    }
    return Potential::zero();
}

TimePartition RunConfig::make_partition() const
{
    if (!breakpoints.empty()) return TimePartition(breakpoints);
    return TimePartition::uniform(final_time, steps);
}

Field RunConfig::make_initial(const Grid& grid) const
{
    switch (initial.kind) {
    case InitialSpec::Kind::Constant:
        return constant_field(grid, initial.value);
    case InitialSpec::Kind::RandomUniform:
        return random_uniform_field(grid, initial.low, initial.high, initial.seed.value_or(seed));
    case InitialSpec::Kind::TanhCircle: {
        SpaceVector c(dim);
        for (int k = 0; k < dim; ++k) c[k] = initial.center[k];
        return tanh_circle_field(grid, c, initial.radius, initial.width);
    }
    case InitialSpec::Kind::File:
        return read_field(initial.file, grid);
    }
    return constant_field(grid, 0.0);
}

ControlSequence RunConfig::make_control(const Grid& grid, int count) const
{
    switch (control.kind) {
    case ControlSpec::Kind::Zero:
        return zero_control(grid, count);
    case ControlSpec::Kind::Constant:
        return ControlSequence(count, constant_field(grid, control.value));
    case ControlSpec::Kind::Files: {
        ControlSequence u;
        for (int j = 1; j <= count; ++j) {
            char name[32];
            std::snprintf(name, sizeof name, "u_%04d.field", j);
            u.push_back(read_field(control.dir / name, grid));
        }
        return u;
    }
    }
    return zero_control(grid, count);
}

}  // namespace anisoflow
