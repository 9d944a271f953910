#include "anisoflow/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"anisoflow: implicit phase-field gradient flow, optimal control and step-size studies"};
    anisoflow::cli::Request request;
    std::string out;
    std::uint64_t seed = 0;

    app.add_option("command", request.command, "simulate | optimize | verify-energy | study-tau | "
                                                "study-bounds | study-lipschitz | study-control")
        ->required()
        ->check(CLI::IsMember(anisoflow::cli::commands()));
    app.add_option("--config", request.config, "INI configuration file")->required();
    app.add_option("--set", request.overrides, "override a key: section.key=value (repeatable)");
    auto* out_opt = app.add_option("--out", out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : anisoflow::cli::kExitConfigError;
    }
    if (*out_opt) request.out = out;
    if (*seed_opt) request.seed = seed;
    return anisoflow::cli::run(request, std::cout, std::cerr);
}
