// Command-line front end: solve, verify-operator, dual-check, sweep-tau, refine-study.

#include "lagmc/commands.hpp"
#include "lagmc/config.hpp"
#include "lagmc/errors.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

using namespace lagmc;
using namespace lagmc::cli;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "run configuration file")->required();
    sub->add_option("--out", c.out, "output directory (overrides run.out)");
    sub->add_option("--seed", c.seed, "random seed (overrides run.seed)");
}

std::filesystem::path out_dir(const Common& c, const RunConfig& cfg) {
    if (!c.out.empty()) return c.out;
    if (cfg.out_dir) return *cfg.out_dir;
    return "out";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lagrangian mean curvature second boundary value problem solver"};
    app.require_subcommand(1);

    Common common;
    CLI::App* solve = app.add_subcommand("solve", "solve and certify one configuration");
    CLI::App* verify = app.add_subcommand("verify-operator", "operator identity and structure checks");
    CLI::App* dual = app.add_subcommand("dual-check", "primal and dual solves with duality certificates");
    CLI::App* sweep = app.add_subcommand("sweep-tau", "independent solves over a list of tau values");
    CLI::App* refine = app.add_subcommand("refine-study", "convergence study over doubling grids");
    for (CLI::App* s : {solve, verify, dual, sweep, refine}) add_common(s, common);

    std::string tau_list;
    sweep->add_option("--tau-list", tau_list, "comma-separated tau values, pi expressions allowed");
    std::optional<int> levels;
    refine->add_option("--levels", levels, "number of grid levels (at least 3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    Io io{std::cout, std::cerr};
    try {
        RunConfig cfg = load_config(common.config);
        if (common.seed) cfg.seed = *common.seed;
        const std::filesystem::path out = out_dir(common, cfg);
        if (solve->parsed()) return cmd_solve(cfg, out, io);
        if (verify->parsed()) return cmd_verify_operator(cfg, out, io);
        if (dual->parsed()) return cmd_dual_check(cfg, out, io);
        if (sweep->parsed()) {
            std::vector<double> taus = cfg.tau_list;
            if (sweep->count("--tau-list") > 0) taus = parse_real_list(tau_list, "--tau-list", true);
            return cmd_sweep_tau(cfg, taus, out, io, sweep_threads());
        }
        return cmd_refine_study(cfg, levels.value_or(cfg.levels), out, io);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCertificate;
    }
}
