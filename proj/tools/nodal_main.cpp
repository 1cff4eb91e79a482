// Command-line front end: maps argv onto the cli runners.
//
//   nodal forward   CONFIG [--out-dir D] [--grid-n N] [--tol T] [--allow-gaps]
//   nodal invert    NODES CONFIG [--out-dir D] [--grid-n N] [--n-list A,B,...]
//   nodal roundtrip CONFIG [--out-dir D] [--grid-n N] [--n-list A,B,...]
//                   [--tol T] [--allow-gaps]
//   nodal check     CONFIG [--out-dir D] [--grid-n N] [--n-list A,B,...]
//                   [--tol T] [--allow-gaps]
//
// Exit codes: 0 ok, 1 internal error, 2 config error, 3 spectrum gap,
// 4 nodal-data error.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nodal/cli.hpp"

int main(int argc, char** argv) {
    using namespace nodal;

    CLI::App app{"forward spectra, nodal data, and coefficient reconstruction for a "
                 "Dirac-type system with an integral memory term and a nonlocal "
                 "boundary condition"};
    app.require_subcommand(1);

    std::string config_path;
    std::string nodes_path;
    std::string out_dir = ".";
    int grid_n = 0;
    std::vector<int> n_list;
    double tol = 0.0;
    bool allow_gaps = false;

    CLI::Option* grid_n_opt = nullptr;
    CLI::Option* n_list_opt = nullptr;
    CLI::Option* tol_opt = nullptr;

    auto add_common = [&](CLI::App* sub, bool gaps, bool levels) {
        sub->add_option("--out-dir", out_dir, "directory for output files (default .)");
        grid_n_opt = sub->add_option("--grid-n", grid_n,
                                     "override problem.grid_n (quadrature intervals)");
        tol_opt = sub->add_option("--tol", tol, "override spectrum.tol");
        if (levels)
            n_list_opt = sub->add_option("--n-list", n_list,
                                         "override inversion.n_list (comma separated)")
                             ->delimiter(',');
        if (gaps)
            sub->add_flag("--allow-gaps", allow_gaps,
                          "continue past levels whose eigenvalue bracket never "
                          "changes sign");
    };

    CLI::App* cmd_forward =
        app.add_subcommand("forward", "solve the spectrum block and write "
                                      "spectrum.csv + nodes.csv");
    cmd_forward->add_option("config", config_path, "run config (JSON)")->required();
    add_common(cmd_forward, true, false);

    CLI::App* cmd_invert =
        app.add_subcommand("invert", "reconstruct coefficients from a nodes.csv");
    cmd_invert->add_option("nodes", nodes_path, "nodal data (nodes.csv format)")->required();
    cmd_invert->add_option("config", config_path, "run config (JSON)")->required();
    add_common(cmd_invert, false, true);

    CLI::App* cmd_roundtrip =
        app.add_subcommand("roundtrip", "forward-solve the inversion levels, "
                                        "reconstruct, and gate against the "
                                        "problem's own coefficients");
    cmd_roundtrip->add_option("config", config_path, "run config (JSON)")->required();
    add_common(cmd_roundtrip, true, true);

    CLI::App* cmd_check =
        app.add_subcommand("check", "audit the closed-form spectral/nodal series "
                                    "and write asym_report.csv");
    cmd_check->add_option("config", config_path, "run config (JSON)")->required();
    add_common(cmd_check, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kExitOk : cli::kExitConfig;
    }

    try {
        cli::RunConfig cfg = cli::load_config(config_path);
        cli::RunFlags flags;
        flags.out_dir = out_dir;
        flags.allow_gaps = allow_gaps;
        if (grid_n_opt && grid_n_opt->count() > 0) flags.grid_n = grid_n;
        if (n_list_opt && n_list_opt->count() > 0) flags.n_list = n_list;
        if (tol_opt && tol_opt->count() > 0) flags.tol = tol;
        cli::apply_flags(cfg, flags);

        if (cmd_forward->parsed()) return cli::run_forward(cfg, flags);
        if (cmd_invert->parsed()) return cli::run_invert(nodes_path, cfg, flags);
        if (cmd_roundtrip->parsed()) return cli::run_roundtrip(cfg, flags);
        if (cmd_check->parsed()) return cli::run_check(cfg, flags);
        return cli::kExitConfig;
    } catch (const cli::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return cli::kExitConfig;
    } catch (const cli::DataError& e) {
        std::fprintf(stderr, "nodal data error: %s\n", e.what());
        return cli::kExitNodalData;
    } catch (const inverse::InverseError& e) {
        std::fprintf(stderr, "nodal data error: %s\n", e.what());
        return cli::kExitNodalData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
