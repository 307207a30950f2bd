// Command-line front end. Everything goes through the C API in fpk/fpk.h:
// this file is also the reference client for that library. JSON results go
// to stdout, human commentary to stderr, and the exit code is the only
// machine contract: 0 = the command's property holds, 1 = it completed but
// the property failed, 2 = the run errored out.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fpk/fpk.h"

namespace {

struct ConfigHandle {
    fpk_config* c = nullptr;
    ~ConfigHandle() { fpk_config_free(c); }
};

int report_error() {
    std::fprintf(stderr, "error: %s\n", fpk_last_error());
    return 2;
}

bool load_config(const std::string& path, ConfigHandle& h) {
    if (fpk_config_load(path.c_str(), &h.c) != FPK_OK) {
        std::fprintf(stderr, "error: %s\n", fpk_last_error());
        return false;
    }
    return true;
}

void emit(char* json) {
    if (!json) return;
    std::fputs(json, stdout);
    std::fputc('\n', stdout);
    fpk_string_free(json);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fokker-Planck-Kolmogorov workbench"};
    app.set_version_flag("--version", fpk_version());
    app.require_subcommand(1);

    std::string config_path, out_dir, pde_dir, mc_dir;
    long long paths = 0, seed = 0;
    int threads = 0;
    double t_end = 0;
    bool seed_given = false;

    CLI::App* validate = app.add_subcommand(
        "validate", "Sample the coefficients over the exhaustion and report violations");
    validate->add_option("config", config_path, "run configuration")->required();

    CLI::App* check = app.add_subcommand(
        "check", "Evaluate the well-posedness certificates requested in [lyapunov]");
    check->add_option("config", config_path, "run configuration")->required();

    CLI::App* solve = app.add_subcommand(
        "solve", "Run the viscosity ladder and write density.csv, mass.csv, metadata.json");
    solve->add_option("config", config_path, "run configuration")->required();
    solve->add_option("--out", out_dir, "output directory")->required();

    CLI::App* mc = app.add_subcommand(
        "mc", "Run the killed-diffusion Monte Carlo oracle");
    mc->add_option("config", config_path, "run configuration")->required();
    mc->add_option("--out", out_dir, "output directory")->required();
    mc->add_option("--paths", paths, "override [mc] n_paths");
    mc->add_option("--seed", seed, "stream seed (required unless [mc] sets one)")
        ->each([&](const std::string&) { seed_given = true; });
    mc->add_option("--threads", threads, "worker threads (never changes the numbers)");

    CLI::App* compare = app.add_subcommand(
        "compare", "Compare a solve output with an mc output, write compare.csv");
    compare->add_option("pde_dir", pde_dir, "directory written by solve")->required();
    compare->add_option("mc_dir", mc_dir, "directory written by mc")->required();
    compare->add_option("--out", out_dir, "output directory (default: mc_dir)");

    CLI::App* ergodic = app.add_subcommand(
        "ergodic", "Cesaro averages against the stationary state; ergodic.csv, stationary.csv");
    ergodic->add_option("config", config_path, "run configuration")->required();
    ergodic->add_option("--out", out_dir, "output directory")->required();
    ergodic->add_option("--t-end", t_end, "override the config horizon");

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) {
        ConfigHandle h;
        if (!load_config(config_path, h)) return 2;
        char* json = nullptr;
        int ok = 0;
        if (fpk_validate(h.c, &json, &ok) != FPK_OK) return report_error();
        emit(json);
        std::fprintf(stderr, ok ? "validate: no violations\n"
                                : "validate: violations found (see stdout)\n");
        return ok ? 0 : 1;
    }

    if (check->parsed()) {
        ConfigHandle h;
        if (!load_config(config_path, h)) return 2;
        char* json = nullptr;
        int all = 0;
        if (fpk_check(h.c, &json, &all) != FPK_OK) return report_error();
        emit(json);
        std::fprintf(stderr, all ? "check: all requested certificates hold\n"
                                 : "check: at least one certificate does not hold\n");
        return all ? 0 : 1;
    }

    if (solve->parsed()) {
        ConfigHandle h;
        if (!load_config(config_path, h)) return 2;
        char* json = nullptr;
        int mass_ok = 0;
        if (fpk_solve(h.c, out_dir.c_str(), &json, &mass_ok) != FPK_OK) return report_error();
        emit(json);
        std::fprintf(stderr, mass_ok ? "solve: mass bookkeeping consistent; results in %s\n"
                                     : "solve: MASS BOOKKEEPING INCONSISTENT; results in %s\n",
                     out_dir.c_str());
        return mass_ok ? 0 : 1;
    }

    if (mc->parsed()) {
        ConfigHandle h;
        if (!load_config(config_path, h)) return 2;
        char* json = nullptr;
        if (fpk_mc(h.c, out_dir.c_str(), paths, seed, seed_given ? 1 : 0, threads, &json) !=
            FPK_OK)
            return report_error();
        emit(json);
        std::fprintf(stderr, "mc: done; results in %s\n", out_dir.c_str());
        return 0;
    }

    if (compare->parsed()) {
        if (out_dir.empty()) out_dir = mc_dir;
        char* json = nullptr;
        int within = 0;
        if (fpk_compare(pde_dir.c_str(), mc_dir.c_str(), out_dir.c_str(), &json, &within) !=
            FPK_OK)
            return report_error();
        emit(json);
        std::fprintf(stderr, within ? "compare: within the configured L1 bound\n"
                                    : "compare: L1 bound exceeded\n");
        return within ? 0 : 1;
    }

    if (ergodic->parsed()) {
        ConfigHandle h;
        if (!load_config(config_path, h)) return 2;
        char* json = nullptr;
        if (fpk_ergodic(h.c, t_end, out_dir.c_str(), &json) != FPK_OK) return report_error();
        emit(json);
        std::fprintf(stderr, "ergodic: done; results in %s\n", out_dir.c_str());
        return 0;
    }

    return 2;
}
