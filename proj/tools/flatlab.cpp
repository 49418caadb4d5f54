#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "flatlab/bayes.hpp"
#include "flatlab/csv.hpp"
#include "flatlab/experiment.hpp"

int main(int argc, char** argv) {
    using namespace flatlab;
    CLI::App app{"Flat-minima experiments on a two-cluster Gaussian mixture"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the experiment described by a TOML config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--threads", threads, "Worker threads (default FLATLAB_THREADS or 1)");
    run->add_option("--out-dir", out_dir, "Output directory");

    auto* cmp = app.add_subcommand("compare", "Compare two CSV files column by column");
    std::string file_a, file_b, tol, report;
    std::vector<std::string> keys;
    cmp->add_option("a", file_a)->required();
    cmp->add_option("b", file_b)->required();
    cmp->add_option("--tol", tol, "Tolerances as col=v,col2=v2")->required();
    cmp->add_option("--keys", keys, "Join columns (positional join when omitted)")->delimiter(',');
    cmp->add_option("--report", report, "Write the per-cell report CSV here");

    auto* bay = app.add_subcommand("bayes", "Print the Bayes-optimal baseline");
    double alpha = 0.7, delta = 1.0, rho = 0.5;
    bay->add_option("--alpha", alpha)->check(CLI::PositiveNumber);
    bay->add_option("--delta", delta)->check(CLI::PositiveNumber);
    bay->add_option("--rho", rho)->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::kValidation;
    }

    if (*run) {
        RunOptions opts;
        opts.seed = seed;
        opts.threads = resolve_threads(threads);
        opts.out_dir = out_dir;
        RunOutcome out;
        try {
            out = run_config_file(config_path, opts);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return exit_code::kConvergence;
        }
        for (const auto& m : out.messages) (out.exit_code == exit_code::kValidation ? std::cerr : std::cout) << m << '\n';
        if (out.exit_code != exit_code::kValidation) {
            std::cout << "wrote " << out.artifacts.size() << " files to " << out.out_dir << '\n';
        }
        return out.exit_code;
    }
    if (*cmp) return compare_files(file_a, file_b, tol, keys, std::cout, report);
    if (*bay) {
        if (!(rho > 0.0 && rho < 1.0)) {
            std::cerr << "--rho must lie in (0,1)\n";
            return exit_code::kValidation;
        }
        BayesBaseline bb = bayes_baseline(alpha, delta, rho);
        std::cout << "m_opt,q_opt,b_opt,gen_err\n"
                  << format_number(bb.m_opt) << ',' << format_number(bb.q_opt) << ',' << format_number(bb.b_opt) << ','
                  << format_number(bb.gen_err) << '\n';
    }
    return exit_code::kOk;
}
