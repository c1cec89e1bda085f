// confbb: influence-function Bayesian bootstrap experiments from the command line.

#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "confbb/cli.hpp"
#include "confbb/parallel.hpp"

namespace {

unsigned threads_from_env() {
    const char* v = std::getenv("CONFBB_THREADS");
    if (v == nullptr || *v == '\0') return 0;
    try {
        return static_cast<unsigned>(std::stoul(v));
    } catch (const std::exception&) {
        return 0;
    }
}

}  // namespace

int main(int argc, char** argv) {
    using namespace confbb::cli;

    CLI::App app{"Influence-function Bayesian bootstrap with tuned Dirichlet concentration"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommandOptions opt;
    std::uint64_t seed = 0;
    int threads = -1;

    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const CommandOptions&);
    };
    const Entry entries[] = {
        {"bench", "Run the benchmark suite and write results.csv/results.json", cmd_bench},
        {"calibrate", "Tune alpha on one task and write the score curve", cmd_calibrate},
        {"oracle-compare", "Compare influence perturbations with full weighted refits", cmd_oracle_compare},
        {"consistency", "Validation/test log-score gap versus validation size", cmd_consistency},
        {"compare-dropout", "IF-BB against MC dropout on one task", cmd_compare_dropout},
    };
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", opt.config_path, "JSON config file")->required();
        sub->add_option("--out", opt.out_dir, "Output directory")->required();
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--threads", threads, "Worker threads (0 = auto); falls back to CONFBB_THREADS");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kSuccess : kConfigError;
    }

    for (const CLI::App* sub : subs)
        if (sub->count("--seed") > 0) opt.seed = seed;
    confbb::parallel::set_threads(threads >= 0 ? static_cast<unsigned>(threads) : threads_from_env());

    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) return run_command(entries[i].fn, opt, entries[i].name);
    return kConfigError;
}
