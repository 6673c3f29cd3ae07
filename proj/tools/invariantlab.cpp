#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "invariantlab/cli.hpp"

using namespace invariantlab;

int main(int argc, char** argv) {
    CLI::App app{"invariant-set toolkit for holomorphic maps of C^k"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    int threads = 0;
    bool verbose = false;

    const std::map<std::string, std::string> blurb = {
        {"henon-k", "escape-time bounded set: K cloud plus forward/backward slice images"},
        {"birkhoff", "forward-invariant compact touching the domain boundary, via damping"},
        {"classify", "recurrence scan and attracting / rotation / intermediate classification"},
        {"hull-test", "polynomial-hull invariance check on a configured cloud"},
        {"linearize", "averaged conjugacy toward the linear part at the origin"},
        {"decay", "distance decay of an iterated cloud toward the bounded set"},
        {"core-intersect", "intersection of forward images of the bounded set"},
        {"shared-k", "compare bounded sets of two commuting maps"}};

    for (const std::string& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name, blurb.at(name));
        sub->add_option("--config,-c", config_path, "key=value config file");
        sub->add_option("--out,-o", out_dir, "output directory (default from config)");
        sub->add_option("--seed", seed, "random-stream seed override");
        sub->add_option("--threads", threads,
                        "worker budget (default: INVARIANTLAB_THREADS or hardware)");
        sub->add_flag("--verbose,-v", verbose, "progress notes on stderr");
    }

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    std::string text;
    if (!config_path.empty()) {
        try {
            text = read_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "config: " << e.what() << "\n";
            return 2;
        }
    }

    RunConfig cfg;
    try {
        cfg = parse_config(text);
    } catch (const ConfigParseError& e) {
        for (const ConfigError& err : e.errors) std::cerr << "config: " << err.render() << "\n";
        return 2;
    }

    cfg.command = sub->get_name();
    if (sub->count("--out")) cfg.out = out_dir;
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--threads")) cfg.threads = threads;

    return run_command(cfg, verbose ? &std::cerr : nullptr);
}
