// dace-lab: command-line front end over the C API.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dace/dace.h"

namespace {

int report(dace_status st, const char* what)
{
    if (st == DACE_OK) {
        return 0;
    }
    std::fprintf(stderr, "dace-lab: %s failed (%s): %s\n", what, dace_status_name(st), dace_last_error());
    return static_cast<int>(st);
}

// DACE_LAB_SEED, when set, must be a plain non-negative integer.
bool master_seed_from_env(uint64_t& seed, bool& present)
{
    const char* raw = std::getenv("DACE_LAB_SEED");
    present = raw != nullptr && *raw != '\0';
    if (!present) {
        return true;
    }
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (errno != 0 || *end != '\0' || raw[0] == '-') {
        std::fprintf(stderr, "dace-lab: DACE_LAB_SEED='%s' is not a non-negative integer\n", raw);
        return false;
    }
    seed = v;
    return true;
}

struct RunArgs {
    std::string config;
    std::vector<std::string> overrides;
    int jobs = 1;
    std::string out;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Difficulty-aware certainty-guided exploration laboratory"};
    app.set_version_flag("--version", std::string(dace_version()));
    app.require_subcommand(1);

    const char* kinds[] = {"toy-sweep", "seq-train", "seq-ablate-beta", "seq-eval"};
    const char* blurbs[] = {"Fixed-alpha toy sweep over landscape widths",
                            "Train the tabular policy with shaped GRPO",
                            "Train once per beta threshold with matched seeds",
                            "Score a policy checkpoint with mean@k / pass@k"};
    std::vector<RunArgs> args(4);
    std::vector<CLI::App*> run_cmds;
    for (int i = 0; i < 4; ++i) {
        auto* sub = app.add_subcommand(kinds[i], blurbs[i]);
        sub->add_option("--config", args[i].config, "Experiment config (TOML)")->required();
        sub->add_option("--set", args[i].overrides, "Override a config value, e.g. --set grpo.steps=100")
            ->type_name("KEY=VALUE")
            ->allow_extra_args(false);
        sub->add_option("--jobs", args[i].jobs, "Parallel workers")->check(CLI::PositiveNumber)->default_val(1);
        sub->add_option("--out", args[i].out, "Output directory")->default_val(std::string("runs/") + kinds[i]);
        run_cmds.push_back(sub);
    }

    std::string replay_dir, replay_out;
    int replay_jobs = 1;
    auto* replay = app.add_subcommand("replay", "Re-run an experiment from its manifest");
    replay->add_option("run_dir", replay_dir, "Directory holding a manifest")->required();
    replay->add_option("--out", replay_out, "Output directory")->required();
    replay->add_option("--jobs", replay_jobs, "Parallel workers")->check(CLI::PositiveNumber)->default_val(1);

    std::string plot_dir;
    auto* plot = app.add_subcommand("plot", "Write plot_data.csv (figure,series,x,y) for a run");
    plot->add_option("run_dir", plot_dir, "Directory holding a manifest")->required();

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 4; ++i) {
        if (!run_cmds[i]->parsed()) {
            continue;
        }
        uint64_t master = 0;
        bool has_master = false;
        if (!master_seed_from_env(master, has_master)) {
            return static_cast<int>(DACE_ERR_INVALID_ARGUMENT);
        }
        std::vector<const char*> ovs;
        for (const auto& o : args[i].overrides) {
            ovs.push_back(o.c_str());
        }
        const dace_status st = dace_lab_run(kinds[i], args[i].config.c_str(), ovs.data(), ovs.size(), args[i].jobs,
                                            args[i].out.c_str(), has_master ? 1 : 0, master);
        if (st == DACE_OK) {
            std::printf("%s: artifacts in %s\n", kinds[i], args[i].out.c_str());
        }
        return report(st, kinds[i]);
    }
    if (replay->parsed()) {
        const dace_status st = dace_lab_replay(replay_dir.c_str(), replay_out.c_str(), replay_jobs);
        if (st == DACE_OK) {
            std::printf("replay: artifacts in %s\n", replay_out.c_str());
        }
        return report(st, "replay");
    }
    size_t rows = 0;
    const dace_status st = dace_lab_emit_plot_data(plot_dir.c_str(), &rows);
    if (st == DACE_OK) {
        std::printf("plot: %zu rows written to %s/plot_data.csv\n", rows, plot_dir.c_str());
    }
    return report(st, "plot");
}
