#pragma once

// Experiment harness: strict config loading, seeded orchestration of the toy
// sweep and the sequence trainer, and CSV/manifest/plot-data emission.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dace/gaussian_toy.hpp"
#include "dace/grpo.hpp"
#include "dace/shaping.hpp"

namespace dace::harness {

enum class ExperimentKind { ToySweep, SeqTrain, SeqAblateBeta, SeqEval };

std::string_view kind_name(ExperimentKind kind);
std::optional<ExperimentKind> kind_from_name(std::string_view name);

struct TaskSpec {
    int num_tasks = 32;
    std::vector<int> tiers{1, 2};
    std::vector<double> fractions{0.5, 0.5};
    std::uint64_t seed = 11;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ToySweep;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    // toy-sweep
    toy::ToyTrainConfig toy;
    toy::RewardLandscapeConfig landscape;
    std::vector<double> sweep_alphas{-0.1, -0.05, 0.0, 0.05};
    std::vector<double> sweep_widths{0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};

    // sequence experiments
    TaskSpec tasks;
    double temperature = 0.6;
    GrpoConfig grpo;
    DaceConfig dace;
    int eval_samples_per_task = 32;
    std::vector<double> ablate_betas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    int warmup_steps = 50;
    // seq-eval only: policy checkpoint to score.
    std::string checkpoint;

    void validate() const;
};

/// Parses config text. `overrides` are "dotted.key=value" strings applied on
/// top of the file. Unknown keys and type mismatches are errors.
ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical text listing every field; parse_config(to_toml(c)) == c.
std::string to_toml(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string code_version();

struct RunOptions {
    int jobs = 1;
    // When set, replaces the seed list with derive_seed(master_seed, i).
    std::optional<std::uint64_t> master_seed;
};

/// Runs the experiment and writes every artifact into `out_dir`, which is
/// created if missing. Returns the list of files written (relative names).
std::vector<std::string> run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             const RunOptions& opts = {});

/// Re-runs the experiment recorded in `run_dir`'s manifest into `out_dir`.
std::vector<std::string> replay(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                                int jobs = 1);

/// Writes run_dir/plot_data.csv (figure,series,x,y) from the run's CSVs.
/// Returns the number of data rows.
std::size_t emit_plot_data(const std::filesystem::path& run_dir);

}  // namespace dace::harness
