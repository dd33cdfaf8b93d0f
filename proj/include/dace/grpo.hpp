#pragma once

// Group-relative policy optimization over the tabular policy, with the
// asymmetric (clip-higher) PPO surrogate and no entropy or KL terms.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dace/seq_env.hpp"
#include "dace/seq_policy.hpp"
#include "dace/shaping.hpp"

namespace dace {

struct GrpoConfig {
    int group_size = 16;
    double eps_low = 0.2;
    double eps_high = 0.28;
    // Tabular default; large-model runs use 1e-6 with a transformer.
    double learning_rate = 0.05;
    int epochs_per_batch = 2;
    int tasks_per_batch = 8;
    double std_floor = 1e-6;
    int steps = 200;
    int max_response_length = kMaxResponseLength;

    void validate() const;
};

struct TrainingMetricsRecord {
    int step = 0;
    double mean_total_reward = 0.0;
    double mean_external_reward = 0.0;
    double mean_raw_certainty = 0.0;
    double mean_step_entropy = 0.0;
    double mean_response_length = 0.0;
    double fraction_hard = 0.0;
    double shortcut_rate = 0.0;
    // Share of rollouts that are correct and carry no forbidden token.
    double genuine_accuracy = 0.0;
};

/// (r_i - mean) / max(population std, std_floor); all zeros when the
/// population std falls below std_floor.
std::vector<double> group_advantages(std::span<const double> total_rewards, double std_floor);

/// min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A).
double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high);

/// d surrogate / d log-ratio: A * r inside the trust region, 0 where the
/// clipped branch is selected.
double clipped_surrogate_slope(double ratio, double advantage, double eps_low, double eps_high);

struct TrainResult {
    TabularPolicy policy;
    std::vector<TrainingMetricsRecord> metrics;
};

using MetricsSink = std::function<void(const TrainingMetricsRecord&)>;

/// Shaped training: rewards come from shape_group on every rollout group.
TrainResult train(const TabularPolicy& policy, std::span<const TaskInstance> tasks, const GrpoConfig& grpo_cfg,
                  const DaceConfig& dace_cfg, std::uint64_t seed, const MetricsSink& sink = {});

/// Shaping-free reference: rewards are the raw verifier outcomes.
/// `beta_for_metrics` only feeds the fraction_hard column.
TrainResult train_baseline(const TabularPolicy& policy, std::span<const TaskInstance> tasks,
                           const GrpoConfig& grpo_cfg, std::uint64_t seed, const MetricsSink& sink = {},
                           double beta_for_metrics = 0.4);

struct EvalResult {
    double mean_at_k = 0.0;
    double pass_at_k = 0.0;
    // pass@j for j = 1..k over the same sample pool.
    std::vector<double> pass_curve;
};

/// A sample counts only if it is correct and carries no forbidden token.
EvalResult evaluate(const TabularPolicy& policy, std::span<const TaskInstance> tasks, int samples_per_task,
                    std::uint64_t seed, int max_len = kMaxResponseLength);

/// Same metrics from a tasks x k matrix of 0/1 outcomes.
EvalResult eval_from_outcomes(std::span<const std::vector<int>> outcomes);

// step,mean_total_reward,mean_external_reward,mean_raw_certainty,mean_step_entropy,mean_response_length,fraction_hard,shortcut_rate
void write_metrics_csv_header(std::ostream& os);
void write_metrics_csv_row(std::ostream& os, const TrainingMetricsRecord& rec);

}  // namespace dace
