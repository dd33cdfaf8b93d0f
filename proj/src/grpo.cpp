#include "dace/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dace/certainty.hpp"
#include "dace/error.hpp"
#include "dace/format.hpp"
#include "dace/rng.hpp"

namespace dace {

namespace {

struct GroupRollouts {
    std::size_t task_index = 0;
    std::vector<Rollout> rollouts;
    std::vector<double> advantages;
};

// Mutable per-step accumulator for the metrics record.
struct StepStats {
    double total = 0.0;
    double external = 0.0;
    double certainty = 0.0;
    double entropy = 0.0;
    double length = 0.0;
    double shortcut = 0.0;
    double genuine = 0.0;
    std::size_t rollouts = 0;
    std::size_t groups = 0;
    std::size_t hard_groups = 0;
};

TrainResult run_training(const TabularPolicy& initial, std::span<const TaskInstance> tasks, const GrpoConfig& cfg,
                         const std::optional<DaceConfig>& shaping, double beta_for_metrics, std::uint64_t seed,
                         const MetricsSink& sink)
{
    cfg.validate();
    require(!tasks.empty(), "train: empty task set");
    if (shaping) {
        shaping->validate();
    }

    TrainResult result{initial, {}};
    TabularPolicy& policy = result.policy;
    const auto n = static_cast<std::size_t>(cfg.group_size);
    const std::size_t batch_tasks = std::min(tasks.size(), static_cast<std::size_t>(cfg.tasks_per_batch));

    std::vector<std::size_t> order(tasks.size());
    for (int step = 0; step < cfg.steps; ++step) {
        const std::uint64_t step_seed = derive_seed(seed, static_cast<std::uint64_t>(step));

        // Task subset without replacement (partial Fisher-Yates).
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng pick(step_seed);
        for (std::size_t j = 0; j < batch_tasks; ++j) {
            std::swap(order[j], order[j + pick.below(order.size() - j)]);
        }

        // Rollouts and rewards. Each group owns its RNG stream.
        StepStats stats;
        std::vector<GroupRollouts> groups(batch_tasks);
        for (std::size_t j = 0; j < batch_tasks; ++j) {
            GroupRollouts& g = groups[j];
            g.task_index = order[j];
            const TaskInstance& task = tasks[g.task_index];
            Rng rng(derive_seed(step_seed, j + 1));

            ResponseGroup rg;
            rg.task_id = task.task_id;
            g.rollouts.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                Rollout r = sample_response(policy, task.task_id, cfg.max_response_length, rng);
                const VerifierOutcome v = verify(task, r.tokens, cfg.max_response_length);
                rg.responses.push_back({r.tokens, r.token_log_probs});
                rg.verifier_outcomes.push_back(v.correct);

                stats.length += static_cast<double>(r.length());
                stats.entropy += std::accumulate(r.step_entropies.begin(), r.step_entropies.end(), 0.0) /
                                 static_cast<double>(r.length());
                stats.certainty += sequence_certainty(r.token_log_probs).raw;
                stats.shortcut += v.via_shortcut ? 1.0 : 0.0;
                stats.genuine += v.genuine() && !detect_hack(r.tokens) ? 1.0 : 0.0;
                g.rollouts.push_back(std::move(r));
            }

            std::vector<double> totals(n);
            double difficulty = 0.0;
            if (shaping) {
                const ShapedGroup shaped = shape_group(rg, *shaping);
                difficulty = shaped.difficulty;
                for (std::size_t i = 0; i < n; ++i) {
                    totals[i] = shaped.responses[i].total;
                    stats.external += shaped.responses[i].external;
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    totals[i] = rg.verifier_outcomes[i];
                    stats.external += totals[i];
                }
                difficulty = estimate_difficulty(rg.verifier_outcomes);
            }
            const double beta = shaping ? shaping->beta_threshold : beta_for_metrics;
            stats.hard_groups += difficulty > beta ? 1 : 0;
            stats.total += std::accumulate(totals.begin(), totals.end(), 0.0);
            stats.rollouts += n;
            ++stats.groups;
            g.advantages = group_advantages(totals, cfg.std_floor);
        }

        // Clipped-surrogate ascent; ratios are taken against the rollout-time
        // log-probabilities. Each epoch is one full-batch gradient step on
        // the token-summed objective.
        for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
            SparseGradient grad;
            double objective = 0.0;
            for (const GroupRollouts& g : groups) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double adv = g.advantages[i];
                    if (adv == 0.0) {
                        continue;
                    }
                    const Rollout& r = g.rollouts[i];
                    for (std::size_t t = 0; t < r.length(); ++t) {
                        const ContextKey ctx = context_at(r.task_id, r.tokens, t);
                        const TokenVector probs = policy.probabilities(ctx);
                        const double log_p = std::log(probs[r.tokens[t]]);
                        const double ratio = std::exp(log_p - r.token_log_probs[t]);
                        objective += clipped_surrogate(ratio, adv, cfg.eps_low, cfg.eps_high);
                        const double slope = clipped_surrogate_slope(ratio, adv, cfg.eps_low, cfg.eps_high);
                        if (slope == 0.0) {
                            continue;
                        }
                        TokenVector& row = grad[ctx];
                        const double scale = slope / policy.temperature();
                        for (int k = 0; k < kVocabSize; ++k) {
                            row[k] += scale * ((k == r.tokens[t] ? 1.0 : 0.0) - probs[k]);
                        }
                    }
                }
            }
            if (!std::isfinite(objective)) {
                throw Error(ErrorCode::Diverged, "train: non-finite surrogate loss at step " + std::to_string(step) +
                                                     ", epoch " + std::to_string(epoch));
            }
            for (const auto& [ctx, row] : grad) {
                TokenVector logits = policy.logits(ctx);
                for (int k = 0; k < kVocabSize; ++k) {
                    logits[k] += cfg.learning_rate * row[k];
                    if (!std::isfinite(logits[k])) {
                        throw Error(ErrorCode::Diverged, "train: logit at context " + ctx.to_string() +
                                                             " left the finite range at step " + std::to_string(step));
                    }
                }
                policy.set_logits(ctx, logits);
            }
        }

        TrainingMetricsRecord rec;
        rec.step = step;
        const double nr = static_cast<double>(stats.rollouts);
        rec.mean_total_reward = stats.total / nr;
        rec.mean_external_reward = stats.external / nr;
        rec.mean_raw_certainty = stats.certainty / nr;
        rec.mean_step_entropy = stats.entropy / nr;
        rec.mean_response_length = stats.length / nr;
        rec.fraction_hard = static_cast<double>(stats.hard_groups) / static_cast<double>(stats.groups);
        rec.shortcut_rate = stats.shortcut / nr;
        rec.genuine_accuracy = stats.genuine / nr;
        result.metrics.push_back(rec);
        if (sink) {
            sink(rec);
        }
    }
    return result;
}

}  // namespace

void GrpoConfig::validate() const
{
    require(group_size >= 1, "grpo: group_size must be >= 1");
    require(eps_low > 0.0 && eps_low < 1.0, "grpo: eps_low must lie in (0, 1)");
    require(eps_high > 0.0, "grpo: eps_high must be > 0");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, "grpo: learning_rate must be > 0");
    require(epochs_per_batch >= 1, "grpo: epochs_per_batch must be >= 1");
    require(tasks_per_batch >= 1, "grpo: tasks_per_batch must be >= 1");
    require(std_floor > 0.0, "grpo: std_floor must be > 0");
    require(steps >= 0, "grpo: steps must be >= 0");
    require(max_response_length >= 1, "grpo: max_response_length must be >= 1");
}

std::vector<double> group_advantages(std::span<const double> total_rewards, double std_floor)
{
    require(!total_rewards.empty(), "group_advantages: empty group");
    const double n = static_cast<double>(total_rewards.size());
    const double mean = std::accumulate(total_rewards.begin(), total_rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : total_rewards) {
        var += (r - mean) * (r - mean);
    }
    const double sd = std::sqrt(var / n);
    std::vector<double> adv(total_rewards.size(), 0.0);
    if (sd < std_floor) {
        return adv;
    }
    const double denom = std::max(sd, std_floor);
    for (std::size_t i = 0; i < adv.size(); ++i) {
        adv[i] = (total_rewards[i] - mean) / denom;
    }
    return adv;
}

double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high)
{
    require(ratio > 0.0, "clipped_surrogate: ratio must be > 0");
    const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
    return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_slope(double ratio, double advantage, double eps_low, double eps_high)
{
    require(ratio > 0.0, "clipped_surrogate_slope: ratio must be > 0");
    if ((advantage > 0.0 && ratio > 1.0 + eps_high) || (advantage < 0.0 && ratio < 1.0 - eps_low)) {
        return 0.0;
    }
    return advantage * ratio;
}

TrainResult train(const TabularPolicy& policy, std::span<const TaskInstance> tasks, const GrpoConfig& grpo_cfg,
                  const DaceConfig& dace_cfg, std::uint64_t seed, const MetricsSink& sink)
{
    return run_training(policy, tasks, grpo_cfg, dace_cfg, dace_cfg.beta_threshold, seed, sink);
}

TrainResult train_baseline(const TabularPolicy& policy, std::span<const TaskInstance> tasks,
                           const GrpoConfig& grpo_cfg, std::uint64_t seed, const MetricsSink& sink,
                           double beta_for_metrics)
{
    return run_training(policy, tasks, grpo_cfg, std::nullopt, beta_for_metrics, seed, sink);
}

EvalResult eval_from_outcomes(std::span<const std::vector<int>> outcomes)
{
    require(!outcomes.empty(), "evaluate: no tasks");
    const std::size_t k = outcomes.front().size();
    require(k >= 1, "evaluate: samples_per_task must be >= 1");
    EvalResult res;
    res.pass_curve.assign(k, 0.0);
    double correct = 0.0;
    for (const auto& row : outcomes) {
        require(row.size() == k, "evaluate: ragged outcome matrix");
        bool hit = false;
        for (std::size_t j = 0; j < k; ++j) {
            correct += row[j];
            hit = hit || row[j] == 1;
            res.pass_curve[j] += hit ? 1.0 : 0.0;
        }
    }
    const double nt = static_cast<double>(outcomes.size());
    for (double& p : res.pass_curve) {
        p /= nt;
    }
    res.mean_at_k = correct / (nt * static_cast<double>(k));
    res.pass_at_k = res.pass_curve.back();
    return res;
}

EvalResult evaluate(const TabularPolicy& policy, std::span<const TaskInstance> tasks, int samples_per_task,
                    std::uint64_t seed, int max_len)
{
    require(samples_per_task >= 1, "evaluate: samples_per_task must be >= 1");
    require(!tasks.empty(), "evaluate: empty task set");
    std::vector<std::vector<int>> outcomes(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        outcomes[i].reserve(static_cast<std::size_t>(samples_per_task));
        for (int j = 0; j < samples_per_task; ++j) {
            const Rollout r = sample_response(policy, tasks[i].task_id, max_len, rng);
            outcomes[i].push_back(verify(tasks[i], r.tokens, max_len).genuine() && !detect_hack(r.tokens) ? 1 : 0);
        }
    }
    return eval_from_outcomes(outcomes);
}

void write_metrics_csv_header(std::ostream& os)
{
    os << "step,mean_total_reward,mean_external_reward,mean_raw_certainty,mean_step_entropy,"
          "mean_response_length,fraction_hard,shortcut_rate,genuine_accuracy\n";
}

void write_metrics_csv_row(std::ostream& os, const TrainingMetricsRecord& r)
{
    os << r.step << ',' << fmt6(r.mean_total_reward) << ',' << fmt6(r.mean_external_reward) << ','
       << fmt6(r.mean_raw_certainty) << ',' << fmt6(r.mean_step_entropy) << ',' << fmt6(r.mean_response_length)
       << ',' << fmt6(r.fraction_hard) << ',' << fmt6(r.shortcut_rate) << ',' << fmt6(r.genuine_accuracy) << '\n';
}

}  // namespace dace
