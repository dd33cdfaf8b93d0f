#include "dace/gaussian_toy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include "dace/error.hpp"
#include "dace/format.hpp"
#include "dace/rng.hpp"

namespace dace::toy {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double gaussian_bump(double x, double center, double width)
{
    const double d = (x - center) / width;
    return std::exp(-0.5 * d * d);
}

double clamp_log_std(double v) { return std::clamp(v, kMinLogStd, kMaxLogStd); }

struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double m[2] = {0.0, 0.0};
    double v[2] = {0.0, 0.0};
    int t = 0;

    // Ascent step.
    void step(double* params, const double* grad)
    {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (int k = 0; k < 2; ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            params[k] += lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
    }
};

}  // namespace

double GaussianPolicyParams::stddev() const { return std::exp(log_std); }

double GaussianPolicyParams::log_prob(double action) const
{
    const double z = (action - mean) / stddev();
    return -0.5 * z * z - log_std - kHalfLog2Pi;
}

void RewardLandscapeConfig::validate() const
{
    require(std::isfinite(mode_offset), "landscape: mode_offset must be finite");
    require(std::isfinite(narrow_width) && narrow_width > 0.0, "landscape: narrow_width must be > 0");
    require(std::isfinite(wide_width) && wide_width > 0.0, "landscape: wide_width must be > 0");
}

void ToyTrainConfig::validate() const
{
    require(std::isfinite(alpha), "toy: alpha must be finite");
    require(learning_rate > 0.0, "toy: learning_rate must be > 0");
    require(clip_epsilon > 0.0 && clip_epsilon < 1.0, "toy: clip_epsilon must be in (0, 1)");
    require(epochs_per_update >= 1, "toy: epochs_per_update must be >= 1");
    require(batch_size >= 2, "toy: batch_size must be >= 2");
    require(iterations >= 1, "toy: iterations must be >= 1");
    require(steps_per_iteration >= 1, "toy: steps_per_iteration must be >= 1");
    require(std::isfinite(init_mean), "toy: init_mean must be finite");
    require(std::isfinite(init_std) && init_std > 0.0, "toy: init_std must be > 0");
}

double landscape_reward(double action, const RewardLandscapeConfig& cfg)
{
    cfg.validate();
    require(std::isfinite(action), "landscape_reward: action must be finite");
    return gaussian_bump(action, -cfg.mode_offset, cfg.narrow_width) +
           gaussian_bump(action, cfg.mode_offset, cfg.wide_width);
}

double expected_reward(const GaussianPolicyParams& policy, const RewardLandscapeConfig& cfg)
{
    cfg.validate();
    require(std::isfinite(policy.mean) && std::isfinite(policy.log_std),
            "expected_reward: policy parameters must be finite");
    const double var_p = std::exp(2.0 * policy.log_std);
    auto mode = [&](double center, double width) {
        const double s2 = width * width + var_p;
        const double d = policy.mean - center;
        return width / std::sqrt(s2) * std::exp(-0.5 * d * d / s2);
    };
    return mode(-cfg.mode_offset, cfg.narrow_width) + mode(cfg.mode_offset, cfg.wide_width);
}

std::pair<double, double> expected_reward_mc(const GaussianPolicyParams& policy,
                                             const RewardLandscapeConfig& cfg, std::size_t samples,
                                             std::uint64_t seed)
{
    require(samples >= 2, "expected_reward_mc: need at least two samples");
    Rng rng(seed);
    const double sd = policy.stddev();
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double r = landscape_reward(policy.mean + sd * rng.normal(), cfg);
        sum += r;
        sum_sq += r * r;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

ToySurrogate::ToySurrogate(std::vector<double> actions, std::vector<double> old_log_probs,
                           std::vector<double> advantages, double clip_epsilon, double alpha)
    : actions_(std::move(actions)),
      old_log_probs_(std::move(old_log_probs)),
      advantages_(std::move(advantages)),
      clip_epsilon_(clip_epsilon),
      alpha_(alpha)
{
    require(!actions_.empty(), "ToySurrogate: empty batch");
    require(actions_.size() == old_log_probs_.size() && actions_.size() == advantages_.size(),
            "ToySurrogate: batch arrays differ in length");
}

double ToySurrogate::value(const GaussianPolicyParams& params) const
{
    double total = 0.0;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        const double ratio = std::exp(params.log_prob(actions_[i]) - old_log_probs_[i]);
        const double clipped = std::clamp(ratio, 1.0 - clip_epsilon_, 1.0 + clip_epsilon_);
        total += std::min(ratio * advantages_[i], clipped * advantages_[i]);
    }
    return total / static_cast<double>(actions_.size()) + alpha_ * params.log_std;
}

Gradient2 ToySurrogate::gradient(const GaussianPolicyParams& params) const
{
    const double inv_var = std::exp(-2.0 * params.log_std);
    Gradient2 g;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        const double adv = advantages_[i];
        const double ratio = std::exp(params.log_prob(actions_[i]) - old_log_probs_[i]);
        // The min() selects the constant clipped branch outside the trust region.
        const bool clipped = (adv > 0.0 && ratio > 1.0 + clip_epsilon_) ||
                             (adv < 0.0 && ratio < 1.0 - clip_epsilon_);
        if (clipped || adv == 0.0) {
            continue;
        }
        const double d = actions_[i] - params.mean;
        g.mean += adv * ratio * d * inv_var;
        g.log_std += adv * ratio * (d * d * inv_var - 1.0);
    }
    const double n = static_cast<double>(actions_.size());
    g.mean /= n;
    g.log_std = g.log_std / n + alpha_;
    return g;
}

ToyTrainTrace ppo_toy_train(const ToyTrainConfig& cfg, const RewardLandscapeConfig& land)
{
    cfg.validate();
    land.validate();

    Rng rng(cfg.seed);
    GaussianPolicyParams policy{cfg.init_mean, clamp_log_std(std::log(cfg.init_std))};
    Adam adam{cfg.learning_rate};

    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    ToyTrainTrace trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<double> actions(batch);
        std::vector<double> old_lp(batch);
        std::vector<double> rewards(batch);
        const double sd = policy.stddev();
        double reward_sum = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            actions[i] = policy.mean + sd * rng.normal();
            old_lp[i] = policy.log_prob(actions[i]);
            rewards[i] = landscape_reward(actions[i], land);
            reward_sum += rewards[i];
        }
        const double baseline = reward_sum / static_cast<double>(batch);
        for (double& r : rewards) {
            r -= baseline;
        }
        const ToySurrogate surrogate(std::move(actions), std::move(old_lp), std::move(rewards),
                                     cfg.clip_epsilon, cfg.alpha);

        for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
            const Gradient2 g = surrogate.gradient(policy);
            double params[2] = {policy.mean, policy.log_std};
            const double grad[2] = {g.mean, g.log_std};
            if (cfg.optimizer == ToyOptimizer::Adam) {
                adam.step(params, grad);
            } else {
                params[0] += cfg.learning_rate * grad[0];
                params[1] += cfg.learning_rate * grad[1];
            }
            policy.mean = params[0];
            policy.log_std = clamp_log_std(params[1]);
        }

        ToyTraceRecord rec;
        rec.iteration = it;
        rec.mean = policy.mean;
        rec.stddev = policy.stddev();
        rec.surrogate_loss = -surrogate.value(policy);
        if (!(std::abs(policy.mean) <= 1e6)) {
            throw Error(ErrorCode::Diverged,
                        "ppo_toy_train: policy mean diverged (|mean| = " + fmt6(std::abs(policy.mean)) +
                            ") at iteration " + std::to_string(it));
        }
        rec.expected_reward = expected_reward(policy, land);
        if (!std::isfinite(rec.expected_reward)) {
            throw Error(ErrorCode::Diverged,
                        "ppo_toy_train: expected reward is not finite at iteration " + std::to_string(it));
        }
        trace.push_back(rec);
    }
    return trace;
}

SweepCell aggregate_cell(double alpha, double sigma_r1, std::span<const SweepRow> rows)
{
    SweepCell cell{alpha, sigma_r1};
    double sum = 0.0;
    for (const auto& r : rows) {
        if (r.ok) {
            ++cell.n_ok;
            sum += r.final_expected_reward;
        } else {
            ++cell.n_failed;
        }
    }
    if (cell.n_ok == 0) {
        cell.mean_reward = std::nan("");
        cell.std_reward = std::nan("");
        return cell;
    }
    cell.mean_reward = sum / static_cast<double>(cell.n_ok);
    if (cell.n_ok > 1) {
        double ss = 0.0;
        for (const auto& r : rows) {
            if (r.ok) {
                const double d = r.final_expected_reward - cell.mean_reward;
                ss += d * d;
            }
        }
        cell.std_reward = std::sqrt(ss / static_cast<double>(cell.n_ok - 1));
    }
    return cell;
}

SweepResult fixed_strategy_sweep(std::span<const double> alphas, std::span<const double> widths,
                                 std::span<const std::uint64_t> seeds, const ToyTrainConfig& base_train,
                                 const RewardLandscapeConfig& base_land, int jobs)
{
    require(!alphas.empty() && !widths.empty() && !seeds.empty(), "fixed_strategy_sweep: empty grid");

    SweepResult result;
    for (double a : alphas) {
        for (double w : widths) {
            for (std::uint64_t s : seeds) {
                SweepRow row;
                row.alpha = a;
                row.sigma_r1 = w;
                row.seed = s;
                result.rows.push_back(std::move(row));
            }
        }
    }

    auto run_row = [&](SweepRow& row) {
        ToyTrainConfig tc = base_train;
        tc.alpha = row.alpha;
        tc.seed = row.seed;
        RewardLandscapeConfig lc = base_land;
        lc.narrow_width = row.sigma_r1;
        try {
            row.trace = ppo_toy_train(tc, lc);
            const auto& last = row.trace.back();
            row.final_mean = last.mean;
            row.final_std = last.stddev;
            row.final_expected_reward = last.expected_reward;
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
            row.final_mean = row.final_std = row.final_expected_reward = std::nan("");
        }
    };

    const std::size_t n_workers = static_cast<std::size_t>(std::max(1, jobs));
    if (n_workers == 1) {
        for (auto& row : result.rows) {
            run_row(row);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < result.rows.size(); i = next++) {
                    run_row(result.rows[i]);
                }
            });
        }
    }

    const std::size_t per_cell = seeds.size();
    for (std::size_t c = 0; c * per_cell < result.rows.size(); ++c) {
        std::span<const SweepRow> cell_rows(result.rows.data() + c * per_cell, per_cell);
        result.cells.push_back(aggregate_cell(cell_rows[0].alpha, cell_rows[0].sigma_r1, cell_rows));
    }
    return result;
}

void write_sweep_rows_csv(std::ostream& os, const SweepResult& result)
{
    os << "alpha,sigma_r1,seed,final_mean,final_std,final_expected_reward\n";
    for (const auto& r : result.rows) {
        os << fmt6(r.alpha) << ',' << fmt6(r.sigma_r1) << ',' << r.seed << ',' << fmt6(r.final_mean) << ','
           << fmt6(r.final_std) << ',' << fmt6(r.final_expected_reward) << '\n';
    }
}

void write_sweep_cells_csv(std::ostream& os, const SweepResult& result)
{
    os << "alpha,sigma_r1,n_ok,n_failed,mean_final_expected_reward,std_final_expected_reward,status\n";
    for (const auto& c : result.cells) {
        os << fmt6(c.alpha) << ',' << fmt6(c.sigma_r1) << ',' << c.n_ok << ',' << c.n_failed << ','
           << fmt6(c.mean_reward) << ',' << fmt6(c.std_reward) << ','
           << (c.n_failed == 0 ? "ok" : (c.n_ok == 0 ? "failed" : "partial")) << '\n';
    }
}

}  // namespace dace::toy
