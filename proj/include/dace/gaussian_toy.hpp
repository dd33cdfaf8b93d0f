#pragma once

// One-dimensional Gaussian policy on a bimodal reward landscape, trained by
// PPO with a fixed certainty term alpha * log(sigma) in the objective.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dace::toy {

inline constexpr double kMinLogStd = -6.907755278982137;  // ln(1e-3)
inline constexpr double kMaxLogStd = 6.907755278982137;   // ln(1e3)

struct GaussianPolicyParams {
    double mean = 0.0;
    double log_std = 0.0;

    double stddev() const;
    double log_prob(double action) const;
};

/// Narrow mode sits at -mode_offset, the fixed-width mode at +mode_offset.
struct RewardLandscapeConfig {
    double mode_offset = 2.0;
    double narrow_width = 1.0;
    double wide_width = 1.0;

    void validate() const;
};

enum class ToyOptimizer { Adam, Sgd };

struct ToyTrainConfig {
    double alpha = 0.0;
    double learning_rate = 0.01;
    double clip_epsilon = 0.2;
    int epochs_per_update = 10;
    int batch_size = 64;
    int iterations = 34;
    // Logging cadence only; every iteration draws batch_size fresh samples.
    int steps_per_iteration = 32;
    double init_mean = 0.0;
    double init_std = 1.0;
    std::uint64_t seed = 0;
    ToyOptimizer optimizer = ToyOptimizer::Sgd;

    void validate() const;
};

struct ToyTraceRecord {
    int iteration = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double expected_reward = 0.0;
    double surrogate_loss = 0.0;
};

using ToyTrainTrace = std::vector<ToyTraceRecord>;

double landscape_reward(double action, const RewardLandscapeConfig& cfg);

/// Exact E[R(a)] under the Gaussian policy (closed-form Gaussian convolution).
double expected_reward(const GaussianPolicyParams& policy, const RewardLandscapeConfig& cfg);

/// Monte-Carlo estimate of E[R(a)]; returns (mean, standard error).
std::pair<double, double> expected_reward_mc(const GaussianPolicyParams& policy,
                                             const RewardLandscapeConfig& cfg,
                                             std::size_t samples, std::uint64_t seed);

struct Gradient2 {
    double mean = 0.0;
    double log_std = 0.0;
};

/// Clipped PPO surrogate over a fixed batch plus the certainty term:
///   J(theta) = 1/B * sum_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) + alpha * log_std
/// where r_i = pi_theta(a_i) / pi_old(a_i).
class ToySurrogate {
public:
    ToySurrogate(std::vector<double> actions, std::vector<double> old_log_probs,
                 std::vector<double> advantages, double clip_epsilon, double alpha);

    double value(const GaussianPolicyParams& params) const;
    Gradient2 gradient(const GaussianPolicyParams& params) const;

    std::span<const double> actions() const { return actions_; }
    std::span<const double> old_log_probs() const { return old_log_probs_; }

private:
    std::vector<double> actions_;
    std::vector<double> old_log_probs_;
    std::vector<double> advantages_;
    double clip_epsilon_;
    double alpha_;
};

/// Throws dace::Error(Diverged) if |mean| > 1e6 or the expected reward goes
/// non-finite.
ToyTrainTrace ppo_toy_train(const ToyTrainConfig& train_cfg, const RewardLandscapeConfig& land_cfg);

struct SweepRow {
    double alpha = 0.0;
    double sigma_r1 = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    double final_mean = 0.0;
    double final_std = 0.0;
    double final_expected_reward = 0.0;
    std::string error;
    ToyTrainTrace trace;
};

struct SweepCell {
    double alpha = 0.0;
    double sigma_r1 = 0.0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double mean_reward = 0.0;
    // Sample standard deviation over successful seeds (0 for a single seed).
    double std_reward = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;   // alpha-major, then width, then seed
    std::vector<SweepCell> cells; // alpha-major, then width
};

/// Runs every (alpha, width, seed) combination. Per-cell failures are
/// recorded in the row instead of aborting the sweep. `jobs` > 1 evaluates
/// rows on worker threads; results do not depend on it.
SweepResult fixed_strategy_sweep(std::span<const double> alphas, std::span<const double> widths,
                                 std::span<const std::uint64_t> seeds,
                                 const ToyTrainConfig& base_train, const RewardLandscapeConfig& base_land,
                                 int jobs = 1);

SweepCell aggregate_cell(double alpha, double sigma_r1, std::span<const SweepRow> rows);

// CSV: alpha,sigma_r1,seed,final_mean,final_std,final_expected_reward
void write_sweep_rows_csv(std::ostream& os, const SweepResult& result);
void write_sweep_cells_csv(std::ostream& os, const SweepResult& result);

}  // namespace dace::toy
