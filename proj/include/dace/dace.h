/*
 * dace.h - C interface to the DACE laboratory.
 *
 * Every function returns a dace_status. On failure, dace_last_error() gives
 * a message for the calling thread, valid until that thread's next call into
 * the library. Objects are opaque handles released with their _free function;
 * passing NULL to a _free function is a no-op.
 */
#ifndef DACE_H
#define DACE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DACE_API __declspec(dllexport)
#else
#define DACE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dace_status {
    DACE_OK = 0,
    DACE_ERR_INVALID_ARGUMENT = 1,
    DACE_ERR_DIVERGED = 2,
    DACE_ERR_IO = 3,
    DACE_ERR_PARSE = 4,
    DACE_ERR_INTERNAL = 5
} dace_status;

DACE_API const char* dace_last_error(void);
DACE_API const char* dace_status_name(dace_status status);
DACE_API const char* dace_version(void);

/* ---- toy Gaussian policy ------------------------------------------------ */

typedef struct dace_gaussian_policy {
    double mean;
    double log_std;
} dace_gaussian_policy;

typedef struct dace_landscape {
    double mode_offset;
    double narrow_width;
    double wide_width;
} dace_landscape;

typedef enum dace_toy_optimizer { DACE_TOY_SGD = 0, DACE_TOY_ADAM = 1 } dace_toy_optimizer;

typedef struct dace_toy_config {
    double alpha;
    double learning_rate;
    double clip_epsilon;
    int epochs_per_update;
    int batch_size;
    int iterations;
    int steps_per_iteration;
    double init_mean;
    double init_std;
    uint64_t seed;
    dace_toy_optimizer optimizer;
} dace_toy_config;

typedef struct dace_toy_record {
    int iteration;
    double mean;
    double stddev;
    double expected_reward;
    double surrogate_loss;
} dace_toy_record;

typedef struct dace_toy_trace dace_toy_trace;

DACE_API dace_status dace_landscape_default(dace_landscape* out);
DACE_API dace_status dace_landscape_reward(const dace_landscape* cfg, double action, double* out);
DACE_API dace_status dace_expected_reward(const dace_gaussian_policy* policy, const dace_landscape* cfg,
                                          double* out);

DACE_API dace_status dace_toy_config_default(dace_toy_config* out);
DACE_API dace_status dace_toy_train(const dace_toy_config* cfg, const dace_landscape* land, dace_toy_trace** out);
DACE_API size_t dace_toy_trace_length(const dace_toy_trace* trace);
DACE_API dace_status dace_toy_trace_get(const dace_toy_trace* trace, size_t index, dace_toy_record* out);
DACE_API void dace_toy_trace_free(dace_toy_trace* trace);

/* ---- certainty and shaping ---------------------------------------------- */

typedef enum dace_certainty_sign { DACE_SIGN_CONFIDENCE = 0, DACE_SIGN_SURPRISAL = 1 } dace_certainty_sign;

typedef struct dace_shaping_config {
    double alpha_scale;
    double beta_threshold;
    int hack_penalty_enabled;
    int intrinsic_enabled;
    dace_certainty_sign certainty_sign;
} dace_shaping_config;

typedef struct dace_reward_breakdown {
    double external;
    double intrinsic;
    double total;
    double coefficient;
    double raw_certainty;
    double normalized_certainty;
    int hack_flag;
} dace_reward_breakdown;

DACE_API dace_status dace_sequence_certainty(const double* token_log_probs, size_t n, double* raw,
                                             double* surprisal);
/* out receives n values in [0, 1]. */
DACE_API dace_status dace_normalize_group(const double* scores, size_t n, double* out);
DACE_API dace_status dace_estimate_difficulty(const int* outcomes, size_t n, double* out);

DACE_API dace_status dace_shaping_config_default(dace_shaping_config* out);
DACE_API dace_status dace_adaptive_coefficient(double difficulty, const dace_shaping_config* cfg, double* out);
/* Token ids are 0..15. Returns 1 in *out when the SHORTCUT token occurs. */
DACE_API dace_status dace_detect_hack(const uint8_t* tokens, size_t n, int* out);

/* A group of n responses; response i has lengths[i] tokens and as many
 * log-probabilities. out receives n breakdowns. */
DACE_API dace_status dace_shape_group(const dace_shaping_config* cfg, size_t n, const uint8_t* const* tokens,
                                      const double* const* token_log_probs, const size_t* lengths,
                                      const int* verifier_outcomes, dace_reward_breakdown* out,
                                      double* difficulty);

/* ---- tasks ------------------------------------------------------------- */

typedef struct dace_taskset dace_taskset;

DACE_API dace_status dace_taskset_generate(int num_tasks, const int* tiers, const double* fractions,
                                           size_t num_tiers, uint64_t seed, dace_taskset** out);
DACE_API dace_status dace_taskset_load(const char* path, dace_taskset** out);
DACE_API dace_status dace_taskset_save(const dace_taskset* tasks, const char* path);
DACE_API size_t dace_taskset_size(const dace_taskset* tasks);
DACE_API dace_status dace_taskset_tier(const dace_taskset* tasks, size_t index, int* out);
/* Writes up to `capacity` answer tokens (digits then EOS); *length gets the
 * full answer length. */
DACE_API dace_status dace_taskset_answer(const dace_taskset* tasks, size_t index, uint8_t* buffer, size_t capacity,
                                         size_t* length);
DACE_API dace_status dace_verify(const dace_taskset* tasks, size_t index, const uint8_t* response, size_t n,
                                 int* correct, int* via_shortcut);
DACE_API void dace_taskset_free(dace_taskset* tasks);

/* ---- tabular policy ---------------------------------------------------- */

typedef struct dace_policy dace_policy;

DACE_API dace_status dace_policy_create(double temperature, dace_policy** out);
DACE_API dace_status dace_policy_load(const char* path, dace_policy** out);
DACE_API dace_status dace_policy_save(const dace_policy* policy, const char* path);
/* Log-probability of a token sequence for the given task. */
DACE_API dace_status dace_policy_sequence_log_prob(const dace_policy* policy, int64_t task_id,
                                                   const uint8_t* tokens, size_t n, double* out);
DACE_API void dace_policy_free(dace_policy* policy);

/* ---- GRPO -------------------------------------------------------------- */

typedef struct dace_grpo_config {
    int group_size;
    double eps_low;
    double eps_high;
    double learning_rate;
    int epochs_per_batch;
    int tasks_per_batch;
    double std_floor;
    int steps;
    int max_response_length;
} dace_grpo_config;

typedef struct dace_metrics_record {
    int step;
    double mean_total_reward;
    double mean_external_reward;
    double mean_raw_certainty;
    double mean_step_entropy;
    double mean_response_length;
    double fraction_hard;
    double shortcut_rate;
    double genuine_accuracy;
} dace_metrics_record;

typedef struct dace_metrics dace_metrics;

DACE_API dace_status dace_grpo_config_default(dace_grpo_config* out);
DACE_API dace_status dace_group_advantages(const double* rewards, size_t n, double std_floor, double* out);
DACE_API dace_status dace_clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high,
                                            double* out);

/* Trains `policy` in place. A NULL shaping config trains on raw verifier
 * outcomes. *metrics may be NULL if the caller does not want the records. */
DACE_API dace_status dace_train(dace_policy* policy, const dace_taskset* tasks, const dace_grpo_config* grpo,
                                const dace_shaping_config* shaping, uint64_t seed, dace_metrics** metrics);
DACE_API size_t dace_metrics_length(const dace_metrics* metrics);
DACE_API dace_status dace_metrics_get(const dace_metrics* metrics, size_t index, dace_metrics_record* out);
DACE_API void dace_metrics_free(dace_metrics* metrics);

DACE_API dace_status dace_evaluate(const dace_policy* policy, const dace_taskset* tasks, int samples_per_task,
                                   uint64_t seed, double* mean_at_k, double* pass_at_k);

/* ---- experiment harness ------------------------------------------------ */

/* kind may be NULL to take the kind from the config file; otherwise it must
 * agree with it. master_seed is used only when has_master_seed != 0. */
DACE_API dace_status dace_lab_run(const char* kind, const char* config_path, const char* const* overrides,
                                  size_t num_overrides, int jobs, const char* out_dir, int has_master_seed,
                                  uint64_t master_seed);
DACE_API dace_status dace_lab_replay(const char* run_dir, const char* out_dir, int jobs);
DACE_API dace_status dace_lab_emit_plot_data(const char* run_dir, size_t* rows);

#ifdef __cplusplus
}
#endif

#endif /* DACE_H */
