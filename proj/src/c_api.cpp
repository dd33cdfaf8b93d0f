#include "dace/dace.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "dace/certainty.hpp"
#include "dace/error.hpp"
#include "dace/gaussian_toy.hpp"
#include "dace/grpo.hpp"
#include "dace/harness.hpp"
#include "dace/seq_env.hpp"
#include "dace/seq_policy.hpp"
#include "dace/shaping.hpp"

struct dace_toy_trace {
    dace::toy::ToyTrainTrace trace;
};

struct dace_taskset {
    std::vector<dace::TaskInstance> tasks;
};

struct dace_policy {
    dace::TabularPolicy policy;
};

struct dace_metrics {
    std::vector<dace::TrainingMetricsRecord> records;
};

namespace {

thread_local std::string g_last_error;

dace_status fail(dace_status status, const std::string& msg)
{
    g_last_error = msg;
    return status;
}

dace_status from_code(dace::ErrorCode code)
{
    switch (code) {
    case dace::ErrorCode::InvalidArgument: return DACE_ERR_INVALID_ARGUMENT;
    case dace::ErrorCode::Diverged: return DACE_ERR_DIVERGED;
    case dace::ErrorCode::Io: return DACE_ERR_IO;
    case dace::ErrorCode::Parse: return DACE_ERR_PARSE;
    case dace::ErrorCode::Internal: return DACE_ERR_INTERNAL;
    }
    return DACE_ERR_INTERNAL;
}

// Runs body(), translating exceptions into status codes.
template <class F>
dace_status guarded(F&& body)
{
    g_last_error.clear();
    try {
        body();
        return DACE_OK;
    } catch (const dace::Error& e) {
        return fail(from_code(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(DACE_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(DACE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(DACE_ERR_INTERNAL, "unknown error");
    }
}

void need(const void* p, const char* name)
{
    if (p == nullptr) {
        dace::throw_invalid(std::string(name) + " must not be NULL");
    }
}

dace::toy::RewardLandscapeConfig to_cpp(const dace_landscape& l)
{
    return {l.mode_offset, l.narrow_width, l.wide_width};
}

dace::DaceConfig to_cpp(const dace_shaping_config& c)
{
    dace::DaceConfig d;
    d.alpha_scale = c.alpha_scale;
    d.beta_threshold = c.beta_threshold;
    d.hack_penalty_enabled = c.hack_penalty_enabled != 0;
    d.intrinsic_enabled = c.intrinsic_enabled != 0;
    if (c.certainty_sign != DACE_SIGN_CONFIDENCE && c.certainty_sign != DACE_SIGN_SURPRISAL) {
        dace::throw_invalid("unknown certainty sign");
    }
    d.certainty_sign = c.certainty_sign == DACE_SIGN_CONFIDENCE ? dace::CertaintySign::Confidence
                                                                : dace::CertaintySign::Surprisal;
    return d;
}

dace::GrpoConfig to_cpp(const dace_grpo_config& c)
{
    dace::GrpoConfig g;
    g.group_size = c.group_size;
    g.eps_low = c.eps_low;
    g.eps_high = c.eps_high;
    g.learning_rate = c.learning_rate;
    g.epochs_per_batch = c.epochs_per_batch;
    g.tasks_per_batch = c.tasks_per_batch;
    g.std_floor = c.std_floor;
    g.steps = c.steps;
    g.max_response_length = c.max_response_length;
    return g;
}

dace::TokenSeq tokens_in(const uint8_t* tokens, size_t n)
{
    if (n > 0) {
        need(tokens, "tokens");
    }
    return dace::TokenSeq(tokens, tokens + n);
}

const dace::TaskInstance& task_at(const dace_taskset* ts, size_t index)
{
    need(ts, "tasks");
    if (index >= ts->tasks.size()) {
        dace::throw_invalid("task index out of range");
    }
    return ts->tasks[index];
}

}  // namespace

extern "C" {

const char* dace_last_error(void) { return g_last_error.c_str(); }

const char* dace_status_name(dace_status status)
{
    switch (status) {
    case DACE_OK: return "ok";
    case DACE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DACE_ERR_DIVERGED: return "diverged";
    case DACE_ERR_IO: return "i/o error";
    case DACE_ERR_PARSE: return "parse error";
    case DACE_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* dace_version(void)
{
    static const std::string v = dace::harness::code_version();
    return v.c_str();
}

dace_status dace_landscape_default(dace_landscape* out)
{
    return guarded([&] {
        need(out, "out");
        const dace::toy::RewardLandscapeConfig d;
        *out = {d.mode_offset, d.narrow_width, d.wide_width};
    });
}

dace_status dace_landscape_reward(const dace_landscape* cfg, double action, double* out)
{
    return guarded([&] {
        need(cfg, "cfg");
        need(out, "out");
        *out = dace::toy::landscape_reward(action, to_cpp(*cfg));
    });
}

dace_status dace_expected_reward(const dace_gaussian_policy* policy, const dace_landscape* cfg, double* out)
{
    return guarded([&] {
        need(policy, "policy");
        need(cfg, "cfg");
        need(out, "out");
        *out = dace::toy::expected_reward({policy->mean, policy->log_std}, to_cpp(*cfg));
    });
}

dace_status dace_toy_config_default(dace_toy_config* out)
{
    return guarded([&] {
        need(out, "out");
        const dace::toy::ToyTrainConfig d;
        *out = {d.alpha,     d.learning_rate, d.clip_epsilon, d.epochs_per_update,
                d.batch_size, d.iterations,   d.steps_per_iteration, d.init_mean,
                d.init_std,  d.seed,
                d.optimizer == dace::toy::ToyOptimizer::Sgd ? DACE_TOY_SGD : DACE_TOY_ADAM};
    });
}

dace_status dace_toy_train(const dace_toy_config* cfg, const dace_landscape* land, dace_toy_trace** out)
{
    return guarded([&] {
        need(cfg, "cfg");
        need(land, "land");
        need(out, "out");
        *out = nullptr;
        dace::toy::ToyTrainConfig tc;
        tc.alpha = cfg->alpha;
        tc.learning_rate = cfg->learning_rate;
        tc.clip_epsilon = cfg->clip_epsilon;
        tc.epochs_per_update = cfg->epochs_per_update;
        tc.batch_size = cfg->batch_size;
        tc.iterations = cfg->iterations;
        tc.steps_per_iteration = cfg->steps_per_iteration;
        tc.init_mean = cfg->init_mean;
        tc.init_std = cfg->init_std;
        tc.seed = cfg->seed;
        if (cfg->optimizer != DACE_TOY_SGD && cfg->optimizer != DACE_TOY_ADAM) {
            dace::throw_invalid("unknown toy optimizer");
        }
        tc.optimizer = cfg->optimizer == DACE_TOY_SGD ? dace::toy::ToyOptimizer::Sgd : dace::toy::ToyOptimizer::Adam;
        *out = new dace_toy_trace{dace::toy::ppo_toy_train(tc, to_cpp(*land))};
    });
}

size_t dace_toy_trace_length(const dace_toy_trace* trace) { return trace ? trace->trace.size() : 0; }

dace_status dace_toy_trace_get(const dace_toy_trace* trace, size_t index, dace_toy_record* out)
{
    return guarded([&] {
        need(trace, "trace");
        need(out, "out");
        if (index >= trace->trace.size()) {
            dace::throw_invalid("trace index out of range");
        }
        const auto& r = trace->trace[index];
        *out = {r.iteration, r.mean, r.stddev, r.expected_reward, r.surrogate_loss};
    });
}

void dace_toy_trace_free(dace_toy_trace* trace) { delete trace; }

dace_status dace_sequence_certainty(const double* token_log_probs, size_t n, double* raw, double* surprisal)
{
    return guarded([&] {
        if (n > 0) {
            need(token_log_probs, "token_log_probs");
        }
        const auto c = dace::sequence_certainty(std::span<const double>(token_log_probs, n));
        if (raw) {
            *raw = c.raw;
        }
        if (surprisal) {
            *surprisal = c.surprisal;
        }
    });
}

dace_status dace_normalize_group(const double* scores, size_t n, double* out)
{
    return guarded([&] {
        if (n > 0) {
            need(scores, "scores");
            need(out, "out");
        }
        const auto norm = dace::normalize_group(std::span<const double>(scores, n));
        for (size_t i = 0; i < n; ++i) {
            out[i] = norm[i].value;
        }
    });
}

dace_status dace_estimate_difficulty(const int* outcomes, size_t n, double* out)
{
    return guarded([&] {
        if (n > 0) {
            need(outcomes, "outcomes");
        }
        need(out, "out");
        *out = dace::estimate_difficulty(std::span<const int>(outcomes, n));
    });
}

dace_status dace_shaping_config_default(dace_shaping_config* out)
{
    return guarded([&] {
        need(out, "out");
        const dace::DaceConfig d;
        *out = {d.alpha_scale, d.beta_threshold, d.hack_penalty_enabled ? 1 : 0, d.intrinsic_enabled ? 1 : 0,
                d.certainty_sign == dace::CertaintySign::Confidence ? DACE_SIGN_CONFIDENCE : DACE_SIGN_SURPRISAL};
    });
}

dace_status dace_adaptive_coefficient(double difficulty, const dace_shaping_config* cfg, double* out)
{
    return guarded([&] {
        need(cfg, "cfg");
        need(out, "out");
        *out = dace::adaptive_coefficient(difficulty, to_cpp(*cfg));
    });
}

dace_status dace_detect_hack(const uint8_t* tokens, size_t n, int* out)
{
    return guarded([&] {
        need(out, "out");
        *out = dace::detect_hack(tokens_in(tokens, n)) ? 1 : 0;
    });
}

dace_status dace_shape_group(const dace_shaping_config* cfg, size_t n, const uint8_t* const* tokens,
                             const double* const* token_log_probs, const size_t* lengths,
                             const int* verifier_outcomes, dace_reward_breakdown* out, double* difficulty)
{
    return guarded([&] {
        need(cfg, "cfg");
        if (n > 0) {
            need(tokens, "tokens");
            need(token_log_probs, "token_log_probs");
            need(lengths, "lengths");
            need(verifier_outcomes, "verifier_outcomes");
            need(out, "out");
        }
        dace::ResponseGroup group;
        for (size_t i = 0; i < n; ++i) {
            dace::Response r;
            r.tokens = tokens_in(tokens[i], lengths[i]);
            if (lengths[i] > 0) {
                need(token_log_probs[i], "token_log_probs[i]");
            }
            r.token_log_probs.assign(token_log_probs[i], token_log_probs[i] + lengths[i]);
            group.responses.push_back(std::move(r));
            group.verifier_outcomes.push_back(verifier_outcomes[i]);
        }
        const auto shaped = dace::shape_group(group, to_cpp(*cfg));
        for (size_t i = 0; i < n; ++i) {
            const auto& rb = shaped.responses[i];
            out[i] = {rb.external,      rb.intrinsic,           rb.total,          rb.coefficient,
                      rb.raw_certainty, rb.normalized_certainty, rb.hack_flag ? 1 : 0};
        }
        if (difficulty) {
            *difficulty = shaped.difficulty;
        }
    });
}

dace_status dace_taskset_generate(int num_tasks, const int* tiers, const double* fractions, size_t num_tiers,
                                  uint64_t seed, dace_taskset** out)
{
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        if (num_tiers > 0) {
            need(tiers, "tiers");
            need(fractions, "fractions");
        }
        std::map<int, double> mix;
        for (size_t i = 0; i < num_tiers; ++i) {
            if (!mix.emplace(tiers[i], fractions[i]).second) {
                dace::throw_invalid("duplicate tier in mix");
            }
        }
        *out = new dace_taskset{dace::generate_tasks(num_tasks, mix, seed)};
    });
}

dace_status dace_taskset_load(const char* path, dace_taskset** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        std::ifstream in(path);
        if (!in) {
            throw dace::Error(dace::ErrorCode::Io, std::string("cannot read '") + path + "'");
        }
        *out = new dace_taskset{dace::read_tasks(in)};
    });
}

dace_status dace_taskset_save(const dace_taskset* tasks, const char* path)
{
    return guarded([&] {
        need(tasks, "tasks");
        need(path, "path");
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw dace::Error(dace::ErrorCode::Io, std::string("cannot write '") + path + "'");
        }
        dace::write_tasks(os, tasks->tasks);
    });
}

size_t dace_taskset_size(const dace_taskset* tasks) { return tasks ? tasks->tasks.size() : 0; }

dace_status dace_taskset_tier(const dace_taskset* tasks, size_t index, int* out)
{
    return guarded([&] {
        need(out, "out");
        *out = task_at(tasks, index).tier();
    });
}

dace_status dace_taskset_answer(const dace_taskset* tasks, size_t index, uint8_t* buffer, size_t capacity,
                                size_t* length)
{
    return guarded([&] {
        const auto& answer = task_at(tasks, index).answer;
        if (capacity > 0) {
            need(buffer, "buffer");
        }
        std::memcpy(buffer, answer.data(), std::min(capacity, answer.size()));
        if (length) {
            *length = answer.size();
        }
    });
}

dace_status dace_verify(const dace_taskset* tasks, size_t index, const uint8_t* response, size_t n, int* correct,
                        int* via_shortcut)
{
    return guarded([&] {
        const auto v = dace::verify(task_at(tasks, index), tokens_in(response, n));
        if (correct) {
            *correct = v.correct;
        }
        if (via_shortcut) {
            *via_shortcut = v.via_shortcut ? 1 : 0;
        }
    });
}

void dace_taskset_free(dace_taskset* tasks) { delete tasks; }

dace_status dace_policy_create(double temperature, dace_policy** out)
{
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        *out = new dace_policy{dace::TabularPolicy(temperature)};
    });
}

dace_status dace_policy_load(const char* path, dace_policy** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        std::ifstream in(path);
        if (!in) {
            throw dace::Error(dace::ErrorCode::Io, std::string("cannot read '") + path + "'");
        }
        *out = new dace_policy{dace::read_checkpoint(in)};
    });
}

dace_status dace_policy_save(const dace_policy* policy, const char* path)
{
    return guarded([&] {
        need(policy, "policy");
        need(path, "path");
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw dace::Error(dace::ErrorCode::Io, std::string("cannot write '") + path + "'");
        }
        dace::write_checkpoint(os, policy->policy);
    });
}

dace_status dace_policy_sequence_log_prob(const dace_policy* policy, int64_t task_id, const uint8_t* tokens,
                                          size_t n, double* out)
{
    return guarded([&] {
        need(policy, "policy");
        need(out, "out");
        const auto seq = tokens_in(tokens, n);
        *out = dace::sequence_log_prob(policy->policy, task_id, seq);
    });
}

void dace_policy_free(dace_policy* policy) { delete policy; }

dace_status dace_grpo_config_default(dace_grpo_config* out)
{
    return guarded([&] {
        need(out, "out");
        const dace::GrpoConfig g;
        *out = {g.group_size, g.eps_low,  g.eps_high, g.learning_rate, g.epochs_per_batch,
                g.tasks_per_batch, g.std_floor, g.steps, g.max_response_length};
    });
}

dace_status dace_group_advantages(const double* rewards, size_t n, double std_floor, double* out)
{
    return guarded([&] {
        if (n > 0) {
            need(rewards, "rewards");
            need(out, "out");
        }
        const auto adv = dace::group_advantages(std::span<const double>(rewards, n), std_floor);
        std::copy(adv.begin(), adv.end(), out);
    });
}

dace_status dace_clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high, double* out)
{
    return guarded([&] {
        need(out, "out");
        *out = dace::clipped_surrogate(ratio, advantage, eps_low, eps_high);
    });
}

dace_status dace_train(dace_policy* policy, const dace_taskset* tasks, const dace_grpo_config* grpo,
                       const dace_shaping_config* shaping, uint64_t seed, dace_metrics** metrics)
{
    return guarded([&] {
        need(policy, "policy");
        need(tasks, "tasks");
        need(grpo, "grpo");
        if (metrics) {
            *metrics = nullptr;
        }
        auto result = shaping ? dace::train(policy->policy, tasks->tasks, to_cpp(*grpo), to_cpp(*shaping), seed)
                              : dace::train_baseline(policy->policy, tasks->tasks, to_cpp(*grpo), seed);
        policy->policy = std::move(result.policy);
        if (metrics) {
            *metrics = new dace_metrics{std::move(result.metrics)};
        }
    });
}

size_t dace_metrics_length(const dace_metrics* metrics) { return metrics ? metrics->records.size() : 0; }

dace_status dace_metrics_get(const dace_metrics* metrics, size_t index, dace_metrics_record* out)
{
    return guarded([&] {
        need(metrics, "metrics");
        need(out, "out");
        if (index >= metrics->records.size()) {
            dace::throw_invalid("metrics index out of range");
        }
        const auto& m = metrics->records[index];
        *out = {m.step,
                m.mean_total_reward,
                m.mean_external_reward,
                m.mean_raw_certainty,
                m.mean_step_entropy,
                m.mean_response_length,
                m.fraction_hard,
                m.shortcut_rate,
                m.genuine_accuracy};
    });
}

void dace_metrics_free(dace_metrics* metrics) { delete metrics; }

dace_status dace_evaluate(const dace_policy* policy, const dace_taskset* tasks, int samples_per_task, uint64_t seed,
                          double* mean_at_k, double* pass_at_k)
{
    return guarded([&] {
        need(policy, "policy");
        need(tasks, "tasks");
        const auto r = dace::evaluate(policy->policy, tasks->tasks, samples_per_task, seed);
        if (mean_at_k) {
            *mean_at_k = r.mean_at_k;
        }
        if (pass_at_k) {
            *pass_at_k = r.pass_at_k;
        }
    });
}

dace_status dace_lab_run(const char* kind, const char* config_path, const char* const* overrides,
                         size_t num_overrides, int jobs, const char* out_dir, int has_master_seed,
                         uint64_t master_seed)
{
    return guarded([&] {
        need(config_path, "config_path");
        need(out_dir, "out_dir");
        if (num_overrides > 0) {
            need(overrides, "overrides");
        }
        std::vector<std::string> ovs;
        for (size_t i = 0; i < num_overrides; ++i) {
            need(overrides[i], "overrides[i]");
            ovs.emplace_back(overrides[i]);
        }
        const auto cfg = dace::harness::load_config(config_path, ovs);
        if (kind != nullptr) {
            const auto k = dace::harness::kind_from_name(kind);
            if (!k) {
                dace::throw_invalid(std::string("unknown experiment kind '") + kind + "'");
            }
            if (*k != cfg.kind) {
                throw dace::Error(dace::ErrorCode::Parse,
                                  std::string("config declares kind '") +
                                      std::string(dace::harness::kind_name(cfg.kind)) + "' but '" + kind +
                                      "' was requested");
            }
        }
        dace::harness::RunOptions opts;
        opts.jobs = jobs;
        if (has_master_seed) {
            opts.master_seed = master_seed;
        }
        dace::harness::run(cfg, out_dir, opts);
    });
}

dace_status dace_lab_replay(const char* run_dir, const char* out_dir, int jobs)
{
    return guarded([&] {
        need(run_dir, "run_dir");
        need(out_dir, "out_dir");
        dace::harness::replay(run_dir, out_dir, jobs);
    });
}

dace_status dace_lab_emit_plot_data(const char* run_dir, size_t* rows)
{
    return guarded([&] {
        need(run_dir, "run_dir");
        const std::size_t n = dace::harness::emit_plot_data(run_dir);
        if (rows) {
            *rows = n;
        }
    });
}

}  // extern "C"
