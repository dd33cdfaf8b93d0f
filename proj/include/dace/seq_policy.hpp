#pragma once

// Tabular autoregressive softmax policy. A context is (task id, position,
// previous token); unseen contexts have all-zero logits, i.e. the uniform
// distribution. Temperature applies both to sampling and to every reported
// log-probability and entropy.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dace/rng.hpp"
#include "dace/vocab.hpp"

namespace dace {

inline constexpr int kNoPrevToken = -1;

struct ContextKey {
    std::int64_t task_id = 0;
    int position = 0;
    int prev_token = kNoPrevToken;

    auto operator<=>(const ContextKey&) const = default;

    std::string to_string() const;
    static ContextKey parse(std::string_view text);
};

/// Context of the token at `position` in `tokens`.
ContextKey context_at(std::int64_t task_id, std::span<const Token> tokens, std::size_t position);

using TokenVector = std::array<double, kVocabSize>;

struct Rollout {
    std::int64_t task_id = 0;
    TokenSeq tokens;
    std::vector<double> token_log_probs;
    std::vector<double> step_entropies;

    std::size_t length() const { return tokens.size(); }
};

class TabularPolicy {
public:
    explicit TabularPolicy(double temperature = 0.6);

    double temperature() const { return temperature_; }
    void set_temperature(double t);

    /// Zero vector for unseen contexts.
    TokenVector logits(const ContextKey& ctx) const;
    void set_logits(const ContextKey& ctx, const TokenVector& logits);
    void add_to_logit(const ContextKey& ctx, Token token, double delta);

    TokenVector probabilities(const ContextKey& ctx) const;
    TokenVector log_probabilities(const ContextKey& ctx) const;

    const std::map<ContextKey, TokenVector>& table() const { return table_; }

    bool operator==(const TabularPolicy&) const = default;

private:
    double temperature_;
    std::map<ContextKey, TokenVector> table_;
};

/// Samples until EOS or max_len tokens. Records the log-probability and the
/// entropy of the sampling distribution at each step.
Rollout sample_response(const TabularPolicy& policy, std::int64_t task_id, int max_len, Rng& rng);

/// Per-token log-probabilities of a given sequence under the policy.
std::vector<double> token_log_probs(const TabularPolicy& policy, std::int64_t task_id,
                                    std::span<const Token> tokens);

double sequence_log_prob(const TabularPolicy& policy, std::int64_t task_id, std::span<const Token> tokens);

/// d log pi(sequence) / d logit over the contexts the sequence touches:
///   (1[t == t'] - softmax(t')) / temperature at each step.
using SparseGradient = std::map<ContextKey, TokenVector>;
SparseGradient logprob_gradient(const TabularPolicy& policy, std::int64_t task_id,
                                std::span<const Token> tokens);

/// Shannon entropy (nats) of the temperature-adjusted distribution.
double policy_entropy(const TabularPolicy& policy, const ContextKey& ctx);

// Line format, sorted by context: context_key<TAB>token<TAB>logit, preceded
// by a "# temperature=<t>" comment line.
void write_checkpoint(std::ostream& os, const TabularPolicy& policy);
TabularPolicy read_checkpoint(std::istream& is);

}  // namespace dace
