#pragma once

// Synthetic verifiable tasks: left-to-right modular arithmetic chains.
//
// Tier k has chain length k. Tiers 1-2 are reduced modulo 10 (one answer
// digit), tiers 3 and up modulo 1000 (three zero-padded answer digits).
// Responses that open with SHORTCUT pass the outcome check regardless of
// content; only the shaping layer can tell them apart.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "dace/vocab.hpp"

namespace dace {

inline constexpr int kMinTier = 1;
inline constexpr int kMaxTier = 6;
inline constexpr int kMaxResponseLength = 8;

struct TaskInstance {
    std::int64_t task_id = 0;
    int chain_length = 1;
    TokenSeq prompt;  // start digit, (op digit) * k, MOD, modulus digits
    TokenSeq answer;  // answer digits, EOS

    int tier() const { return chain_length; }
    int modulus() const;
    /// Number of digit tokens in the answer.
    int answer_width() const;
};

struct VerifierOutcome {
    int correct = 0;
    bool via_shortcut = false;

    /// Correct through the intended channel.
    bool genuine() const { return correct == 1 && !via_shortcut; }
};

int tier_modulus(int tier);

/// Left-to-right evaluation of the prompt's chain reduced by its modulus.
int evaluate_prompt(std::span<const Token> prompt);

/// Builds a validated task. Throws on a malformed chain.
TaskInstance make_task(std::int64_t task_id, int start_digit,
                       std::span<const std::pair<Token, int>> operations);

/// Fractions must sum to 1 within 1e-9. Task counts per tier use largest
/// remainders; tiers are shuffled across the dense id range.
std::vector<TaskInstance> generate_tasks(int num_tasks, const std::map<int, double>& tier_mix,
                                         std::uint64_t seed);

VerifierOutcome verify(const TaskInstance& task, std::span<const Token> response,
                       int max_len = kMaxResponseLength);

// Line format: task_id<TAB>prompt-tokens<TAB>answer-tokens
void write_tasks(std::ostream& os, std::span<const TaskInstance> tasks);
std::vector<TaskInstance> read_tasks(std::istream& is);

}  // namespace dace
