#pragma once

// Random inputs and synthetic policies shared by the unit and acceptance
// tests.

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "dace/seq_env.hpp"
#include "dace/seq_policy.hpp"
#include "dace/shaping.hpp"

namespace testing_helpers {

struct FuzzGroup {
    dace::ResponseGroup group;
    std::vector<std::vector<int>> tokens;
    std::vector<std::vector<double>> lps;
};

// A random group of 1..16 responses. Some groups lean heavily on the shortcut
// token and one in ten shares a single certainty across all responses.
inline FuzzGroup random_group(std::mt19937_64& gen)
{
    std::uniform_int_distribution<int> size(1, 16), len(1, 8), token(0, 15), coin(0, 1), style(0, 9);
    std::uniform_real_distribution<double> lp(-4.0, 0.0);
    FuzzGroup g;
    const int n = size(gen);
    const int kind = style(gen);
    const double shared_lp = lp(gen);
    g.group.task_id = gen() % 1000;
    for (int i = 0; i < n; ++i) {
        dace::Response r;
        const int l = len(gen);
        std::vector<int> toks;
        std::vector<double> lps;
        for (int j = 0; j < l; ++j) {
            const int t = (kind < 3 && coin(gen)) ? 15 : token(gen);
            toks.push_back(t);
            lps.push_back(kind == 9 ? shared_lp : lp(gen));
            r.tokens.push_back(static_cast<dace::Token>(t));
        }
        r.token_log_probs = lps;
        g.tokens.push_back(toks);
        g.lps.push_back(lps);
        g.group.responses.push_back(std::move(r));
        g.group.verifier_outcomes.push_back(coin(gen));
    }
    return g;
}

inline dace::TokenVector random_logits(std::mt19937_64& gen, double scale)
{
    std::normal_distribution<double> z(0.0, scale);
    dace::TokenVector l{};
    for (double& x : l) {
        x = z(gen);
    }
    return l;
}

// Random logits for task 0 along a handful of prefixes per position.
inline dace::TabularPolicy random_policy(std::mt19937_64& gen, double temperature)
{
    dace::TabularPolicy p(temperature);
    std::uniform_int_distribution<int> tokd(0, 15);
    for (int pos = 0; pos < 8; ++pos) {
        for (int k = 0; k < 6; ++k) {
            const int prev = pos == 0 ? dace::kNoPrevToken : tokd(gen);
            p.set_logits({0, pos, prev}, random_logits(gen, 1.5));
        }
    }
    return p;
}

// Answers every task with probability p: the first token is the answer digit
// with probability p and a wrong digit otherwise, then EOS.
inline dace::TabularPolicy fixed_p_policy(std::span<const dace::TaskInstance> tasks, double p)
{
    dace::TabularPolicy pol(1.0);
    for (const auto& t : tasks) {
        const int a = t.answer[0];
        const int wrong = (a + 1) % 10;
        dace::TokenVector first;
        first.fill(-80.0);
        first[a] = std::log(p);
        first[wrong] = p < 1.0 ? std::log(1 - p) : -80.0;
        pol.set_logits({t.task_id, 0, dace::kNoPrevToken}, first);
        for (int d : {a, wrong}) {
            dace::TokenVector second;
            second.fill(-80.0);
            second[dace::tok::kEos] = 0.0;
            pol.set_logits({t.task_id, 1, d}, second);
        }
    }
    return pol;
}

}  // namespace testing_helpers
