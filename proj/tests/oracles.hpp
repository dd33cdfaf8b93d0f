#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library's numerical code; they are
// written directly from the mathematical definitions, in the plainest form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// ---- toy landscape ---------------------------------------------------------

inline double landscape(double a, double mode_offset, double narrow, double wide)
{
    return std::exp(-(a + mode_offset) * (a + mode_offset) / (2 * narrow * narrow)) +
           std::exp(-(a - mode_offset) * (a - mode_offset) / (2 * wide * wide));
}

struct McEstimate {
    double mean;
    double stderr_;
};

// Plain Monte-Carlo with the standard library's normal distribution.
inline McEstimate expected_reward_mc(double mu, double sigma, double mode_offset, double narrow, double wide,
                                     std::size_t samples, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(mu, sigma);
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double r = landscape(normal(gen), mode_offset, narrow, wide);
        sum += r;
        sum2 += r * r;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

// ---- finite differences ----------------------------------------------------

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5)
{
    return (f(x + h) - f(x - h)) / (2 * h);
}

// ||a - b|| / max(||a||, ||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8)
{
    double diff = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// ---- shaping ---------------------------------------------------------------

struct ShapedResponse {
    double external;
    double intrinsic;
    double total;
    double normalized;
    bool hack;
};

struct ShapedGroupRef {
    double difficulty;
    double coefficient;
    // All scores (nearly) equal, so every response normalizes to 0.5.
    bool degenerate;
    std::vector<ShapedResponse> responses;
};

// Brute-force pipeline. `tokens` are the responses' token ids, `lps` the
// per-token log-probabilities, `outcomes` the verifier outcomes. The score
// is the mean log-probability (use_surprisal = false) or its negation.
inline ShapedGroupRef shape_reference(const std::vector<std::vector<int>>& tokens,
                                      const std::vector<std::vector<double>>& lps, const std::vector<int>& outcomes,
                                      double alpha_scale, double beta, bool penalty, bool intrinsic,
                                      bool use_surprisal, int shortcut_token = 15)
{
    const std::size_t n = tokens.size();
    ShapedGroupRef g;
    g.responses.resize(n);
    int successes = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool hack = false;
        for (int t : tokens[i]) {
            hack = hack || t == shortcut_token;
        }
        g.responses[i].hack = hack;
        g.responses[i].external = (penalty && hack) ? 0.0 : outcomes[i];
        successes += static_cast<int>(g.responses[i].external);
    }
    g.difficulty = 1.0 - static_cast<double>(successes) / static_cast<double>(n);
    if (!intrinsic || g.difficulty == beta) {
        g.coefficient = 0.0;
    } else {
        g.coefficient = g.difficulty < beta ? alpha_scale : -alpha_scale;
    }

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double lp : lps[i]) {
            s += lp;
        }
        s /= static_cast<double>(lps[i].size());
        score[i] = use_surprisal ? -s : s;
    }
    // z-scoring is affine, so min-max of the z-scores equals min-max of the
    // raw scores; the degenerate test still needs the population std.
    double mean = 0.0;
    for (double s : score) {
        mean += s;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : score) {
        var += (s - mean) * (s - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double lo = *std::min_element(score.begin(), score.end());
    const double hi = *std::max_element(score.begin(), score.end());
    g.degenerate = sd < 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = g.responses[i];
        r.normalized = g.degenerate ? 0.5 : (score[i] - lo) / (hi - lo);
        r.intrinsic = g.coefficient * r.normalized;
        r.total = r.external + r.intrinsic;
    }
    return g;
}

// ---- arithmetic chains -----------------------------------------------------

// Evaluates start op1 d1 op2 d2 ... left to right in int64 without any
// intermediate reduction, then reduces once (non-negative remainder).
// ops: 0 = plus, 1 = minus, 2 = times.
inline long long chain_value(int start, const std::vector<std::pair<int, int>>& ops, long long modulus)
{
    long long acc = start;
    for (const auto& [op, d] : ops) {
        if (op == 0) {
            acc += d;
        } else if (op == 1) {
            acc -= d;
        } else {
            acc *= d;
        }
    }
    long long r = acc % modulus;
    return r < 0 ? r + modulus : r;
}

// ---- pass@k ----------------------------------------------------------------

inline double pass_at_k_closed_form(double p, int k) { return 1.0 - std::pow(1.0 - p, k); }

}  // namespace oracle
