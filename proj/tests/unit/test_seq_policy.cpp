#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dace/error.hpp"
#include "dace/seq_policy.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dace;
using testing_helpers::random_logits;
using testing_helpers::random_policy;

namespace {

const double kLnV = std::log(16.0);

}  // namespace

TEST(Sampling, SaturatedEosPolicyStopsImmediately)
{
    TabularPolicy p(0.6);
    TokenVector l{};
    l[tok::kEos] = 50.0;
    p.set_logits({0, 0, kNoPrevToken}, l);
    Rng rng(1);
    const auto r = sample_response(p, 0, 8, rng);
    ASSERT_EQ(r.tokens, (TokenSeq{tok::kEos}));
    EXPECT_EQ(r.length(), 1u);
    EXPECT_NEAR(r.token_log_probs[0], 0.0, 1e-12);
}

TEST(Sampling, UniformPolicyStepStatistics)
{
    const TabularPolicy p(0.6);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto r = sample_response(p, 5, 8, rng);
        ASSERT_EQ(r.token_log_probs.size(), r.length());
        ASSERT_EQ(r.step_entropies.size(), r.length());
        EXPECT_LE(r.length(), 8u);
        for (std::size_t j = 0; j < r.length(); ++j) {
            EXPECT_NEAR(r.token_log_probs[j], -kLnV, 1e-12);
            EXPECT_NEAR(r.step_entropies[j], kLnV, 1e-12);
        }
        if (r.length() < 8) {
            EXPECT_EQ(r.tokens.back(), tok::kEos);
        }
    }
}

TEST(Sampling, SameSeedSameRollout)
{
    std::mt19937_64 gen(8);
    const auto p = random_policy(gen, 0.6);
    Rng a(42), b(42);
    for (int i = 0; i < 50; ++i) {
        const auto ra = sample_response(p, 0, 8, a);
        const auto rb = sample_response(p, 0, 8, b);
        EXPECT_EQ(ra.tokens, rb.tokens);
        EXPECT_EQ(ra.token_log_probs, rb.token_log_probs);
    }
}

TEST(Sampling, RecordedLogProbsMatchScoring)
{
    std::mt19937_64 gen(9);
    const auto p = random_policy(gen, 0.6);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto r = sample_response(p, 0, 8, rng);
        EXPECT_EQ(token_log_probs(p, 0, r.tokens), r.token_log_probs);
        double sum = 0.0;
        for (double lp : r.token_log_probs) {
            EXPECT_LE(lp, 0.0);
            sum += lp;
        }
        EXPECT_LE(sequence_log_prob(p, 0, r.tokens), 0.0);
        EXPECT_NEAR(sequence_log_prob(p, 0, r.tokens), sum, 1e-12);
        for (double h : r.step_entropies) {
            EXPECT_GE(h, 0.0);
            EXPECT_LE(h, kLnV);
        }
    }
}

TEST(Sampling, EmpiricalFrequenciesFollowSoftmax)
{
    std::mt19937_64 gen(10);
    TabularPolicy p(0.6);
    p.set_logits({0, 0, kNoPrevToken}, random_logits(gen, 1.0));
    const auto probs = p.probabilities({0, 0, kNoPrevToken});
    Rng rng(11);
    std::array<int, 16> counts{};
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        ++counts[sample_response(p, 0, 1, rng).tokens[0]];
    }
    for (int t = 0; t < 16; ++t) {
        const double se = std::sqrt(probs[t] * (1 - probs[t]) / n);
        EXPECT_LE(std::abs(counts[t] / double(n) - probs[t]), 4 * se + 1e-12) << "token " << t;
    }
}

TEST(Softmax, SumsToOneAndUnseenIsUniform)
{
    std::mt19937_64 gen(12);
    TabularPolicy p(0.6);
    for (int i = 0; i < 500; ++i) {
        const ContextKey ctx{i, 1, i % 16};
        p.set_logits(ctx, random_logits(gen, 5.0));
        double s = 0.0;
        for (double x : p.probabilities(ctx)) {
            s += x;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const auto unseen = p.probabilities({999, 3, 4});
    for (double x : unseen) {
        EXPECT_NEAR(x, 1.0 / 16.0, 1e-15);
    }
    EXPECT_EQ(p.logits({999, 3, 4}), TokenVector{});
}

TEST(Gradient, UniformContextExample)
{
    const TabularPolicy p(1.0);
    const TokenSeq tokens{7};
    const auto g = logprob_gradient(p, 0, tokens);
    ASSERT_EQ(g.size(), 1u);
    const auto& row = g.at({0, 0, kNoPrevToken});
    for (int t = 0; t < 16; ++t) {
        EXPECT_NEAR(row[t], t == 7 ? 0.9375 : -0.0625, 1e-15);
    }
}

TEST(Gradient, SaturatedContextIsFlat)
{
    TabularPolicy p(1.0);
    TokenVector l{};
    l[3] = 60.0;
    p.set_logits({0, 0, kNoPrevToken}, l);
    const auto g = logprob_gradient(p, 0, TokenSeq{3});
    for (double x : g.at({0, 0, kNoPrevToken})) {
        EXPECT_LT(std::abs(x), 1e-20);
    }
}

TEST(Gradient, RowsSumToZeroAndOnlyTouchedContextsAppear)
{
    std::mt19937_64 gen(13);
    const auto p = random_policy(gen, 0.6);
    Rng rng(14);
    for (int i = 0; i < 100; ++i) {
        const auto r = sample_response(p, 0, 8, rng);
        const auto g = logprob_gradient(p, 0, r.tokens);
        EXPECT_LE(g.size(), r.length());
        for (const auto& [ctx, row] : g) {
            EXPECT_EQ(ctx.task_id, 0);
            double s = 0.0;
            for (double x : row) {
                s += x;
            }
            EXPECT_NEAR(s, 0.0, 1e-12);
        }
    }
}

TEST(Gradient, MatchesFiniteDifferencesOfSequenceLogProb)
{
    std::mt19937_64 gen(15);
    std::uniform_real_distribution<double> temp(0.3, 2.0);
    const double h = 1e-5;
    for (int c = 0; c < 100; ++c) {
        auto p = random_policy(gen, temp(gen));
        Rng rng(100 + static_cast<std::uint64_t>(c));
        const auto r = sample_response(p, 0, 8, rng);
        const auto g = logprob_gradient(p, 0, r.tokens);
        std::vector<double> analytic, numeric;
        for (const auto& [ctx, row] : g) {
            for (int t = 0; t < 16; ++t) {
                const double base = p.logits(ctx)[t];
                p.add_to_logit(ctx, static_cast<Token>(t), h);
                const double up = sequence_log_prob(p, 0, r.tokens);
                p.add_to_logit(ctx, static_cast<Token>(t), -2 * h);
                const double down = sequence_log_prob(p, 0, r.tokens);
                auto l = p.logits(ctx);
                l[t] = base;
                p.set_logits(ctx, l);
                analytic.push_back(row[t]);
                numeric.push_back((up - down) / (2 * h));
            }
        }
        EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-5) << "case " << c;
    }
}

TEST(Entropy, Examples)
{
    TabularPolicy p(1.0);
    EXPECT_NEAR(policy_entropy(p, {0, 0, kNoPrevToken}), kLnV, 1e-12);

    TokenVector onehot{};
    onehot[2] = 50.0;
    p.set_logits({0, 1, 2}, onehot);
    EXPECT_LT(policy_entropy(p, {0, 1, 2}), 1e-12);

    TokenVector two{};
    two.fill(-40.0);
    two[4] = 0.0;
    two[9] = 0.0;
    p.set_logits({0, 1, 3}, two);
    EXPECT_NEAR(policy_entropy(p, {0, 1, 3}), std::log(2.0), 1e-6);
}

TEST(Entropy, MonotoneInTemperatureAndTendsToUniform)
{
    std::mt19937_64 gen(16);
    for (int trial = 0; trial < 50; ++trial) {
        const auto l = random_logits(gen, 2.0);
        double prev = -1.0;
        for (double t : {0.1, 0.3, 0.6, 1.0, 2.0, 5.0, 20.0, 1e3, 1e6}) {
            TabularPolicy p(t);
            p.set_logits({0, 0, kNoPrevToken}, l);
            const double h = policy_entropy(p, {0, 0, kNoPrevToken});
            EXPECT_GE(h, prev - 1e-12);
            EXPECT_LE(h, kLnV);
            prev = h;
        }
        EXPECT_NEAR(prev, kLnV, 1e-9);
    }
}

TEST(Policy, RejectsBadInputs)
{
    EXPECT_THROW(TabularPolicy(0.0), Error);
    EXPECT_THROW(TabularPolicy(-1.0), Error);
    TabularPolicy p;
    TokenVector l{};
    l[0] = NAN;
    EXPECT_THROW(p.set_logits({0, 0, kNoPrevToken}, l), Error);
    EXPECT_THROW(p.add_to_logit({0, 0, kNoPrevToken}, 16, 1.0), Error);
    EXPECT_THROW(token_log_probs(p, 0, TokenSeq{17}), Error);
    EXPECT_THROW(logprob_gradient(p, 0, TokenSeq{3, 16}), Error);
    Rng rng(1);
    EXPECT_THROW(sample_response(p, 0, 0, rng), Error);
}

TEST(ContextKeyText, RoundTripAndErrors)
{
    const ContextKey a{12, 0, kNoPrevToken};
    const ContextKey b{-3, 4, tok::kShortcut};
    EXPECT_EQ(a.to_string(), "12:0:BOS");
    EXPECT_EQ(b.to_string(), "-3:4:SHORTCUT");
    EXPECT_EQ(ContextKey::parse(a.to_string()), a);
    EXPECT_EQ(ContextKey::parse(b.to_string()), b);
    EXPECT_THROW(ContextKey::parse("12:0"), Error);
    EXPECT_THROW(ContextKey::parse("12:1:BOS"), Error);
    EXPECT_THROW(ContextKey::parse("12:0:d3"), Error);
    EXPECT_THROW(ContextKey::parse("x:1:d3"), Error);
    EXPECT_THROW(ContextKey::parse("1:1:d33"), Error);
}

TEST(Checkpoint, RoundTripIsExact)
{
    std::mt19937_64 gen(17);
    const auto p = random_policy(gen, 0.6);
    std::ostringstream os;
    write_checkpoint(os, p);
    std::istringstream is(os.str());
    const auto back = read_checkpoint(is);
    EXPECT_EQ(back, p);
    std::ostringstream again;
    write_checkpoint(again, back);
    EXPECT_EQ(again.str(), os.str());
    EXPECT_EQ(os.str().rfind("# temperature=0.6\n", 0), 0u);
}

TEST(Checkpoint, ParseErrors)
{
    auto load = [](const std::string& s) {
        std::istringstream is(s);
        return read_checkpoint(is);
    };
    EXPECT_THROW(load("0:0:BOS\td1\n"), Error);
    EXPECT_THROW(load("0:0:BOS\tdx\t1.0\n"), Error);
    EXPECT_THROW(load("0:0:BOS\td1\tone\n"), Error);
    EXPECT_THROW(load("# temperature=-1\n"), Error);
    const auto p = load("# temperature=0.5\n0:0:BOS\td1\t2.5\n");
    EXPECT_EQ(p.temperature(), 0.5);
    EXPECT_EQ(p.logits({0, 0, kNoPrevToken})[1], 2.5);
}
