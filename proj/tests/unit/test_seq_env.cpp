#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "dace/error.hpp"
#include "dace/seq_env.hpp"
#include "dace/seq_policy.hpp"
#include "oracles.hpp"

using namespace dace;

namespace {

int op_code(Token op) { return op == tok::kPlus ? 0 : op == tok::kMinus ? 1 : 2; }

// Decodes the prompt back into (start, ops) for the independent evaluator.
long long oracle_answer(const TaskInstance& t)
{
    std::vector<std::pair<int, int>> ops;
    for (int k = 0; k < t.chain_length; ++k) {
        ops.emplace_back(op_code(t.prompt[1 + 2 * k]), t.prompt[2 + 2 * k]);
    }
    return oracle::chain_value(t.prompt[0], ops, t.chain_length <= 2 ? 10 : 1000);
}

long long answer_value(const TaskInstance& t)
{
    long long v = 0;
    for (std::size_t i = 0; i + 1 < t.answer.size(); ++i) {
        v = v * 10 + t.answer[i];
    }
    return v;
}

// Probability that a uniform policy over the 16 tokens, stopped at EOS or
// after max_len tokens, produces a response the verifier accepts, for a
// one-digit answer. States: 0 = no digit yet, 1 = exactly the answer digit
// so far, 2 = dead.
double uniform_success_probability(int max_len)
{
    const double q = 1.0 / 16.0;
    double success = q;  // SHORTCUT as the first token
    // After the first token.
    double p0 = 4 * q;  // PLUS MINUS TIMES MOD
    double p1 = q;      // the answer digit
    for (int pos = 1; pos < max_len; ++pos) {
        success += p1 * q;  // EOS after exactly the answer digit
        const double n0 = p0 * 5 * q;          // scratch tokens, SHORTCUT included
        const double n1 = p0 * q + p1 * 5 * q;  // answer digit, or scratch after it
        p0 = n0;
        p1 = n1;
    }
    return success;
}

}  // namespace

TEST(Tasks, WorkedChainExample)
{
    const std::pair<Token, int> ops[] = {{tok::kPlus, 4}, {tok::kTimes, 2}};
    const auto t = make_task(0, 3, ops);
    EXPECT_EQ(t.answer, (TokenSeq{4, tok::kEos}));
    EXPECT_EQ(tokens_to_string(t.prompt), "d3 PLUS d4 TIMES d2 MOD d1 d0");
    EXPECT_EQ(evaluate_prompt(t.prompt), 4);
    EXPECT_EQ(t.tier(), 2);
    EXPECT_EQ(t.modulus(), 10);
    EXPECT_EQ(t.answer_width(), 1);
}

TEST(Tasks, NegativeIntermediatesReduceToNonNegative)
{
    const std::pair<Token, int> ops[] = {{tok::kMinus, 9}, {tok::kMinus, 9}, {tok::kTimes, 7}};
    const auto t = make_task(0, 1, ops);
    // (1 - 9 - 9) * 7 = -119 -> 881 mod 1000
    EXPECT_EQ(t.answer, (TokenSeq{8, 8, 1, tok::kEos}));
    EXPECT_EQ(t.modulus(), 1000);
}

TEST(Tasks, GenerateIsDeterministicWithExactCounts)
{
    const auto a = generate_tasks(100, {{1, 0.5}, {3, 0.5}}, 7);
    const auto b = generate_tasks(100, {{1, 0.5}, {3, 0.5}}, 7);
    ASSERT_EQ(a.size(), 100u);
    int tier1 = 0, tier3 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].task_id, static_cast<std::int64_t>(i));
        EXPECT_EQ(a[i].prompt, b[i].prompt);
        EXPECT_EQ(a[i].answer, b[i].answer);
        tier1 += a[i].tier() == 1;
        tier3 += a[i].tier() == 3;
    }
    EXPECT_EQ(tier1, 50);
    EXPECT_EQ(tier3, 50);
    const auto c = generate_tasks(100, {{1, 0.5}, {3, 0.5}}, 8);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        differs = differs || a[i].prompt != c[i].prompt;
    }
    EXPECT_TRUE(differs);
}

TEST(Tasks, LargestRemainderApportionment)
{
    const auto t = generate_tasks(10, {{1, 1.0 / 3}, {2, 1.0 / 3}, {4, 1.0 / 3}}, 1);
    std::map<int, int> counts;
    for (const auto& x : t) {
        ++counts[x.tier()];
    }
    EXPECT_EQ(counts[1] + counts[2] + counts[4], 10);
    EXPECT_EQ(counts[1], 4);
    EXPECT_EQ(counts[2], 3);
    EXPECT_EQ(counts[4], 3);
}

TEST(Tasks, SingleTierHasOneDigitAnswers)
{
    for (const auto& t : generate_tasks(200, {{1, 1.0}}, 3)) {
        ASSERT_EQ(t.answer.size(), 2u);
        EXPECT_TRUE(is_digit(t.answer[0]));
        EXPECT_EQ(t.answer[1], tok::kEos);
    }
}

TEST(Tasks, AnswersMatchBruteForceEvaluator)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto tasks = generate_tasks(60, {{1, 0.2}, {2, 0.2}, {3, 0.2}, {5, 0.2}, {6, 0.2}}, seed);
        for (const auto& t : tasks) {
            EXPECT_EQ(answer_value(t), oracle_answer(t)) << tokens_to_string(t.prompt);
            EXPECT_EQ(static_cast<int>(t.answer.size()) - 1, t.chain_length <= 2 ? 1 : 3);
        }
    }
}

TEST(Tasks, GenerateErrors)
{
    EXPECT_THROW(generate_tasks(0, {{1, 1.0}}, 1), Error);
    EXPECT_THROW(generate_tasks(10, {}, 1), Error);
    EXPECT_THROW(generate_tasks(10, {{1, 0.5}, {2, 0.4}}, 1), Error);
    EXPECT_THROW(generate_tasks(10, {{7, 1.0}}, 1), Error);
    EXPECT_THROW(generate_tasks(10, {{1, 1.5}, {2, -0.5}}, 1), Error);
}

TEST(Verify, Examples)
{
    const std::pair<Token, int> ops[] = {{tok::kPlus, 4}, {tok::kTimes, 2}};
    const auto t = make_task(0, 3, ops);
    auto v = verify(t, TokenSeq{4, tok::kEos});
    EXPECT_EQ(v.correct, 1);
    EXPECT_FALSE(v.via_shortcut);
    EXPECT_TRUE(v.genuine());
    v = verify(t, TokenSeq{tok::kShortcut, tok::kEos});
    EXPECT_EQ(v.correct, 1);
    EXPECT_TRUE(v.via_shortcut);
    EXPECT_FALSE(v.genuine());
    EXPECT_EQ(verify(t, TokenSeq{4, 0, tok::kEos}).correct, 0);
}

TEST(Verify, EdgeCases)
{
    const std::pair<Token, int> ops[] = {{tok::kPlus, 4}, {tok::kTimes, 2}};
    const auto t = make_task(0, 3, ops);
    EXPECT_EQ(verify(t, TokenSeq{4}).correct, 0);                   // no EOS
    EXPECT_EQ(verify(t, TokenSeq{tok::kEos}).correct, 0);           // empty answer
    EXPECT_EQ(verify(t, TokenSeq{4, tok::kEos, 5}).correct, 1);     // tokens after EOS ignored
    EXPECT_EQ(verify(t, TokenSeq{tok::kPlus, 4, tok::kEos}).correct, 1);  // non-digit scratch
    // A SHORTCUT later in the response is not the planted channel.
    const auto late = verify(t, TokenSeq{1, tok::kShortcut, tok::kEos});
    EXPECT_EQ(late.correct, 0);
    EXPECT_FALSE(late.via_shortcut);
    // EOS beyond max_len does not count.
    TokenSeq long_resp(8, tok::kPlus);
    long_resp.push_back(4);
    long_resp.push_back(tok::kEos);
    EXPECT_EQ(verify(t, long_resp).correct, 0);
    EXPECT_EQ(verify(t, long_resp, 10).correct, 1);
    EXPECT_THROW(verify(t, TokenSeq{}), Error);
    EXPECT_THROW(verify(t, TokenSeq{16}), Error);
}

TEST(Verify, SoundnessAndHackChannel)
{
    for (const auto& t : generate_tasks(300, {{1, 0.25}, {2, 0.25}, {3, 0.25}, {4, 0.25}}, 99)) {
        const auto v = verify(t, t.answer);
        EXPECT_EQ(v.correct, 1);
        EXPECT_FALSE(v.via_shortcut);
        const auto h = verify(t, TokenSeq{tok::kShortcut, tok::kEos});
        EXPECT_EQ(h.correct, 1);
        EXPECT_TRUE(h.via_shortcut);
    }
}

TEST(Verify, ShortcutImpliesShortcutLead)
{
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<int> tokd(0, 15), len(1, 8);
    const auto tasks = generate_tasks(20, {{1, 0.5}, {3, 0.5}}, 2);
    for (int i = 0; i < 5000; ++i) {
        TokenSeq r(static_cast<std::size_t>(len(gen)));
        for (auto& x : r) {
            x = static_cast<Token>(tokd(gen));
        }
        const auto v = verify(tasks[i % tasks.size()], r);
        if (v.via_shortcut) {
            EXPECT_EQ(r[0], tok::kShortcut);
        }
    }
}

TEST(UniformPolicy, FirstTwoTokensMatchAnswerAtRate1Over256)
{
    const auto tasks = generate_tasks(50, {{1, 1.0}}, 5);
    const TabularPolicy uniform(1.0);
    Rng rng(2024);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const auto& t = tasks[static_cast<std::size_t>(i) % tasks.size()];
        const auto r = sample_response(uniform, t.task_id, kMaxResponseLength, rng);
        hits += r.tokens.size() >= 2 && r.tokens[0] == t.answer[0] && r.tokens[1] == tok::kEos;
    }
    const double p = 1.0 / 256.0;
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_LE(std::abs(static_cast<double>(hits) / n - p), 3 * se);
}

TEST(UniformPolicy, VerifierSuccessRateMatchesExactProbability)
{
    const auto tasks = generate_tasks(50, {{1, 1.0}}, 6);
    const TabularPolicy uniform(0.6);  // temperature does not matter for zero logits
    Rng rng(77);
    const int n = 100000;
    int ok = 0;
    for (int i = 0; i < n; ++i) {
        const auto& t = tasks[static_cast<std::size_t>(i) % tasks.size()];
        ok += verify(t, sample_response(uniform, t.task_id, kMaxResponseLength, rng).tokens).correct;
    }
    const double p = uniform_success_probability(kMaxResponseLength);
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_LE(std::abs(static_cast<double>(ok) / n - p), 3 * se) << "exact " << p;
}

TEST(TaskIo, RoundTripIsExact)
{
    const auto tasks = generate_tasks(40, {{1, 0.25}, {2, 0.25}, {3, 0.25}, {6, 0.25}}, 12);
    std::ostringstream os;
    write_tasks(os, tasks);
    std::istringstream is(os.str());
    const auto back = read_tasks(is);
    ASSERT_EQ(back.size(), tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        EXPECT_EQ(back[i].task_id, tasks[i].task_id);
        EXPECT_EQ(back[i].prompt, tasks[i].prompt);
        EXPECT_EQ(back[i].answer, tasks[i].answer);
    }
    std::ostringstream again;
    write_tasks(again, back);
    EXPECT_EQ(again.str(), os.str());
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')).find('\t') != std::string::npos, true);
}

TEST(TaskIo, ParseErrors)
{
    auto parse = [](const std::string& text) {
        std::istringstream is(text);
        return read_tasks(is);
    };
    auto code_of = [&](const std::string& text) {
        try {
            parse(text);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Internal;
    };
    EXPECT_EQ(code_of("0\td3 PLUS d4 MOD d1 d0\n"), ErrorCode::Parse);
    EXPECT_EQ(code_of("x\td3 PLUS d4 MOD d1 d0\td7 EOS\n"), ErrorCode::Parse);
    EXPECT_EQ(code_of("0\td3 PLUS d4 MOD d1 d0\td8 EOS\n"), ErrorCode::Parse);
    EXPECT_EQ(code_of("0\td3 PLUS d4 MOD d1 d0 d0\td7 EOS\n"), ErrorCode::Parse);
    EXPECT_EQ(code_of("0\td3 BANANA d4 MOD d1 d0\td7 EOS\n"), ErrorCode::Parse);
    EXPECT_EQ(parse("0\td3 PLUS d4 MOD d1 d0\td7 EOS\n").size(), 1u);
}

TEST(Vocab, NamesRoundTrip)
{
    for (int t = 0; t < kVocabSize; ++t) {
        const auto tk = static_cast<Token>(t);
        EXPECT_EQ(token_from_name(token_name(tk)), tk);
    }
    EXPECT_EQ(tokens_from_string("d4 EOS"), (TokenSeq{4, tok::kEos}));
    EXPECT_EQ(tokens_to_string(TokenSeq{tok::kShortcut, 0}), "SHORTCUT d0");
    EXPECT_FALSE(token_from_name("d10").has_value());
}
