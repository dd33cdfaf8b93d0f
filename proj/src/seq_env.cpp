#include "dace/seq_env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>

#include "dace/error.hpp"
#include "dace/rng.hpp"

namespace dace {

namespace {

constexpr Token kOps[] = {tok::kPlus, tok::kMinus, tok::kTimes};

bool is_op(Token t) { return t == tok::kPlus || t == tok::kMinus || t == tok::kTimes; }

int apply_mod(int acc, Token op, int d, int modulus)
{
    int v = 0;
    switch (op) {
    case tok::kPlus: v = acc + d; break;
    case tok::kMinus: v = acc - d; break;
    case tok::kTimes: v = acc * d; break;
    default: throw_invalid("not an operator token");
    }
    v %= modulus;
    return v < 0 ? v + modulus : v;
}

TokenSeq number_tokens(int value, int width)
{
    TokenSeq out(static_cast<std::size_t>(width));
    for (int i = width - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digit_token(value % 10);
        value /= 10;
    }
    return out;
}

int width_of(int modulus)
{
    int w = 0;
    for (int m = modulus; m > 1; m /= 10) {
        ++w;
    }
    return w;
}

Error parse_error(const std::string& what) { return Error(ErrorCode::Parse, what); }

}  // namespace

int tier_modulus(int tier)
{
    require(tier >= kMinTier && tier <= kMaxTier, "tier must lie in [1, 6]");
    return tier <= 2 ? 10 : 1000;
}

int TaskInstance::modulus() const { return tier_modulus(chain_length); }

int TaskInstance::answer_width() const { return width_of(modulus()); }

int evaluate_prompt(std::span<const Token> prompt)
{
    require(prompt.size() >= 5, "prompt too short");
    require(is_digit(prompt[0]), "prompt must open with a digit");
    std::size_t i = 1;
    int acc = prompt[0];
    std::vector<std::pair<Token, int>> ops;
    while (i + 1 < prompt.size() && is_op(prompt[i])) {
        require(is_digit(prompt[i + 1]), "operator must be followed by a digit");
        ops.emplace_back(prompt[i], prompt[i + 1]);
        i += 2;
    }
    require(!ops.empty(), "chain must hold at least one operation");
    require(i < prompt.size() && prompt[i] == tok::kMod, "MOD marker expected after the chain");
    ++i;
    int modulus = 0;
    require(i < prompt.size(), "modulus digits missing");
    for (; i < prompt.size(); ++i) {
        require(is_digit(prompt[i]), "modulus must be digits");
        modulus = modulus * 10 + prompt[i];
    }
    require(modulus == tier_modulus(static_cast<int>(ops.size())),
            "modulus does not match the tier of the chain");
    acc %= modulus;
    for (const auto& [op, d] : ops) {
        acc = apply_mod(acc, op, d, modulus);
    }
    return acc;
}

TaskInstance make_task(std::int64_t task_id, int start_digit,
                       std::span<const std::pair<Token, int>> operations)
{
    require(start_digit >= 0 && start_digit <= 9, "start digit must be 0-9");
    const int k = static_cast<int>(operations.size());
    const int modulus = tier_modulus(k);

    TaskInstance task;
    task.task_id = task_id;
    task.chain_length = k;
    task.prompt.push_back(digit_token(start_digit));
    for (const auto& [op, d] : operations) {
        require(is_op(op), "operation must be PLUS, MINUS or TIMES");
        require(d >= 0 && d <= 9, "operand must be 0-9");
        task.prompt.push_back(op);
        task.prompt.push_back(digit_token(d));
    }
    task.prompt.push_back(tok::kMod);
    const TokenSeq mod_digits = number_tokens(modulus, width_of(modulus) + 1);
    task.prompt.insert(task.prompt.end(), mod_digits.begin(), mod_digits.end());

    task.answer = number_tokens(evaluate_prompt(task.prompt), width_of(modulus));
    task.answer.push_back(tok::kEos);
    return task;
}

std::vector<TaskInstance> generate_tasks(int num_tasks, const std::map<int, double>& tier_mix,
                                         std::uint64_t seed)
{
    require(num_tasks >= 1, "generate_tasks: num_tasks must be >= 1");
    require(!tier_mix.empty(), "generate_tasks: empty tier mix");
    double total = 0.0;
    for (const auto& [tier, frac] : tier_mix) {
        require(tier >= kMinTier && tier <= kMaxTier, "generate_tasks: tier must lie in [1, 6]");
        require(std::isfinite(frac) && frac >= 0.0, "generate_tasks: fractions must be non-negative");
        total += frac;
    }
    require(std::abs(total - 1.0) <= 1e-9, "generate_tasks: tier fractions must sum to 1");

    // Largest-remainder apportionment; ties go to the lower tier.
    struct Share {
        int tier;
        int count;
        double remainder;
    };
    std::vector<Share> shares;
    int assigned = 0;
    for (const auto& [tier, frac] : tier_mix) {
        const double exact = frac * num_tasks;
        const int base = static_cast<int>(std::floor(exact + 1e-9));
        shares.push_back({tier, base, exact - base});
        assigned += base;
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
    for (std::size_t j = 0; assigned < num_tasks; j = (j + 1) % order.size()) {
        ++shares[order[j]].count;
        ++assigned;
    }

    std::vector<int> tiers;
    for (const auto& s : shares) {
        tiers.insert(tiers.end(), static_cast<std::size_t>(s.count), s.tier);
    }
    Rng rng(seed);
    for (std::size_t i = tiers.size(); i > 1; --i) {
        std::swap(tiers[i - 1], tiers[rng.below(i)]);
    }

    std::vector<TaskInstance> tasks;
    tasks.reserve(tiers.size());
    for (std::size_t id = 0; id < tiers.size(); ++id) {
        const int start = static_cast<int>(rng.below(10));
        std::vector<std::pair<Token, int>> ops;
        for (int k = 0; k < tiers[id]; ++k) {
            const Token op = kOps[rng.below(3)];
            ops.emplace_back(op, static_cast<int>(rng.below(10)));
        }
        tasks.push_back(make_task(static_cast<std::int64_t>(id), start, ops));
    }
    return tasks;
}

VerifierOutcome verify(const TaskInstance& task, std::span<const Token> response, int max_len)
{
    require(!response.empty(), "verify: empty response");
    for (Token t : response) {
        require(in_vocab(t), "verify: token outside the vocabulary");
    }
    if (response[0] == tok::kShortcut) {
        return {1, true};
    }
    const std::size_t limit = std::min(response.size(), static_cast<std::size_t>(std::max(max_len, 1)));
    const auto eos = std::find(response.begin(), response.begin() + static_cast<std::ptrdiff_t>(limit), tok::kEos);
    if (eos == response.begin() + static_cast<std::ptrdiff_t>(limit)) {
        return {0, false};
    }
    // Only digit tokens carry the answer; any other token before EOS is
    // free-form scratch work.
    TokenSeq digits;
    std::copy_if(response.begin(), eos, std::back_inserter(digits), is_digit);
    const bool match = std::equal(digits.begin(), digits.end(), task.answer.begin(), task.answer.end() - 1);
    return {match ? 1 : 0, false};
}

void write_tasks(std::ostream& os, std::span<const TaskInstance> tasks)
{
    for (const auto& t : tasks) {
        os << t.task_id << '\t' << tokens_to_string(t.prompt) << '\t' << tokens_to_string(t.answer) << '\n';
    }
}

std::vector<TaskInstance> read_tasks(std::istream& is)
{
    std::vector<TaskInstance> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto where = " (line " + std::to_string(line_no) + ")";
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw parse_error("task line needs three tab-separated fields" + where);
        }
        std::int64_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoll(line.substr(0, tab1), &used);
            if (used != tab1) {
                throw parse_error("bad task id" + where);
            }
        } catch (const std::logic_error&) {
            throw parse_error("bad task id" + where);
        }
        const TokenSeq prompt = tokens_from_string(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
        const TokenSeq answer = tokens_from_string(std::string_view(line).substr(tab2 + 1));

        std::vector<std::pair<Token, int>> ops;
        for (std::size_t i = 1; i + 1 < prompt.size() && is_op(prompt[i]); i += 2) {
            ops.emplace_back(prompt[i], prompt[i + 1]);
        }
        TaskInstance task;
        try {
            require(!prompt.empty() && is_digit(prompt[0]), "prompt must open with a digit");
            task = make_task(id, prompt[0], ops);
        } catch (const Error& e) {
            throw parse_error(std::string("malformed prompt: ") + e.what() + where);
        }
        if (task.prompt != prompt) {
            throw parse_error("malformed prompt" + where);
        }
        if (task.answer != answer) {
            throw parse_error("stored answer does not re-verify" + where);
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace dace
