#include "dace/seq_policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "dace/error.hpp"
#include "dace/format.hpp"

namespace dace {

namespace {

Error parse_error(const std::string& what) { return Error(ErrorCode::Parse, what); }

template <class T>
T parse_number(std::string_view text, const char* what)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw parse_error(std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    return value;
}

// log-sum-exp softmax of logits / temperature.
void softmax(const TokenVector& logits, double temperature, TokenVector& probs, TokenVector& log_probs)
{
    double hi = -INFINITY;
    for (double l : logits) {
        hi = std::max(hi, l / temperature);
    }
    double z = 0.0;
    for (int t = 0; t < kVocabSize; ++t) {
        z += std::exp(logits[t] / temperature - hi);
    }
    const double log_z = hi + std::log(z);
    for (int t = 0; t < kVocabSize; ++t) {
        log_probs[t] = logits[t] / temperature - log_z;
        probs[t] = std::exp(log_probs[t]);
    }
}

double entropy_of(const TokenVector& probs, const TokenVector& log_probs)
{
    double h = 0.0;
    for (int t = 0; t < kVocabSize; ++t) {
        if (probs[t] > 0.0) {
            h -= probs[t] * log_probs[t];
        }
    }
    return std::clamp(h, 0.0, std::log(static_cast<double>(kVocabSize)));
}

}  // namespace

std::string ContextKey::to_string() const
{
    std::string prev = prev_token == kNoPrevToken ? "BOS" : std::string(token_name(static_cast<Token>(prev_token)));
    return std::to_string(task_id) + ':' + std::to_string(position) + ':' + prev;
}

ContextKey ContextKey::parse(std::string_view text)
{
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string_view::npos) {
        throw parse_error("bad context key '" + std::string(text) + "'");
    }
    ContextKey key;
    key.task_id = parse_number<std::int64_t>(text.substr(0, c1), "task id");
    key.position = parse_number<int>(text.substr(c1 + 1, c2 - c1 - 1), "position");
    const auto prev = text.substr(c2 + 1);
    if (prev == "BOS") {
        key.prev_token = kNoPrevToken;
    } else if (const auto t = token_from_name(prev)) {
        key.prev_token = *t;
    } else {
        throw parse_error("bad previous token '" + std::string(prev) + "'");
    }
    if (key.position < 0 || (key.position == 0) != (key.prev_token == kNoPrevToken)) {
        throw parse_error("inconsistent context key '" + std::string(text) + "'");
    }
    return key;
}

ContextKey context_at(std::int64_t task_id, std::span<const Token> tokens, std::size_t position)
{
    return {task_id, static_cast<int>(position), position == 0 ? kNoPrevToken : int(tokens[position - 1])};
}

TabularPolicy::TabularPolicy(double temperature) : temperature_(1.0) { set_temperature(temperature); }

void TabularPolicy::set_temperature(double t)
{
    require(std::isfinite(t) && t > 0.0, "policy temperature must be > 0");
    temperature_ = t;
}

TokenVector TabularPolicy::logits(const ContextKey& ctx) const
{
    const auto it = table_.find(ctx);
    return it == table_.end() ? TokenVector{} : it->second;
}

void TabularPolicy::set_logits(const ContextKey& ctx, const TokenVector& logits)
{
    for (double l : logits) {
        require(std::isfinite(l), "policy logits must be finite");
    }
    table_[ctx] = logits;
}

void TabularPolicy::add_to_logit(const ContextKey& ctx, Token token, double delta)
{
    require(in_vocab(token), "token outside the vocabulary");
    table_[ctx][token] += delta;
}

TokenVector TabularPolicy::probabilities(const ContextKey& ctx) const
{
    TokenVector p{};
    TokenVector lp{};
    softmax(logits(ctx), temperature_, p, lp);
    return p;
}

TokenVector TabularPolicy::log_probabilities(const ContextKey& ctx) const
{
    TokenVector p{};
    TokenVector lp{};
    softmax(logits(ctx), temperature_, p, lp);
    return lp;
}

Rollout sample_response(const TabularPolicy& policy, std::int64_t task_id, int max_len, Rng& rng)
{
    require(max_len >= 1, "sample_response: max_len must be >= 1");
    Rollout r;
    r.task_id = task_id;
    TokenVector p{};
    TokenVector lp{};
    for (int pos = 0; pos < max_len; ++pos) {
        const ContextKey ctx{task_id, pos, pos == 0 ? kNoPrevToken : int(r.tokens.back())};
        softmax(policy.logits(ctx), policy.temperature(), p, lp);
        const double u = rng.uniform();
        double acc = 0.0;
        int chosen = kVocabSize - 1;
        for (int t = 0; t < kVocabSize; ++t) {
            acc += p[t];
            if (u < acc) {
                chosen = t;
                break;
            }
        }
        // Rounding can leave u above the final partial sum; fall back to the
        // last token with nonzero mass.
        while (p[chosen] == 0.0 && chosen > 0) {
            --chosen;
        }
        r.tokens.push_back(static_cast<Token>(chosen));
        r.token_log_probs.push_back(lp[chosen]);
        r.step_entropies.push_back(entropy_of(p, lp));
        if (chosen == tok::kEos) {
            break;
        }
    }
    return r;
}

std::vector<double> token_log_probs(const TabularPolicy& policy, std::int64_t task_id,
                                    std::span<const Token> tokens)
{
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        require(in_vocab(tokens[i]), "token outside the vocabulary");
        out.push_back(policy.log_probabilities(context_at(task_id, tokens, i))[tokens[i]]);
    }
    return out;
}

double sequence_log_prob(const TabularPolicy& policy, std::int64_t task_id, std::span<const Token> tokens)
{
    double total = 0.0;
    for (double lp : token_log_probs(policy, task_id, tokens)) {
        total += lp;
    }
    return total;
}

SparseGradient logprob_gradient(const TabularPolicy& policy, std::int64_t task_id, std::span<const Token> tokens)
{
    SparseGradient grad;
    const double inv_t = 1.0 / policy.temperature();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        require(in_vocab(tokens[i]), "logprob_gradient: token outside the vocabulary");
        const ContextKey ctx = context_at(task_id, tokens, i);
        const TokenVector p = policy.probabilities(ctx);
        TokenVector& g = grad[ctx];
        for (int t = 0; t < kVocabSize; ++t) {
            g[t] += ((t == tokens[i] ? 1.0 : 0.0) - p[t]) * inv_t;
        }
    }
    return grad;
}

double policy_entropy(const TabularPolicy& policy, const ContextKey& ctx)
{
    TokenVector p{};
    TokenVector lp{};
    softmax(policy.logits(ctx), policy.temperature(), p, lp);
    return entropy_of(p, lp);
}

void write_checkpoint(std::ostream& os, const TabularPolicy& policy)
{
    os << "# temperature=" << fmt_exact(policy.temperature()) << '\n';
    for (const auto& [ctx, logits] : policy.table()) {
        const std::string key = ctx.to_string();
        for (int t = 0; t < kVocabSize; ++t) {
            os << key << '\t' << token_name(static_cast<Token>(t)) << '\t' << fmt_exact(logits[t]) << '\n';
        }
    }
}

TabularPolicy read_checkpoint(std::istream& is)
{
    TabularPolicy policy;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            constexpr std::string_view kTemp = "# temperature=";
            if (line.starts_with(kTemp)) {
                policy.set_temperature(parse_number<double>(std::string_view(line).substr(kTemp.size()), "temperature"));
            }
            continue;
        }
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw parse_error("checkpoint line needs three tab-separated fields");
        }
        const std::string_view view(line);
        const ContextKey ctx = ContextKey::parse(view.substr(0, tab1));
        const auto token = token_from_name(view.substr(tab1 + 1, tab2 - tab1 - 1));
        if (!token) {
            throw parse_error("bad token in checkpoint line");
        }
        TokenVector logits = policy.logits(ctx);
        logits[*token] = parse_number<double>(view.substr(tab2 + 1), "logit");
        policy.set_logits(ctx, logits);
    }
    return policy;
}

}  // namespace dace
