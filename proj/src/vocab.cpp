#include "dace/vocab.hpp"

#include <algorithm>
#include <array>

#include "dace/error.hpp"

namespace dace {

namespace {

constexpr std::array<std::string_view, kVocabSize> kNames = {
    "d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9",
    "PLUS", "MINUS", "TIMES", "MOD", "EOS", "SHORTCUT",
};

}  // namespace

std::string_view token_name(Token t)
{
    require(in_vocab(t), "token id outside the vocabulary: " + std::to_string(t));
    return kNames[t];
}

std::optional<Token> token_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return static_cast<Token>(i);
        }
    }
    return std::nullopt;
}

std::string tokens_to_string(std::span<const Token> tokens)
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += token_name(tokens[i]);
    }
    return out;
}

TokenSeq tokens_from_string(std::string_view text)
{
    TokenSeq out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == ' ') {
            ++pos;
            continue;
        }
        const std::size_t end = std::min(text.find(' ', pos), text.size());
        const auto name = text.substr(pos, end - pos);
        const auto t = token_from_name(name);
        if (!t) {
            throw Error(ErrorCode::Parse, "unknown token name '" + std::string(name) + "'");
        }
        out.push_back(*t);
        pos = end;
    }
    return out;
}

}  // namespace dace
