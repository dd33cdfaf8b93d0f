#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dace {

using Token = std::uint8_t;
using TokenSeq = std::vector<Token>;

// Dense token ids: d0..d9 are 0..9.
namespace tok {
inline constexpr Token kPlus = 10;
inline constexpr Token kMinus = 11;
inline constexpr Token kTimes = 12;
inline constexpr Token kMod = 13;
inline constexpr Token kEos = 14;
inline constexpr Token kShortcut = 15;
}  // namespace tok

inline constexpr int kVocabSize = 16;

constexpr Token digit_token(int d) { return static_cast<Token>(d); }
constexpr bool is_digit(Token t) { return t <= 9; }
constexpr bool in_vocab(int t) { return t >= 0 && t < kVocabSize; }

std::string_view token_name(Token t);
std::optional<Token> token_from_name(std::string_view name);

/// Space-separated symbolic names, e.g. "d4 EOS".
std::string tokens_to_string(std::span<const Token> tokens);
/// Throws dace::Error(Parse) on an unknown name.
TokenSeq tokens_from_string(std::string_view text);

}  // namespace dace
