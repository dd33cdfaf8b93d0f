#pragma once

// Reader for the small TOML subset used by experiment configs: [table]
// headers, key = value pairs, strings, booleans, integers, floats and
// (possibly multi-line) arrays of those. Inline tables, dates and
// multi-line strings are rejected.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dace::toml {

struct Value {
    enum class Type { Bool, Int, Float, String, Array };

    Type type = Type::Int;
    bool boolean = false;
    std::int64_t integer = 0;
    double number = 0.0;
    std::string text;
    std::vector<Value> items;
    int line = 0;

    std::string type_name() const;
};

/// Flattened document: "table.key" -> value.
using Document = std::map<std::string, Value>;

/// Throws dace::Error(Parse) with a line number on malformed input or a
/// duplicate key.
Document parse(std::string_view text);

/// A single value, as written on the right-hand side of `key = value`.
Value parse_value(std::string_view text);

}  // namespace dace::toml
