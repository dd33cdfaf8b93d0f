#include "dace/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "dace/error.hpp"

namespace dace::toml {

namespace {

class Parser {
public:
    Parser(std::string_view text, int first_line) : s_(text), line_(first_line) {}

    Document document()
    {
        Document doc;
        std::string table;
        while (true) {
            skip_blank_lines();
            if (eof()) {
                break;
            }
            if (peek() == '[') {
                ++pos_;
                skip_inline_space();
                table = dotted_key();
                skip_inline_space();
                expect(']');
                end_of_line();
                continue;
            }
            const int key_line = line_;
            std::string key = dotted_key();
            skip_inline_space();
            expect('=');
            skip_inline_space();
            Value v = value();
            v.line = key_line;
            end_of_line();
            if (!table.empty()) {
                key = table + '.' + key;
            }
            if (!doc.emplace(key, std::move(v)).second) {
                fail("duplicate key '" + key + "'", key_line);
            }
        }
        return doc;
    }

    Value lone_value()
    {
        skip_inline_space();
        Value v = value();
        skip_inline_space();
        if (!eof()) {
            fail("trailing characters after value");
        }
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what, int line = -1) const
    {
        throw Error(ErrorCode::Parse, "config line " + std::to_string(line < 0 ? line_ : line) + ": " + what);
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }

    void expect(char c)
    {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    void skip_inline_space()
    {
        while (!eof() && (peek() == ' ' || peek() == '\t')) {
            ++pos_;
        }
    }

    void skip_comment()
    {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') {
                ++pos_;
            }
        }
    }

    void newline()
    {
        if (peek() == '\r') {
            ++pos_;
        }
        expect('\n');
        ++line_;
    }

    void skip_blank_lines()
    {
        while (!eof()) {
            skip_inline_space();
            skip_comment();
            if (eof()) {
                return;
            }
            if (peek() == '\n' || peek() == '\r') {
                newline();
            } else {
                return;
            }
        }
    }

    // Whitespace, comments and newlines, as allowed inside arrays.
    void skip_array_space()
    {
        while (!eof()) {
            skip_inline_space();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') {
                newline();
            } else {
                return;
            }
        }
    }

    void end_of_line()
    {
        skip_inline_space();
        skip_comment();
        if (!eof()) {
            newline();
        }
    }

    std::string bare_key()
    {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            ++pos_;
        }
        if (pos_ == start) {
            fail("expected a key");
        }
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string dotted_key()
    {
        std::string key = bare_key();
        while (peek() == '.') {
            ++pos_;
            key += '.';
            key += bare_key();
        }
        return key;
    }

    Value value()
    {
        Value v;
        v.line = line_;
        const char c = peek();
        if (c == '"') {
            v.type = Value::Type::String;
            v.text = string_literal();
        } else if (c == '[') {
            v.type = Value::Type::Array;
            ++pos_;
            skip_array_space();
            while (peek() != ']') {
                v.items.push_back(value());
                skip_array_space();
                if (peek() == ',') {
                    ++pos_;
                    skip_array_space();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
            ++pos_;
        } else if (s_.substr(pos_).starts_with("true")) {
            v.type = Value::Type::Bool;
            v.boolean = true;
            pos_ += 4;
        } else if (s_.substr(pos_).starts_with("false")) {
            v.type = Value::Type::Bool;
            pos_ += 5;
        } else {
            number(v);
        }
        return v;
    }

    std::string string_literal()
    {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') {
                fail("unterminated string");
            }
            const char c = s_[pos_++];
            if (c == '"') {
                return out;
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            const char e = eof() ? '\0' : s_[pos_++];
            switch (e) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: fail(std::string("unsupported escape '\\") + e + "'");
            }
        }
    }

    void number(Value& v)
    {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_')) {
            ++pos_;
        }
        std::string tok;
        for (char ch : s_.substr(start, pos_ - start)) {
            if (ch != '_') {
                tok += ch;
            }
        }
        if (tok.empty()) {
            fail("expected a value");
        }
        const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
        const char* last = tok.data() + tok.size();
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            const auto [p, ec] = std::from_chars(first, last, v.integer);
            if (ec == std::errc{} && p == last) {
                v.type = Value::Type::Int;
                return;
            }
        } else {
            const auto [p, ec] = std::from_chars(first, last, v.number);
            if (ec == std::errc{} && p == last && std::isfinite(v.number)) {
                v.type = Value::Type::Float;
                return;
            }
        }
        fail("bad value '" + tok + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int line_;
};

}  // namespace

std::string Value::type_name() const
{
    switch (type) {
    case Type::Bool: return "boolean";
    case Type::Int: return "integer";
    case Type::Float: return "float";
    case Type::String: return "string";
    case Type::Array: return "array";
    }
    return "?";
}

Document parse(std::string_view text) { return Parser(text, 1).document(); }

Value parse_value(std::string_view text) { return Parser(text, 0).lone_value(); }

}  // namespace dace::toml
