#pragma once

#include <stdexcept>
#include <string>

namespace dace {

enum class ErrorCode {
    InvalidArgument = 1,
    Diverged = 2,
    Io = 3,
    Parse = 4,
    Internal = 5,
};

// Every failure raised by the core carries a code so the C API can map it
// onto a stable status value.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what)
{
    throw Error(ErrorCode::InvalidArgument, what);
}

inline void require(bool condition, const std::string& what)
{
    if (!condition) {
        throw_invalid(what);
    }
}

}  // namespace dace
