#include "dace/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace dace {

std::string fmt6(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

std::string fmt_exact(double value)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

}  // namespace dace
