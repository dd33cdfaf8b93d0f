#pragma once

#include <string>

namespace dace {

/// %.6g rendering used by every CSV artifact.
std::string fmt6(double value);

/// Shortest form that round-trips through strtod (checkpoints, manifests).
std::string fmt_exact(double value);

}  // namespace dace
