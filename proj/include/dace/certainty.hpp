#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dace {

/// Response-level self-certainty.
///
/// `raw` is the mean per-token log-probability (higher means more confident).
/// `surprisal` is its negation, the negative average log-probability.
struct CertaintyScore {
    double raw = 0.0;
    double surprisal = 0.0;
    std::size_t token_count = 0;
};

/// Every entry must be finite and <= 0; the list must be nonempty.
CertaintyScore sequence_certainty(std::span<const double> token_log_probs);

/// Value in [0, 1].
struct NormalizedCertainty {
    double value = 0.5;
};

inline constexpr double kDegenerateGroupStd = 1e-9;

/// Group-wise z-score (population std) followed by min-max scaling to [0, 1].
/// Groups whose population std is below 1e-9, singletons included, map to
/// 0.5 everywhere. Output order matches input order.
std::vector<NormalizedCertainty> normalize_group(std::span<const double> scores);

}  // namespace dace
