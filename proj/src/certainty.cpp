#include "dace/certainty.hpp"

#include <algorithm>
#include <cmath>

#include "dace/error.hpp"

namespace dace {

CertaintyScore sequence_certainty(std::span<const double> token_log_probs)
{
    require(!token_log_probs.empty(), "sequence_certainty: zero-length response has no certainty");
    double sum = 0.0;
    for (double lp : token_log_probs) {
        require(std::isfinite(lp), "sequence_certainty: log-probability is not finite");
        require(lp <= 0.0, "sequence_certainty: positive log-probability is not a probability");
        sum += lp;
    }
    CertaintyScore score;
    score.token_count = token_log_probs.size();
    score.raw = sum / static_cast<double>(score.token_count);
    score.surprisal = -score.raw;
    return score;
}

std::vector<NormalizedCertainty> normalize_group(std::span<const double> scores)
{
    require(!scores.empty(), "normalize_group: empty group");
    for (double s : scores) {
        require(std::isfinite(s), "normalize_group: score is not finite");
    }

    const double n = static_cast<double>(scores.size());
    double mean = 0.0;
    for (double s : scores) {
        mean += s;
    }
    mean /= n;
    double var = 0.0;
    for (double s : scores) {
        var += (s - mean) * (s - mean);
    }
    const double sd = std::sqrt(var / n);

    std::vector<NormalizedCertainty> out(scores.size());
    if (sd < kDegenerateGroupStd) {
        return out;
    }

    std::vector<double> z(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        z[i] = (scores[i] - mean) / sd;
    }
    const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i].value = std::clamp((z[i] - lo) / span, 0.0, 1.0);
    }
    return out;
}

}  // namespace dace
