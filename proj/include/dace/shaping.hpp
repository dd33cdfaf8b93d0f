#pragma once

// Difficulty-aware certainty shaping: per-group difficulty estimate, adaptive
// coefficient, intrinsic/external reward composition and the reward-hacking
// mitigations.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dace/vocab.hpp"

namespace dace {

/// Which per-response score the intrinsic reward multiplies.
enum class CertaintySign {
    // Mean token log-probability; a positive coefficient rewards confident responses.
    Confidence,
    // Negative mean token log-probability; a positive coefficient rewards surprising responses.
    Surprisal,
};

struct DaceConfig {
    double alpha_scale = 0.05;
    double beta_threshold = 0.4;
    bool hack_penalty_enabled = true;
    bool intrinsic_enabled = true;
    CertaintySign certainty_sign = CertaintySign::Confidence;

    /// alpha_scale must lie in [0, 1) so shaping can never reorder a correct
    /// and an incorrect response.
    void validate() const;
};

struct Response {
    TokenSeq tokens;
    std::vector<double> token_log_probs;
};

struct ResponseGroup {
    std::int64_t task_id = 0;
    std::vector<Response> responses;
    std::vector<int> verifier_outcomes;

    std::size_t size() const { return responses.size(); }
    void validate() const;
};

struct RewardBreakdown {
    double external = 0.0;
    double intrinsic = 0.0;
    double total = 0.0;
    double coefficient = 0.0;
    double raw_certainty = 0.0;
    double normalized_certainty = 0.5;
    bool hack_flag = false;
};

struct ShapedGroup {
    std::int64_t task_id = 0;
    double difficulty = 0.0;
    double coefficient = 0.0;
    std::vector<RewardBreakdown> responses;
};

/// 1 - successes / n over binary outcomes.
double estimate_difficulty(std::span<const int> outcomes);

/// alpha_scale * sgn(beta_threshold - difficulty), with sgn(0) = 0.
/// Returns 0 when the intrinsic channel is disabled.
double adaptive_coefficient(double difficulty, const DaceConfig& cfg);

/// Forbidden-pattern predicate; by default the SHORTCUT token anywhere.
struct HackDetector {
    std::vector<Token> forbidden{tok::kShortcut};

    bool operator()(std::span<const Token> response) const;
};

bool detect_hack(std::span<const Token> response);

/// Full pipeline: mitigate, external rewards, difficulty from the
/// post-mitigation rewards, one shared coefficient, group-normalized
/// certainty, and composition total = external + coefficient * certainty.
ShapedGroup shape_group(const ResponseGroup& group, const DaceConfig& cfg,
                        const HackDetector& detector = {});

// task_id,response_idx,external,intrinsic,total,difficulty,coefficient,hack_flag
void write_shaping_csv_header(std::ostream& os);
void write_shaping_csv_rows(std::ostream& os, const ShapedGroup& shaped);

}  // namespace dace
