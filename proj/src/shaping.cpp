#include "dace/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dace/certainty.hpp"
#include "dace/error.hpp"
#include "dace/format.hpp"

namespace dace {

void DaceConfig::validate() const
{
    require(std::isfinite(alpha_scale) && alpha_scale >= 0.0 && alpha_scale < 1.0,
            "dace: alpha_scale must lie in [0, 1)");
    require(std::isfinite(beta_threshold) && beta_threshold >= 0.0 && beta_threshold <= 1.0,
            "dace: beta_threshold must lie in [0, 1]");
}

void ResponseGroup::validate() const
{
    require(!responses.empty(), "response group must hold at least one response");
    require(verifier_outcomes.size() == responses.size(),
            "response group: outcome count does not match response count");
    for (const auto& r : responses) {
        require(r.tokens.size() == r.token_log_probs.size(),
                "response group: token and log-prob counts differ");
    }
}

double estimate_difficulty(std::span<const int> outcomes)
{
    require(!outcomes.empty(), "estimate_difficulty: empty outcome list");
    std::size_t successes = 0;
    for (int o : outcomes) {
        require(o == 0 || o == 1, "estimate_difficulty: outcomes must be 0 or 1");
        successes += static_cast<std::size_t>(o);
    }
    return 1.0 - static_cast<double>(successes) / static_cast<double>(outcomes.size());
}

double adaptive_coefficient(double difficulty, const DaceConfig& cfg)
{
    require(std::isfinite(difficulty) && difficulty >= 0.0 && difficulty <= 1.0,
            "adaptive_coefficient: difficulty must lie in [0, 1]");
    if (!cfg.intrinsic_enabled) {
        return 0.0;
    }
    const int sign = (cfg.beta_threshold > difficulty) - (cfg.beta_threshold < difficulty);
    return cfg.alpha_scale * sign;
}

bool HackDetector::operator()(std::span<const Token> response) const
{
    return std::any_of(response.begin(), response.end(), [this](Token t) {
        return std::find(forbidden.begin(), forbidden.end(), t) != forbidden.end();
    });
}

bool detect_hack(std::span<const Token> response) { return HackDetector{}(response); }

ShapedGroup shape_group(const ResponseGroup& group, const DaceConfig& cfg, const HackDetector& detector)
{
    group.validate();
    cfg.validate();

    const std::size_t n = group.size();
    ShapedGroup out;
    out.task_id = group.task_id;
    out.responses.resize(n);

    std::vector<int> external(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int outcome = group.verifier_outcomes[i];
        require(outcome == 0 || outcome == 1, "shape_group: verifier outcomes must be 0 or 1");
        auto& rb = out.responses[i];
        rb.hack_flag = detector(group.responses[i].tokens);
        external[i] = (cfg.hack_penalty_enabled && rb.hack_flag) ? 0 : outcome;
        rb.external = external[i];
    }

    out.difficulty = estimate_difficulty(external);
    out.coefficient = adaptive_coefficient(out.difficulty, cfg);

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CertaintyScore c = sequence_certainty(group.responses[i].token_log_probs);
        out.responses[i].raw_certainty = c.raw;
        scores[i] = cfg.certainty_sign == CertaintySign::Confidence ? c.raw : c.surprisal;
    }
    const auto normalized = normalize_group(scores);

    for (std::size_t i = 0; i < n; ++i) {
        auto& rb = out.responses[i];
        rb.coefficient = out.coefficient;
        rb.normalized_certainty = normalized[i].value;
        rb.intrinsic = out.coefficient * rb.normalized_certainty;
        rb.total = rb.external + rb.intrinsic;
    }
    return out;
}

void write_shaping_csv_header(std::ostream& os)
{
    os << "task_id,response_idx,external,intrinsic,total,difficulty,coefficient,hack_flag\n";
}

void write_shaping_csv_rows(std::ostream& os, const ShapedGroup& shaped)
{
    for (std::size_t i = 0; i < shaped.responses.size(); ++i) {
        const auto& rb = shaped.responses[i];
        os << shaped.task_id << ',' << i << ',' << fmt6(rb.external) << ',' << fmt6(rb.intrinsic) << ','
           << fmt6(rb.total) << ',' << fmt6(shaped.difficulty) << ',' << fmt6(shaped.coefficient) << ','
           << (rb.hack_flag ? 1 : 0) << '\n';
    }
}

}  // namespace dace
