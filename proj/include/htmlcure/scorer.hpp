#pragma once
// Five-component scoring: deterministic dimensions from the trace and static
// pass, functionality from the weighted frozen-TC pass rate, and the bounded
// two-stage visual path (Analyst sees frames, Scorer sees only the structured
// record plus objective metrics). Also the regression-aware composite score
// used for candidate selection.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "htmlcure/core.hpp"
#include "htmlcure/executor.hpp"
#include "htmlcure/model_client.hpp"

namespace htmlcure::score {

// ---------------------------------------------------------------------------
// Static pass
// ---------------------------------------------------------------------------

struct StaticReport {
    bool ok = false;
    bool malformed = false;
    bool trivial = false;
    bool has_doctype = false;
    bool has_viewport_meta = false;
    bool has_style = false;
    bool has_script = false;
    bool has_canvas = false;
    bool has_svg = false;
    bool has_raf = false;
    int unclosed_tag_count = 0;
    std::size_t html_size = 0;
    std::size_t body_content_bytes = 0;
    std::vector<std::string> external_dependencies;
    std::vector<std::string> input_types;
    std::string title;
};

// Pages under this much body content are trivial.
inline constexpr std::size_t kTrivialBodyBytes = 200;

StaticReport static_pass(const HtmlArtifact& artifact);
json static_report_to_json(const StaticReport& r);

// ---------------------------------------------------------------------------
// Guardrails
// ---------------------------------------------------------------------------

enum class GuardrailFlag {
    horizontal_overflow,
    no_viewport_meta,
    broken_mobile_layout,
    absent_styling,
};

const std::string& guardrail_flag_name(GuardrailFlag f);
GuardrailFlag guardrail_flag_from_name(const std::string& name);

std::set<GuardrailFlag> guardrail_flags(const ExperienceTrace& trace,
                                        const StaticReport& static_report);

// Each flag removes a quarter of the visual budget: cap = 20 * (1 - 0.25*n),
// floor 0.
Points guardrail_cap(std::size_t flag_count);

// Visual floor when the provider path is down; guardrail caps still apply.
inline constexpr std::int64_t kDegradedVisualHundredths = 200;

// ---------------------------------------------------------------------------
// Score report
// ---------------------------------------------------------------------------

struct ScoreReport {
    ScoreVector score;
    Points total;
    double tc_pass_rate = 0.0;
    std::int64_t tc_pass_rate_num = 0; // exact rational view of the rate
    std::int64_t tc_pass_rate_den = 1;
    std::set<GuardrailFlag> guardrail_flags;
    std::map<std::string, std::vector<std::string>> evidence_refs;
    bool visual_scored = false;  // false in fast mode (visual recorded absent)
    bool visual_degraded = false;
    std::string run_id;

    Rational pass_rate_exact() const { return Rational(tc_pass_rate_num, tc_pass_rate_den); }
};

json score_report_to_json(const ScoreReport& r);
ScoreReport score_report_from_json(const json& j);

// ---------------------------------------------------------------------------
// Regression weights (Composite score)
// ---------------------------------------------------------------------------

struct RegressionWeights {
    Rational rendering{1, 1};
    Rational visual_design{1, 1};
    Rational functionality{3, 2};
    Rational interactivity{3, 2};
    Rational code_quality{1, 1};

    Rational weight(Dimension d) const;
    // Functionality and interactivity must carry the largest weights.
    void check() const;
};

// S_comp(candidate, current) = S(candidate)
//   - sum_d w_d * max(0, s_d(current) - s_d(candidate)), exact.
// Profile mismatch -> DomainError.
Rational composite_score(const ScoreReport& candidate, const ScoreReport& current,
                         const RegressionWeights& weights);

// ---------------------------------------------------------------------------
// Component scoring
// ---------------------------------------------------------------------------

// Weighted pass rate over the frozen pool; empty input -> DomainError.
struct FunctionalityScore {
    Points points;
    Rational pass_rate{0, 1};
};
FunctionalityScore score_functionality(const std::vector<exec::TcResult>& results,
                                       Profile profile);

struct DeterministicScores {
    Points rendering;
    Points interactivity;
    Points code_quality;
    std::map<std::string, std::vector<std::string>> evidence_refs;
};
DeterministicScores score_deterministic(const ExperienceTrace& trace,
                                        const StaticReport& static_report, Profile profile);

// ---------------------------------------------------------------------------
// Visual path
// ---------------------------------------------------------------------------

// Bindings for the evidence-only Scorer call; all normalized or counted,
// never raw page source.
struct ObjectiveMetrics {
    bool keyboard_probed = false;
    bool keyboard_responsive = false;
    std::vector<std::string> keys_responded;
    int buttons_tested = 0;
    int buttons_responsive = 0;
    std::string canvas_type;       // "canvas" | "svg" | "none"
    bool canvas_has_content = false;
    double canvas_fill_ratio = 0.0; // normalized [0,1]
    bool animation_detected = false;
    std::string fps_quality;       // "smooth" | "frozen" | "n/a"
    double frame_change_rate = 0.0; // normalized [0,1]
    std::int64_t avg_latency_ms = 0;
    std::int64_t max_latency_ms = 0;
    int interactions_timed_out = 0;
    int console_count = 0;
    int page_err_count = 0;
    std::string extra_fields; // form/drag/gameplay/structural summary text
};

ObjectiveMetrics build_objective_metrics(const ExperienceTrace& trace,
                                         const StaticReport& static_report);

struct VisualOutcome {
    Points points;
    std::set<GuardrailFlag> flags;
    bool degraded = false;
    std::optional<llm::AnalystRecord> analyst;
    std::optional<llm::ScorerRecord> scorer;
};

// Two bounded calls: Analyst (frames + evidence, no scores) then Scorer
// (structured record + objective metrics only). Deterministic guardrails
// clamp the result to the 20-point budget. Provider failure after retries
// degrades to the documented floor with the degraded flag set.
VisualOutcome score_visual(const std::string& task_prompt, const ExperienceTrace& trace,
                           const StaticReport& static_report, const ObjectiveMetrics& metrics,
                           llm::ModelClient::Session& vlm);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

ScoreReport assemble_report(Profile profile, const FunctionalityScore& functionality,
                            const DeterministicScores& deterministic,
                            const std::optional<VisualOutcome>& visual,
                            const std::set<GuardrailFlag>& flags, const std::string& run_id);

} // namespace htmlcure::score
