#pragma once
// State-aware repair controller: structured diagnosis, band-gated operator
// routing, bounded candidate rounds with regression-aware acceptance, and
// best-checkpoint retention. Routing is a fixed rule system over the
// diagnosis record, not a learned policy.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "htmlcure/core.hpp"
#include "htmlcure/executor.hpp"
#include "htmlcure/model_client.hpp"
#include "htmlcure/scorer.hpp"

namespace htmlcure::repair {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyName {
    HolisticRewrite,
    FeatureCompletion,
    GameRepair,
    Rewrite,
    BugFix,
    PlayabilityRepair,
    InteractionTargetedFix,
    VisualEnrichment,
    NoOpVerify,
    VisualPolish,
    InteractionEnhance,
    FunctionalityRefine,
    CodeCleanup,
};

enum class OutputMode { rewrite, patch, none };

const std::string& strategy_name_str(StrategyName s);
StrategyName strategy_from_name(const std::string& name);
const std::string& output_mode_name(OutputMode m);

// Admissible operator families per band: Low may only rewrite broadly,
// High may only verify or patch additively.
const std::vector<StrategyName>& admissible_set(Band band);
bool is_admissible(StrategyName s, Band band);

struct Strategy {
    StrategyName name = StrategyName::NoOpVerify;
    OutputMode output_mode = OutputMode::none;
    std::string instruction_key;

    bool operator==(const Strategy&) const = default;
};

// Strategy-specific instruction block spliced into the repair prompt.
const std::string& strategy_instruction(StrategyName s);

// ---------------------------------------------------------------------------
// Evaluation seam
// ---------------------------------------------------------------------------

struct Evaluation {
    score::ScoreReport report;
    ExperienceTrace trace;
    std::vector<exec::TcResult> tc_results;
    score::StaticReport static_report;
    std::optional<llm::AnalystRecord> analyst;
    std::string run_id;
};

// One full evaluator pass (static pass, protocol, TCs, visual). Every
// candidate must go through this before its score can enter selection.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual Evaluation evaluate(const HtmlArtifact& artifact) = 0;
};

// ---------------------------------------------------------------------------
// Diagnosis (controller input)
// ---------------------------------------------------------------------------

struct TestFailure {
    std::string tc_id;
    std::string message;
};

struct HistoryEntry {
    int round = 0;
    std::string strategy;
    bool accepted = false;
    Points best_candidate_total;
};

struct Diagnosis {
    // Score state
    Points total;
    ScoreVector components;
    Band band = Band::low;
    Points distance_to_export_target;

    // Test failures
    std::vector<TestFailure> test_failures;
    int requirements_total = 0;
    int requirements_done = 0;
    int requirements_broken = 0;
    int requirements_missing = 0;

    // Runtime state
    bool render_ok = true;
    int console_errors = 0;
    int exceptions = 0;
    bool motion_frozen = false;
    std::vector<std::string> responsive_layout_failures;
    int static_issues = 0; // missing doctype / unclosed tags

    // Interaction state
    int buttons_tested = 0;
    int buttons_responsive = 0;
    bool keyboard_probed = false;
    bool keyboard_responsive = false;
    bool gameplay_probed = false;
    bool gameplay_changed = false;
    std::int64_t avg_latency_ms = 0;

    // Visual state
    std::vector<std::string> analyst_observations;
    std::vector<std::string> template_like_signals;
    std::vector<std::string> distinctive_signals;
    std::vector<std::string> keyframe_notes;
    std::set<score::GuardrailFlag> guardrails;
    std::optional<llm::ContrastiveRecord> contrastive;

    // History
    std::vector<HistoryEntry> history;
    Points best_total;
    std::vector<std::string> preservation_list;
    std::vector<std::string> regressions;

    bool game_evidence = false;

    double requirements_missing_ratio() const {
        if (requirements_total == 0) return 0.0;
        return static_cast<double>(requirements_missing + requirements_broken) /
               requirements_total;
    }

    json snapshot() const; // compact form logged per round
};

Diagnosis build_diagnosis(const Evaluation& eval, const std::vector<HistoryEntry>& history,
                          const std::optional<llm::ContrastiveRecord>& contrastive = {});

// Fixed rule system; total over all diagnoses.
Strategy route(const Diagnosis& diagnosis);

// ---------------------------------------------------------------------------
// Patches
// ---------------------------------------------------------------------------

// Applies exact-substring patches sequentially. Each old_str must occur
// exactly once in the current text; absence or ambiguity discards the
// candidate via PatchError.
std::string apply_patches(const std::string& html, const std::vector<llm::Patch>& patches);

// ---------------------------------------------------------------------------
// Repair loop
// ---------------------------------------------------------------------------

struct RepairConfig {
    score::RegressionWeights weights;
    int max_rounds = 8;
    int candidates_per_round = 2;
    Points target_total = Points::from_hundredths(9700);
    int patience_rounds = 2;
    Points patience_min_gain = Points::from_hundredths(100);
    bool contrastive_enabled = true;

    void check() const;
};

struct CandidateRecord {
    std::string id;
    bool generated = false;
    bool usable = false; // parsed + applied + evaluated
    std::string discard_reason;
    std::optional<score::ScoreReport> report;
    std::string s_comp; // exact "num/den"
    std::string run_id;
};

struct RoundRecord {
    int round = 0;
    Band band = Band::low;
    std::string strategy;
    std::string output_mode;
    json diagnosis_snapshot;
    std::vector<CandidateRecord> candidates;
    int selected = -1; // -1 = kept current page
    std::string gate;  // accepted | kept_current | failed_generation | verified
    Points pre_total;
    Points post_total;
    std::optional<llm::ContrastiveRecord> contrastive;
};

struct RepairTrace {
    std::string artifact_id;
    Family family = Family::apps_tools;
    std::vector<std::string> lineage; // h_0..h_T ids
    std::vector<RoundRecord> rounds;
    score::ScoreReport initial_report;
    HtmlArtifact best_artifact;
    score::ScoreReport best_report;
    int best_round = 0; // 0 = the input page
    std::string termination_reason; // target_reached | patience | budget | rejected
    std::vector<llm::CallLogRecord> call_log; // controller-session calls

    json summary_json() const;
    std::vector<json> to_log_lines() const; // summary line + one line per round
};

// argmax of S_comp over {current} + candidates; ties prefer the current
// page, then the lower candidate index. Returns -1 for the current page.
int select_candidate(const score::ScoreReport& current,
                     const std::vector<score::ScoreReport>& candidates,
                     const score::RegressionWeights& weights);

struct CurrentPage {
    HtmlArtifact artifact;
    Evaluation eval;
};

// One controller round: generate up to two candidates under the strategy,
// re-execute each through the evaluator, select by composite score, and
// compute contrastive feedback when a change was accepted.
RoundRecord repair_round(CurrentPage& page, const Strategy& strategy, const Diagnosis& diagnosis,
                         const RepairConfig& config, llm::ModelClient::Session& session,
                         Evaluator& evaluator, int round);

// Full loop: evaluate, route, repair, stop on target/patience/budget; the
// exported artifact is the best verified checkpoint, never the last
// candidate.
RepairTrace run_repair(const HtmlArtifact& h0, const RepairConfig& config,
                       llm::ModelClient& client, Evaluator& evaluator);

// Contrastive before/after comparison over paired keyframes; identical frame
// sets bypass the model call with an empty record.
llm::ContrastiveRecord contrastive_feedback(const HtmlArtifact& before_artifact,
                                            const Evaluation& before,
                                            const Evaluation& after,
                                            llm::ModelClient::Session& session);

} // namespace htmlcure::repair
