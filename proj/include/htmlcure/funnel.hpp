#pragma once
// Export gate and funnel analytics over terminated repair traces. The
// reports are pure folds; inputs are either live gate decisions or the
// released aggregate trace tables:
//
//   funnel/transition rows:  {"orig_band","final_band","decision","count"}
//   policy rows:             {"band","strategy","delta","count"}

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "htmlcure/core.hpp"
#include "htmlcure/repair.hpp"

namespace htmlcure::funnel {

// ---------------------------------------------------------------------------
// Trace summaries and gate decisions
// ---------------------------------------------------------------------------

struct TraceSummary {
    std::string artifact_id;
    Family family = Family::apps_tools;
    Points origin_total;
    Points best_total;
    int best_round = 0;
    int rounds = 0;
    bool final_run_fresh = false;
    std::string termination_reason;
    std::string html; // best checkpoint text; empty disables the dup screen

    Band origin_band() const { return classify_state(origin_total).band; }
    Band final_band() const { return classify_state(best_total).band; }
};

TraceSummary summary_from_repair(const repair::RepairTrace& trace);
TraceSummary summary_from_json(const json& j);

enum class Decision { export_page, partial, reject };
const std::string& decision_name(Decision d);
Decision decision_from_name(const std::string& name);

struct GateDecision {
    std::string artifact_id;
    Family family = Family::apps_tools;
    Band original_band = Band::low;
    Band final_band = Band::low;
    Decision decision = Decision::reject;
    std::string reason;
    Points best_total;
    int rounds = 0;
    int best_round = 0;
};

json to_json(const GateDecision& d);
GateDecision gate_decision_from_json(const json& j);

struct GatePolicy {
    Points export_threshold = Points::from_hundredths(8000);
    bool redundancy_screen = true;
    double near_dup_similarity = 0.9;
    // High-origin pages whose repair moved them less than this are redundant
    // with the filter baseline and add nothing to the pool.
    Points min_high_origin_delta = Points::from_hundredths(100);
};

// Character-shingle fingerprint for near-duplicate screening.
std::set<std::uint64_t> shingle_set(const std::string& text);
double jaccard(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b);

// Stateful: exported pages join the dedup index and screen later traces.
class Gatekeeper {
public:
    explicit Gatekeeper(GatePolicy policy = {}) : policy_(std::move(policy)) {}
    GateDecision gate(const TraceSummary& summary);
    const GatePolicy& policy() const { return policy_; }

private:
    GatePolicy policy_;
    std::vector<std::set<std::uint64_t>> accepted_shingles_;
};

// ---------------------------------------------------------------------------
// Aggregate rows
// ---------------------------------------------------------------------------

struct FunnelRow {
    Band orig_band = Band::low;
    Band final_band = Band::low;
    Decision decision = Decision::reject;
    std::int64_t count = 0;
};

struct PolicyRow {
    Band band = Band::low;
    std::string strategy;
    Points delta;
    std::int64_t count = 0;
};

std::vector<FunnelRow> funnel_rows_from_decisions(const std::vector<GateDecision>& decisions);
std::vector<FunnelRow> funnel_rows_from_jsonl(const std::filesystem::path& path);
std::vector<PolicyRow> policy_rows_from_jsonl(const std::filesystem::path& path);
// Round lines of repair logs -> per-attempt policy rows (delta = post - pre).
std::vector<PolicyRow> policy_rows_from_trace_logs(const std::vector<json>& lines);

// Percentage with one decimal, rounded half up. Returns 0 for empty bases.
double pct_1dp(std::int64_t numerator, std::int64_t denominator);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct BandFunnel {
    std::int64_t traces = 0;
    std::int64_t reject = 0;
    std::int64_t partial = 0;
    std::int64_t exported = 0;
    double reject_pct = 0;
    double partial_pct = 0;
    double export_pct = 0;
    double pool_share_pct = 0; // exported / pool
};

struct FunnelReport {
    std::array<BandFunnel, 3> bands; // Low, Mid, High
    std::int64_t total_traces = 0;
    std::int64_t pool = 0;

    const BandFunnel& band(Band b) const { return bands[static_cast<int>(b)]; }
};

FunnelReport funnel_report(const std::vector<FunnelRow>& rows);

struct TransitionMatrix {
    std::array<std::array<std::int64_t, 3>, 3> counts{}; // [orig][final]
    std::int64_t row_total(Band orig) const;
    std::int64_t cell(Band orig, Band final_band) const {
        return counts[static_cast<int>(orig)][static_cast<int>(final_band)];
    }
    double row_pct(Band orig, Band final_band) const;
};

// Final RETAINED score band, export-agnostic: this measures score movement,
// not pool membership, which is why its Mid->High count can differ from the
// funnel's Mid export count.
TransitionMatrix transition_report(const std::vector<FunnelRow>& rows);

struct PolicyStats {
    Band band = Band::low;
    std::string strategy;
    std::int64_t n = 0;
    double mean_delta = 0;     // 1-decimal points
    double success_pct = 0;    // delta >= +5
    double catastrophe_pct = 0; // delta <= -10
};

std::vector<PolicyStats> policy_report(const std::vector<PolicyRow>& rows);

// ---------------------------------------------------------------------------
// Export manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string artifact_id;
    Family family = Family::apps_tools;
    Band origin_band = Band::low;
    int rounds = 0;
    int best_round = 0;
    std::string gate_reason;
};

json to_json(const ManifestEntry& e);

// Seeded sample from the export pool, stratified by family proportional to
// pool composition. sample_size > pool -> DomainError.
std::vector<ManifestEntry> export_manifest(const std::vector<GateDecision>& decisions,
                                           std::size_t sample_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Human-readable renderings
// ---------------------------------------------------------------------------

std::string render_funnel(const FunnelReport& report);
std::string render_transition(const TransitionMatrix& matrix);
std::string render_policy(const std::vector<PolicyStats>& stats);

} // namespace htmlcure::funnel
