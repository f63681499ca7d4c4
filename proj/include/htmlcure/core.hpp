#pragma once
// Shared domain types: artifacts, score vectors, page states, and the
// evidence records that make up an experience trace. Everything here is
// immutable after construction and safe to share across workers.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "htmlcure/errors.hpp"
#include "htmlcure/points.hpp"

namespace htmlcure {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Task families
// ---------------------------------------------------------------------------

enum class Family {
    apps_tools,
    content_marketing,
    data_visualization,
    games_simulations,
    webgl_3d,
    visual_art_animation,
};

inline constexpr int kFamilyCount = 6;

const std::string& family_name(Family f);
Family family_from_name(const std::string& name);
const std::vector<Family>& all_families();

// ---------------------------------------------------------------------------
// HtmlArtifact
// ---------------------------------------------------------------------------

struct Provenance {
    enum class Kind { generated, repaired };
    Kind kind = Kind::generated;
    int round = 0; // meaningful only for repaired; in [1, 8]

    static Provenance generated() { return {Kind::generated, 0}; }
    static Provenance repaired(int round);
    bool operator==(const Provenance&) const = default;
};

struct HtmlArtifact {
    std::string id;
    std::string html;
    std::string prompt;
    Family family = Family::apps_tools;
    bool interactive = false;
    Provenance provenance = Provenance::generated();

    // Throws DomainError on empty/tagless html or out-of-range repair round.
    void check() const;
};

// ---------------------------------------------------------------------------
// Scoring profile and score vector
// ---------------------------------------------------------------------------

enum class Profile { interactive, noninteractive };

const std::string& profile_name(Profile p);
Profile profile_from_name(const std::string& name);

// Per-dimension budgets. Interactive: 10/20/55/10/5. Noninteractive moves the
// interaction budget into functionality: 10/20/65/0/5.
struct Budgets {
    Points rendering;
    Points visual_design;
    Points functionality;
    Points interactivity;
    Points code_quality;
    Points total() const {
        return rendering + visual_design + functionality + interactivity + code_quality;
    }
};

Budgets budgets_for(Profile p);

enum class Dimension { rendering, visual_design, functionality, interactivity, code_quality };
inline constexpr int kDimensionCount = 5;
const std::string& dimension_name(Dimension d);
const std::vector<Dimension>& all_dimensions();

struct ScoreVector {
    Points rendering;
    Points visual_design;
    Points functionality;
    Points interactivity;
    Points code_quality;
    Profile profile = Profile::interactive;

    Points total() const {
        return rendering + visual_design + functionality + interactivity + code_quality;
    }
    Points component(Dimension d) const;
    void set_component(Dimension d, Points v);

    // Each component within its profile budget, nonnegative; noninteractive
    // forces interactivity == 0.
    void check() const;

    bool operator==(const ScoreVector&) const = default;
};

// ---------------------------------------------------------------------------
// Page state bands
// ---------------------------------------------------------------------------

enum class Band { low, mid, high };

const std::string& band_name(Band b);
Band band_from_name(const std::string& name);

struct PageState {
    Band band = Band::low;
    Points score;
    bool operator==(const PageState&) const = default;
};

// Band thresholds: Low < 40, Mid in [40, 80), High >= 80.
// Pre: 0 <= score <= 100; out of range -> DomainError.
PageState classify_state(Points score);

// ---------------------------------------------------------------------------
// Evidence records and traces
// ---------------------------------------------------------------------------

struct Viewport {
    int width = 0;
    int height = 0;
    bool operator==(const Viewport&) const = default;
    std::string str() const { return std::to_string(width) + "x" + std::to_string(height); }
};

enum class ProbeOutcome { pass, fail, timeout };
const std::string& probe_outcome_name(ProbeOutcome o);
ProbeOutcome probe_outcome_from_name(const std::string& name);

struct VisualEvidence {
    std::string frame_hash;
    Viewport viewport;
    // Normalized changed-pixel ratio vs the previous frame at the same
    // viewport; absent when no such frame exists.
    std::optional<double> frame_delta;
    bool operator==(const VisualEvidence&) const = default;
};

struct BehavioralEvidence {
    std::vector<std::pair<std::string, ProbeOutcome>> probe_outcomes;
    std::string dom_digest;
    std::vector<std::string> console_errors;
    std::vector<std::string> exceptions;
    std::optional<std::int64_t> latency_ms;
    bool operator==(const BehavioralEvidence&) const = default;
};

struct EvidenceRecord {
    int step_index = 0; // 1-based ordinal within the trace
    std::string action;
    VisualEvidence visual;
    BehavioralEvidence behavioral;
    bool operator==(const EvidenceRecord&) const = default;
};

struct Keyframe {
    std::string frame_hash;
    std::string annotation;
    bool operator==(const Keyframe&) const = default;
};

struct ExperienceTrace {
    std::string artifact_id;
    std::vector<EvidenceRecord> records;
    std::vector<int> layers_run; // sorted subset of {1,2,3,4}
    std::vector<Keyframe> keyframes;
    // Execution coverage counters. Metadata only: no scoring path reads this.
    std::map<std::string, std::int64_t> coverage_meta;
    bool load_failed = false;

    bool layer_run(int layer) const;
    bool operator==(const ExperienceTrace&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical line-delimited serialization
// ---------------------------------------------------------------------------
// One record per line, UTF-8, keys in lexicographic order (the nlohmann
// default). Shared by executor, scorer, repair, and funnel outputs.

json to_json(const Provenance& p);
Provenance provenance_from_json(const json& j);

json to_json(const HtmlArtifact& a);
HtmlArtifact artifact_from_json(const json& j);

json to_json(const ScoreVector& s);
ScoreVector score_vector_from_json(const json& j);

json to_json(const EvidenceRecord& r);
EvidenceRecord evidence_record_from_json(const json& j);

json to_json(const ExperienceTrace& t);
ExperienceTrace trace_from_json(const json& j);

// Points serialize as exact hundredths to keep round-trips bit-faithful.
json points_to_json(Points p);
Points points_from_json(const json& j);

std::string to_line(const json& j);
json parse_line(const std::string& line);

} // namespace htmlcure
