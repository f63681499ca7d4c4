#pragma once
// Four-layer experience protocol and deterministic test-case interpreter.
//
// Layers 1-2 always run: load, motion sampling, per-viewport layout and
// below-fold scroll, prominent-control probes, hover, keyboard bindings.
// Layer 3 is a short task-driven rollout gated by the trigger predicate.
// Layer 4 curates keyframes from the same run.

#include <optional>
#include <string>
#include <vector>

#include "htmlcure/backend.hpp"
#include "htmlcure/bench.hpp"
#include "htmlcure/core.hpp"

namespace htmlcure::exec {

// Fires when layer-1/2 evidence indicates deeper interaction.
struct Layer3Trigger {
    bool on_canvas_with_script = true;
    int min_responsive_controls = 1;
    bool on_item_interaction_flag = true;

    bool fires(bool canvas, bool script_or_animation, int responsive_controls,
               bool item_interactive) const {
        if (on_canvas_with_script && canvas && script_or_animation) return true;
        if (responsive_controls >= min_responsive_controls && min_responsive_controls > 0)
            return true;
        if (on_item_interaction_flag && item_interactive) return true;
        return false;
    }
};

struct ProtocolConfig {
    std::vector<Viewport> viewports = {{1280, 800}, {375, 667}};
    std::int64_t step_timeout_ms = 10000;
    std::int64_t total_budget_ms = 120000;
    Layer3Trigger layer3_trigger;
    int keyframe_budget = 8;       // >= 2
    int control_probe_limit = 10;  // prominent controls probed in DOM order
    int motion_samples = 10;       // 5 Hz over 2 s
    std::string frame_spill_dir;   // empty = no spill

    void check() const;
};

// screenshot_change_check passes above this normalized pixel-change ratio.
inline constexpr double kChangeCheckThreshold = 0.002;

struct StepOutcome {
    int step_index = 0;
    bench::StepKind kind = bench::StepKind::screenshot;
    ProbeOutcome outcome = ProbeOutcome::pass;
    std::string detail;
};

struct TcResult {
    std::string tc_id;
    Rational weight = Rational::integer(1);
    bool passed = false;
    std::vector<StepOutcome> step_outcomes;
};

json tc_result_to_json(const TcResult& r);

// Runs the protocol on one artifact. Page load failure produces a trace
// with a terminal load-failure record, not an exception.
ExperienceTrace run_protocol(const HtmlArtifact& artifact, const ProtocolConfig& config,
                             BrowserBackend& backend);

// Interprets one deterministic test case in a fresh session. Malformed step
// arguments raise ValidationError before any browser action.
TcResult run_test_case(const HtmlArtifact& artifact, const bench::TestCase& tc,
                       BrowserBackend& backend,
                       const ProtocolConfig& config = ProtocolConfig{});

// Raw frame log entry used for keyframe curation.
struct RawFrame {
    int step_index = 0;
    Viewport viewport;
    std::string hash;
    std::optional<double> delta;
    std::string event_context;
    bool first_paint = false;
    bool final_state = false;
    bool interaction_after = false; // frame right after an interaction
    int pair_before_index = -1;     // step_index of the matching before-frame
};

// Priority: first paint per viewport > final state per viewport > the
// before/after pair of the largest-delta interaction. At most `budget`
// frames, emitted in step order.
std::vector<Keyframe> curate_keyframes(const std::vector<RawFrame>& frames, int budget);

} // namespace htmlcure::exec
