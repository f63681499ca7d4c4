#include "htmlcure/executor.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace htmlcure::exec {

namespace {

constexpr const char* kProbeKeys[] = {"ArrowLeft", "ArrowRight", "ArrowUp",
                                      "ArrowDown", "Space",      "Enter"};

double raster_delta(const Frame& a, const Frame& b) {
    if (a.cols != b.cols || a.rows != b.rows || a.raster.empty()) return 1.0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < a.raster.size(); ++i)
        if (a.raster[i] != b.raster[i]) ++changed;
    return static_cast<double>(changed) / static_cast<double>(a.raster.size());
}

void spill_frame(const std::string& dir, const Frame& f) {
    if (dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::path path = fs::path(dir) / (f.hash + ".pgm");
    if (fs::exists(path)) return;
    std::ofstream out(path, std::ios::binary);
    out << "P5\n" << f.cols << " " << f.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(f.raster.data()),
              static_cast<std::streamsize>(f.raster.size()));
}

// Builds one trace record per protocol step and keeps the raw frame log
// for curation.
class TraceBuilder {
public:
    TraceBuilder(const HtmlArtifact& artifact, const ProtocolConfig& config, PageSession& session)
        : config_(config), session_(session) {
        trace_.artifact_id = artifact.id;
    }

    // Captures the post-action frame, drains console state, and appends the
    // evidence record. Returns the record index.
    EvidenceRecord& record_step(const std::string& action,
                                std::optional<std::int64_t> latency = std::nullopt) {
        Frame frame = session_.capture_frame();
        spill_frame(config_.frame_spill_dir, frame);
        EvidenceRecord rec;
        rec.step_index = static_cast<int>(trace_.records.size()) + 1;
        rec.action = action;
        rec.visual.frame_hash = frame.hash;
        rec.visual.viewport = frame.viewport;
        auto prev = last_raster_.find(frame.viewport.str());
        if (prev != last_raster_.end())
            rec.visual.frame_delta = raster_delta(prev->second, frame);
        last_raster_[frame.viewport.str()] = frame;
        rec.behavioral.dom_digest = session_.dom_digest();
        rec.behavioral.console_errors = session_.take_console_errors();
        rec.behavioral.exceptions = session_.take_exceptions();
        rec.behavioral.latency_ms = latency;
        trace_.records.push_back(std::move(rec));

        RawFrame raw;
        raw.step_index = trace_.records.back().step_index;
        raw.viewport = frame.viewport;
        raw.hash = frame.hash;
        raw.delta = trace_.records.back().visual.frame_delta;
        raw.event_context = action;
        frames_.push_back(raw);
        return trace_.records.back();
    }

    void probe(EvidenceRecord& rec, const std::string& id, ProbeOutcome outcome) {
        rec.behavioral.probe_outcomes.emplace_back(id, outcome);
    }

    bool over_budget() const { return session_.elapsed_ms() >= config_.total_budget_ms; }

    ExperienceTrace& trace() { return trace_; }
    std::vector<RawFrame>& frames() { return frames_; }
    RawFrame& last_frame() { return frames_.back(); }

private:
    const ProtocolConfig& config_;
    PageSession& session_;
    ExperienceTrace trace_;
    std::vector<RawFrame> frames_;
    std::map<std::string, Frame> last_raster_;
};

ProbeOutcome outcome_for(const ActionResult& r, std::int64_t step_timeout,
                         bool require_change = true) {
    if (!r.target_found) return ProbeOutcome::fail;
    if (r.latency_ms > step_timeout) return ProbeOutcome::timeout;
    if (require_change && !r.state_changed) return ProbeOutcome::fail;
    return ProbeOutcome::pass;
}

} // namespace

void ProtocolConfig::check() const {
    if (viewports.empty()) throw DomainError("protocol config: viewports must be non-empty");
    if (keyframe_budget < 2) throw DomainError("protocol config: keyframe budget must be >= 2");
}

// ---------------------------------------------------------------------------
// run_protocol
// ---------------------------------------------------------------------------

ExperienceTrace run_protocol(const HtmlArtifact& artifact, const ProtocolConfig& config,
                             BrowserBackend& backend) {
    config.check();
    auto session = backend.open(artifact.html);
    TraceBuilder tb(artifact, config, *session);
    ExperienceTrace& trace = tb.trace();

    if (!session->load_ok()) {
        auto& rec = tb.record_step("load");
        tb.probe(rec, "load", ProbeOutcome::fail);
        trace.load_failed = true;
        trace.layers_run = {1};
        trace.coverage_meta["steps_total"] = static_cast<std::int64_t>(trace.records.size());
        return trace;
    }

    // ---- Layer 1: load and motion -------------------------------------
    session->set_viewport(config.viewports.front());
    {
        auto& rec = tb.record_step("load:first_paint@" + config.viewports.front().str());
        tb.probe(rec, "load", ProbeOutcome::pass);
        tb.last_frame().first_paint = true;
    }
    bool motion_seen = false;
    for (int i = 0; i < config.motion_samples && !tb.over_budget(); ++i) {
        session->wait(200);
        auto& rec = tb.record_step("motion:sample" + std::to_string(i + 1));
        if (rec.visual.frame_delta.value_or(0.0) > 0.0) motion_seen = true;
    }

    // ---- Layer 2: viewports, scroll, controls, hover, keyboard --------
    for (const Viewport& vp : config.viewports) {
        if (tb.over_budget()) break;
        session->set_viewport(vp);
        auto& rec = tb.record_step("layout@" + vp.str());
        // The load record covers first paint for the leading viewport.
        if (&vp != &config.viewports.front()) tb.last_frame().first_paint = true;
        bool overflow = session->has_horizontal_overflow();
        tb.probe(rec, "layout:" + vp.str(), overflow ? ProbeOutcome::fail : ProbeOutcome::pass);

        ActionResult scroll = session->scroll_below_fold();
        auto& scroll_rec = tb.record_step("scroll:below_fold@" + vp.str(), scroll.latency_ms);
        tb.probe(scroll_rec, "scroll:" + vp.str(),
                 scroll.state_changed ? ProbeOutcome::pass : ProbeOutcome::fail);
        session->set_viewport(vp); // reset scroll
    }
    session->set_viewport(config.viewports.front());

    int responsive_controls = 0;
    int controls_probed = 0;
    auto controls = session->visible_controls(config.control_probe_limit);
    for (const auto& control : controls) {
        if (tb.over_budget()) break;
        tb.record_step("probe:before " + control.selector);
        int before_index = tb.last_frame().step_index;
        ActionResult r = session->click(control.selector);
        auto& rec = tb.record_step("probe:click " + control.selector, r.latency_ms);
        ProbeOutcome out = outcome_for(r, config.step_timeout_ms);
        if (rec.visual.frame_delta.value_or(0.0) > kChangeCheckThreshold &&
            out == ProbeOutcome::fail && r.target_found)
            out = ProbeOutcome::pass; // visible response without state hook
        tb.probe(rec, "control:" + control.selector, out);
        tb.last_frame().interaction_after = true;
        tb.last_frame().pair_before_index = before_index;
        ++controls_probed;
        if (out == ProbeOutcome::pass) ++responsive_controls;
    }

    for (std::size_t i = 0; i < controls.size() && i < 3; ++i) {
        if (tb.over_budget()) break;
        ActionResult r = session->hover(controls[i].selector);
        auto& rec = tb.record_step("probe:hover " + controls[i].selector, r.latency_ms);
        tb.probe(rec, "hover:" + controls[i].selector,
                 r.state_changed ? ProbeOutcome::pass : ProbeOutcome::fail);
    }

    bool keyboard_declared = session->keyboard_bindings_declared();
    bool keyboard_responsive = false;
    std::vector<std::string> responsive_keys;
    if (keyboard_declared) {
        for (const char* key : kProbeKeys) {
            if (tb.over_budget()) break;
            ActionResult r = session->key_press(key);
            auto& rec = tb.record_step(std::string("probe:key ") + key, r.latency_ms);
            bool responded = r.state_changed;
            tb.probe(rec, std::string("keyboard:") + key,
                     responded ? ProbeOutcome::pass : ProbeOutcome::fail);
            if (responded) {
                keyboard_responsive = true;
                responsive_keys.push_back(key);
            }
        }
    }

    trace.layers_run = {1, 2};

    // ---- Layer 3: task-driven rollout (conditional) --------------------
    bool trigger = config.layer3_trigger.fires(
        session->canvas_present(), session->animation_declared() || motion_seen,
        responsive_controls, artifact.interactive);
    bool gameplay_changed = false;
    if (trigger && !tb.over_budget()) {
        std::string digest_before = session->dom_digest();
        session->wait(1000);
        for (const auto& key : responsive_keys) session->key_press(key);
        session->wait(1000);
        auto& rec = tb.record_step("gameplay:rollout");
        gameplay_changed = session->dom_digest() != digest_before ||
                           rec.visual.frame_delta.value_or(0.0) > 0.0;
        tb.probe(rec, "gameplay:state",
                 gameplay_changed ? ProbeOutcome::pass : ProbeOutcome::fail);
        trace.layers_run.push_back(3);
    }

    // ---- Final state frames -------------------------------------------
    for (const Viewport& vp : config.viewports) {
        if (tb.over_budget()) break;
        session->set_viewport(vp);
        tb.record_step("final@" + vp.str());
        tb.last_frame().final_state = true;
    }

    // ---- Layer 4: keyframe curation ------------------------------------
    trace.keyframes = curate_keyframes(tb.frames(), config.keyframe_budget);
    if (!trace.keyframes.empty()) trace.layers_run.push_back(4);
    std::sort(trace.layers_run.begin(), trace.layers_run.end());

    trace.coverage_meta["steps_total"] = static_cast<std::int64_t>(trace.records.size());
    trace.coverage_meta["frames_captured"] = static_cast<std::int64_t>(tb.frames().size());
    trace.coverage_meta["controls_probed"] = controls_probed;
    trace.coverage_meta["controls_responsive"] = responsive_controls;
    trace.coverage_meta["keyboard_declared"] = keyboard_declared ? 1 : 0;
    trace.coverage_meta["keyboard_responsive"] = keyboard_responsive ? 1 : 0;
    trace.coverage_meta["viewports"] = static_cast<std::int64_t>(config.viewports.size());
    trace.coverage_meta["layer3_ran"] = trigger ? 1 : 0;
    trace.coverage_meta["gameplay_state_changed"] = gameplay_changed ? 1 : 0;
    trace.coverage_meta["elapsed_ms"] = session->elapsed_ms();
    return trace;
}

// ---------------------------------------------------------------------------
// run_test_case
// ---------------------------------------------------------------------------

namespace {

void check_step_args(const bench::TestCase& tc, const ProtocolConfig& config) {
    using bench::StepKind;
    for (const auto& s : tc.steps) {
        switch (s.kind) {
            case StepKind::resize:
                if (s.width < 1 || s.height < 1)
                    throw ValidationError("", tc.tc_id, "tc " + tc.tc_id +
                                                            ": resize dimensions must be >= 1");
                break;
            case StepKind::wait:
                if (s.ms <= 0 || s.ms > config.step_timeout_ms)
                    throw ValidationError("", tc.tc_id,
                                          "tc " + tc.tc_id + ": wait outside (0, step timeout]");
                break;
            case StepKind::assert_script:
            case StepKind::eval_script:
                if (s.expression.empty())
                    throw ValidationError("", tc.tc_id, "tc " + tc.tc_id + ": empty expression");
                break;
            case StepKind::assert_text:
                if (s.expected.empty())
                    throw ValidationError("", tc.tc_id, "tc " + tc.tc_id + ": empty expected text");
                break;
            case StepKind::click:
            case StepKind::hover:
            case StepKind::visibility_check:
                if (s.target.empty())
                    throw ValidationError("", tc.tc_id, "tc " + tc.tc_id + ": empty target");
                break;
            case StepKind::click_text:
                if (s.text.empty())
                    throw ValidationError("", tc.tc_id, "tc " + tc.tc_id + ": empty click text");
                break;
            default:
                break;
        }
    }
}

} // namespace

TcResult run_test_case(const HtmlArtifact& artifact, const bench::TestCase& tc,
                       BrowserBackend& backend, const ProtocolConfig& config) {
    using bench::StepKind;
    check_step_args(tc, config);

    TcResult result;
    result.tc_id = tc.tc_id;
    result.weight = tc.weight;

    auto session = backend.open(artifact.html);
    if (!session->load_ok()) {
        result.passed = false;
        StepOutcome out;
        out.step_index = 0;
        out.outcome = ProbeOutcome::fail;
        out.detail = "page load failed";
        result.step_outcomes.push_back(out);
        return result;
    }

    // Baseline for change checks that precede an explicit screenshot.
    Frame last_screenshot = session->capture_frame();

    int index = 0;
    bool all_ok = true;
    for (const auto& s : tc.steps) {
        ++index;
        StepOutcome out;
        out.step_index = index;
        out.kind = s.kind;
        out.outcome = ProbeOutcome::pass;

        switch (s.kind) {
            case StepKind::click: {
                ActionResult r = session->click(s.target);
                if (!r.target_found) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "target not found: " + s.target;
                } else if (r.latency_ms > config.step_timeout_ms) {
                    out.outcome = ProbeOutcome::timeout;
                }
                break;
            }
            case StepKind::click_text: {
                ActionResult r = session->click_text(s.text);
                if (!r.target_found) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "no interactive element with text: " + s.text;
                } else if (r.latency_ms > config.step_timeout_ms) {
                    out.outcome = ProbeOutcome::timeout;
                }
                break;
            }
            case StepKind::type_text: {
                ActionResult r = session->type_text(s.target, s.text);
                if (!r.target_found) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "target not found: " + s.target;
                } else if (r.latency_ms > config.step_timeout_ms) {
                    out.outcome = ProbeOutcome::timeout;
                }
                break;
            }
            case StepKind::hover: {
                ActionResult r = session->hover(s.target);
                if (!r.target_found) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "target not found: " + s.target;
                }
                break;
            }
            case StepKind::key_press: {
                ActionResult r = session->key_press(s.key);
                if (r.latency_ms > config.step_timeout_ms) out.outcome = ProbeOutcome::timeout;
                break;
            }
            case StepKind::resize:
                session->set_viewport({s.width, s.height});
                break;
            case StepKind::screenshot:
                last_screenshot = session->capture_frame();
                break;
            case StepKind::screenshot_change_check: {
                Frame now = session->capture_frame();
                double delta = raster_delta(last_screenshot, now);
                if (delta <= kChangeCheckThreshold) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "frames identical after interaction";
                }
                last_screenshot = now;
                break;
            }
            case StepKind::eval_script: {
                EvalOutcomeValue r = session->eval(s.expression);
                if (!r.ok) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "script error: " + r.error;
                }
                break;
            }
            case StepKind::assert_script: {
                EvalOutcomeValue r = session->eval(s.expression);
                if (!r.ok) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "assertion error: " + r.error;
                } else if (!expr::truthy(r.value)) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "assertion false: " + s.expression;
                }
                break;
            }
            case StepKind::assert_text: {
                std::string haystack =
                    s.target.empty() ? session->page_text() : session->element_text(s.target);
                if (haystack.find(s.expected) == std::string::npos) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "expected text not found: " + s.expected;
                }
                break;
            }
            case StepKind::visibility_check: {
                if (!session->element_visible(s.target)) {
                    out.outcome = ProbeOutcome::fail;
                    out.detail = "element not visible: " + s.target;
                }
                break;
            }
            case StepKind::wait:
                session->wait(s.ms);
                break;
        }

        if (out.outcome != ProbeOutcome::pass) all_ok = false;
        result.step_outcomes.push_back(std::move(out));
    }
    result.passed = all_ok;
    return result;
}

json tc_result_to_json(const TcResult& r) {
    json j;
    j["tc_id"] = r.tc_id;
    j["passed"] = r.passed;
    j["weight"] = {{"num", r.weight.num()}, {"den", r.weight.den()}};
    json steps = json::array();
    for (const auto& s : r.step_outcomes) {
        json o;
        o["step_index"] = s.step_index;
        o["kind"] = bench::step_kind_name(s.kind);
        o["outcome"] = probe_outcome_name(s.outcome);
        if (!s.detail.empty()) o["detail"] = s.detail;
        steps.push_back(o);
    }
    j["step_outcomes"] = steps;
    return j;
}

// ---------------------------------------------------------------------------
// curate_keyframes
// ---------------------------------------------------------------------------

std::vector<Keyframe> curate_keyframes(const std::vector<RawFrame>& frames, int budget) {
    std::vector<const RawFrame*> selected;
    auto already = [&](int step_index) {
        for (const auto* f : selected)
            if (f->step_index == step_index) return true;
        return false;
    };
    auto take = [&](const RawFrame* f) {
        if (f && !already(f->step_index) && static_cast<int>(selected.size()) < budget)
            selected.push_back(f);
    };

    for (const auto& f : frames)
        if (f.first_paint) take(&f);
    for (const auto& f : frames)
        if (f.final_state) take(&f);

    const RawFrame* best_after = nullptr;
    for (const auto& f : frames)
        if (f.interaction_after && f.delta &&
            (!best_after || *f.delta > *best_after->delta))
            best_after = &f;
    if (best_after && *best_after->delta > 0.0) {
        const RawFrame* before = nullptr;
        for (const auto& f : frames)
            if (f.step_index == best_after->pair_before_index) before = &f;
        // The pair only carries signal together; take it when both fit.
        if (static_cast<int>(selected.size()) + 2 <= budget ||
            (before && already(before->step_index)) || already(best_after->step_index)) {
            take(before);
            take(best_after);
        }
    }

    std::sort(selected.begin(), selected.end(),
              [](const RawFrame* a, const RawFrame* b) { return a->step_index < b->step_index; });

    std::vector<Keyframe> out;
    for (const auto* f : selected) {
        Keyframe k;
        k.frame_hash = f->hash;
        std::string role;
        if (f->first_paint) role = "first paint";
        else if (f->final_state) role = "final state";
        else role = "interaction";
        k.annotation = role + " @ " + f->viewport.str() + " [" + f->event_context + "]";
        if (f->delta) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " delta=%.4f", *f->delta);
            k.annotation += buf;
        }
        out.push_back(std::move(k));
    }
    return out;
}

} // namespace htmlcure::exec
