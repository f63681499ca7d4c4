#include "htmlcure/scorer.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "htmlcure/html_dom.hpp"

namespace htmlcure::score {

// ---------------------------------------------------------------------------
// static_pass
// ---------------------------------------------------------------------------

StaticReport static_pass(const HtmlArtifact& artifact) {
    StaticReport r;
    r.html_size = artifact.html.size();
    dom::Document doc = dom::parse_document(artifact.html);
    r.malformed = !doc.parse_ok;
    r.trivial = !r.malformed && doc.body_content_bytes < kTrivialBodyBytes &&
                !doc.has_canvas && !doc.has_svg;
    r.ok = !r.malformed && !r.trivial;
    r.has_doctype = doc.has_doctype;
    r.has_viewport_meta = doc.has_viewport_meta;
    r.has_style = doc.has_style;
    r.has_script = doc.has_script || !doc.hooks_source.empty();
    r.has_canvas = doc.has_canvas;
    r.has_svg = doc.has_svg;
    r.has_raf = doc.has_raf;
    r.unclosed_tag_count = doc.unclosed_tag_count;
    r.body_content_bytes = doc.body_content_bytes;
    r.external_dependencies = doc.external_resources;
    r.input_types = doc.input_types;
    r.title = doc.title;
    return r;
}

json static_report_to_json(const StaticReport& r) {
    json j;
    j["ok"] = r.ok;
    j["malformed"] = r.malformed;
    j["trivial"] = r.trivial;
    j["has_doctype"] = r.has_doctype;
    j["has_viewport_meta"] = r.has_viewport_meta;
    j["has_style"] = r.has_style;
    j["has_script"] = r.has_script;
    j["has_canvas"] = r.has_canvas;
    j["has_svg"] = r.has_svg;
    j["has_raf"] = r.has_raf;
    j["unclosed_tag_count"] = r.unclosed_tag_count;
    j["html_size"] = r.html_size;
    j["body_content_bytes"] = r.body_content_bytes;
    j["external_dependencies"] = r.external_dependencies;
    j["input_types"] = r.input_types;
    j["title"] = r.title;
    return j;
}

// ---------------------------------------------------------------------------
// Guardrails
// ---------------------------------------------------------------------------

namespace {
const std::array<std::string, 4> kFlagNames = {"horizontal_overflow", "no_viewport_meta",
                                               "broken_mobile_layout", "absent_styling"};
}

const std::string& guardrail_flag_name(GuardrailFlag f) {
    return kFlagNames[static_cast<int>(f)];
}

GuardrailFlag guardrail_flag_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kFlagNames.size(); ++i)
        if (kFlagNames[i] == name) return static_cast<GuardrailFlag>(i);
    throw DomainError("unknown guardrail flag: " + name);
}

std::set<GuardrailFlag> guardrail_flags(const ExperienceTrace& trace,
                                        const StaticReport& static_report) {
    std::set<GuardrailFlag> flags;
    if (!static_report.has_viewport_meta) flags.insert(GuardrailFlag::no_viewport_meta);
    if (!static_report.has_style) flags.insert(GuardrailFlag::absent_styling);

    // Layout probes: the leading viewport is desktop, the rest mobile.
    bool first_layout_seen = false;
    for (const auto& rec : trace.records) {
        for (const auto& [probe, outcome] : rec.behavioral.probe_outcomes) {
            if (probe.rfind("layout:", 0) != 0) continue;
            if (!first_layout_seen) {
                first_layout_seen = true;
                if (outcome == ProbeOutcome::fail)
                    flags.insert(GuardrailFlag::horizontal_overflow);
            } else if (outcome == ProbeOutcome::fail) {
                flags.insert(GuardrailFlag::broken_mobile_layout);
            }
        }
    }
    return flags;
}

Points guardrail_cap(std::size_t flag_count) {
    std::int64_t n = static_cast<std::int64_t>(std::min<std::size_t>(flag_count, 4));
    return Points::from_hundredths(2000 - 500 * n);
}

// ---------------------------------------------------------------------------
// ScoreReport serialization
// ---------------------------------------------------------------------------

json score_report_to_json(const ScoreReport& r) {
    json j;
    j["score"] = to_json(r.score);
    j["total"] = points_to_json(r.total);
    j["tc_pass_rate"] = r.tc_pass_rate;
    j["tc_pass_rate_num"] = r.tc_pass_rate_num;
    j["tc_pass_rate_den"] = r.tc_pass_rate_den;
    json flags = json::array();
    for (GuardrailFlag f : r.guardrail_flags) flags.push_back(guardrail_flag_name(f));
    j["guardrail_flags"] = flags;
    j["evidence_refs"] = r.evidence_refs;
    j["visual_scored"] = r.visual_scored;
    j["visual_degraded"] = r.visual_degraded;
    j["run_id"] = r.run_id;
    return j;
}

ScoreReport score_report_from_json(const json& j) {
    ScoreReport r;
    r.score = score_vector_from_json(j.at("score"));
    r.total = points_from_json(j.at("total"));
    r.tc_pass_rate = j.at("tc_pass_rate").get<double>();
    r.tc_pass_rate_num = j.at("tc_pass_rate_num").get<std::int64_t>();
    r.tc_pass_rate_den = j.at("tc_pass_rate_den").get<std::int64_t>();
    for (const auto& f : j.at("guardrail_flags"))
        r.guardrail_flags.insert(guardrail_flag_from_name(f.get<std::string>()));
    r.evidence_refs =
        j.at("evidence_refs").get<std::map<std::string, std::vector<std::string>>>();
    r.visual_scored = j.at("visual_scored").get<bool>();
    r.visual_degraded = j.at("visual_degraded").get<bool>();
    r.run_id = j.at("run_id").get<std::string>();
    return r;
}

// ---------------------------------------------------------------------------
// Composite score
// ---------------------------------------------------------------------------

Rational RegressionWeights::weight(Dimension d) const {
    switch (d) {
        case Dimension::rendering: return rendering;
        case Dimension::visual_design: return visual_design;
        case Dimension::functionality: return functionality;
        case Dimension::interactivity: return interactivity;
        case Dimension::code_quality: return code_quality;
    }
    throw DomainError("bad dimension");
}

void RegressionWeights::check() const {
    for (Dimension d : all_dimensions()) {
        if (weight(d).is_negative())
            throw DomainError("regression weight for " + dimension_name(d) +
                              " must be nonnegative");
        if (d == Dimension::functionality || d == Dimension::interactivity) continue;
        if (functionality < weight(d) || interactivity < weight(d))
            throw DomainError(
                "functionality/interactivity must carry the largest regression weights");
    }
}

Rational composite_score(const ScoreReport& candidate, const ScoreReport& current,
                         const RegressionWeights& weights) {
    if (candidate.score.profile != current.score.profile)
        throw DomainError("composite score: profile mismatch");
    Rational comp = Rational::from_points(candidate.total);
    for (Dimension d : all_dimensions()) {
        Points regression = current.score.component(d) - candidate.score.component(d);
        if (regression > kZeroPoints)
            comp = comp - weights.weight(d) * Rational::from_points(regression);
    }
    return comp;
}

// ---------------------------------------------------------------------------
// score_functionality
// ---------------------------------------------------------------------------

FunctionalityScore score_functionality(const std::vector<exec::TcResult>& results,
                                       Profile profile) {
    if (results.empty())
        throw DomainError("score_functionality: at least one test case is required");
    Rational weight_sum(0, 1);
    Rational pass_sum(0, 1);
    for (const auto& r : results) {
        if (!(r.weight > Rational::integer(0)))
            throw DomainError("score_functionality: weights must be positive (tc " + r.tc_id +
                              ")");
        weight_sum = weight_sum + r.weight;
        if (r.passed) pass_sum = pass_sum + r.weight;
    }
    FunctionalityScore out;
    out.pass_rate = pass_sum / weight_sum;
    Points budget = budgets_for(profile).functionality;
    out.points = (Rational::from_points(budget) * out.pass_rate).round_to_points();
    return out;
}

// ---------------------------------------------------------------------------
// score_deterministic
// ---------------------------------------------------------------------------

namespace {

struct ProbeTally {
    int controls_tested = 0;
    int controls_responsive = 0;
    bool keyboard_probed = false;
    bool keyboard_responsive = false;
    std::vector<std::string> keys_responded;
    bool gameplay_probed = false;
    bool gameplay_changed = false;
    int console_count = 0;
    int exception_count = 0;
    int timeouts = 0;
    std::vector<std::string> console_refs;
};

ProbeTally tally_probes(const ExperienceTrace& trace) {
    ProbeTally t;
    for (const auto& rec : trace.records) {
        t.console_count += static_cast<int>(rec.behavioral.console_errors.size());
        t.exception_count += static_cast<int>(rec.behavioral.exceptions.size());
        if (!rec.behavioral.console_errors.empty() || !rec.behavioral.exceptions.empty())
            t.console_refs.push_back("record:" + std::to_string(rec.step_index));
        for (const auto& [probe, outcome] : rec.behavioral.probe_outcomes) {
            if (outcome == ProbeOutcome::timeout) ++t.timeouts;
            if (probe.rfind("control:", 0) == 0) {
                ++t.controls_tested;
                if (outcome == ProbeOutcome::pass) ++t.controls_responsive;
            } else if (probe.rfind("keyboard:", 0) == 0) {
                t.keyboard_probed = true;
                if (outcome == ProbeOutcome::pass) {
                    t.keyboard_responsive = true;
                    t.keys_responded.push_back(probe.substr(9));
                }
            } else if (probe == "gameplay:state") {
                t.gameplay_probed = true;
                t.gameplay_changed = outcome == ProbeOutcome::pass;
            }
        }
    }
    return t;
}

} // namespace

DeterministicScores score_deterministic(const ExperienceTrace& trace,
                                        const StaticReport& static_report, Profile profile) {
    DeterministicScores out;
    ProbeTally tally = tally_probes(trace);

    // Rendering: browser health. Console errors and exceptions eat the
    // budget; a page that never loaded scores zero.
    if (trace.load_failed) {
        out.rendering = kZeroPoints;
        out.evidence_refs["rendering"].push_back("load:failed");
    } else {
        std::int64_t h = 1000;
        h -= std::min<std::int64_t>(400, 150LL * tally.console_count);
        h -= std::min<std::int64_t>(600, 250LL * tally.exception_count);
        out.rendering = Points::from_hundredths(std::max<std::int64_t>(0, h));
        out.evidence_refs["rendering"].push_back("load:ok");
        for (const auto& ref : tally.console_refs) out.evidence_refs["rendering"].push_back(ref);
    }

    // Interactivity: responsive-control ratio (0.6), keyboard response (0.3),
    // gameplay state changes (0.1). Evidence streams that do not apply to the
    // page earn full credit rather than penalizing it.
    if (profile == Profile::noninteractive) {
        out.interactivity = kZeroPoints;
    } else {
        Rational button_term = tally.controls_tested > 0
                                   ? Rational(tally.controls_responsive, tally.controls_tested)
                                   : Rational::integer(tally.keyboard_responsive ||
                                                               tally.gameplay_changed
                                                           ? 1
                                                           : 0);
        Rational keyboard_term =
            tally.keyboard_probed ? Rational::integer(tally.keyboard_responsive ? 1 : 0)
                                  : Rational::integer(1);
        // Gameplay evidence binds only where a game scaffold exists; a form
        // app is not penalized for lacking game-state changes.
        bool gameplay_applicable = tally.gameplay_probed && static_report.has_canvas;
        Rational gameplay_term =
            gameplay_applicable ? Rational::integer(tally.gameplay_changed ? 1 : 0)
                                : Rational::integer(1);
        Rational score = Rational(6, 10) * button_term + Rational(3, 10) * keyboard_term +
                         Rational(1, 10) * gameplay_term;
        out.interactivity = (Rational::integer(10) * score).round_to_points();
        out.evidence_refs["interactivity"].push_back(
            "controls:" + std::to_string(tally.controls_responsive) + "/" +
            std::to_string(tally.controls_tested));
        out.evidence_refs["interactivity"].push_back(
            std::string("keyboard:") + (tally.keyboard_probed
                                            ? (tally.keyboard_responsive ? "responsive" : "dead")
                                            : "not probed"));
    }

    // Code quality: static pass evidence.
    std::int64_t cq = 0;
    if (static_report.has_doctype) cq += 100;
    if (static_report.has_viewport_meta) cq += 50;
    if (static_report.has_style) cq += 100;
    if (static_report.external_dependencies.empty()) cq += 100;
    cq += std::max<std::int64_t>(
        0, 150 - 50LL * std::min(3, static_report.unclosed_tag_count));
    out.code_quality = Points::from_hundredths(cq);
    out.evidence_refs["code_quality"].push_back(
        std::string("static:doctype=") + (static_report.has_doctype ? "1" : "0"));
    out.evidence_refs["code_quality"].push_back(
        "static:unclosed=" + std::to_string(static_report.unclosed_tag_count));
    return out;
}

// ---------------------------------------------------------------------------
// Visual path
// ---------------------------------------------------------------------------

ObjectiveMetrics build_objective_metrics(const ExperienceTrace& trace,
                                         const StaticReport& static_report) {
    ObjectiveMetrics m;
    ProbeTally tally = tally_probes(trace);
    m.keyboard_probed = tally.keyboard_probed;
    m.keyboard_responsive = tally.keyboard_responsive;
    m.keys_responded = tally.keys_responded;
    m.buttons_tested = tally.controls_tested;
    m.buttons_responsive = tally.controls_responsive;
    m.canvas_type = static_report.has_canvas ? "canvas"
                    : static_report.has_svg  ? "svg"
                                             : "none";
    m.interactions_timed_out = tally.timeouts;
    m.console_count = tally.console_count;
    m.page_err_count = tally.exception_count;

    std::int64_t latency_sum = 0;
    int latency_n = 0;
    int changed_frames = 0;
    int delta_frames = 0;
    for (const auto& rec : trace.records) {
        if (rec.behavioral.latency_ms) {
            latency_sum += *rec.behavioral.latency_ms;
            ++latency_n;
            m.max_latency_ms = std::max(m.max_latency_ms, *rec.behavioral.latency_ms);
        }
        if (rec.visual.frame_delta) {
            ++delta_frames;
            if (*rec.visual.frame_delta > 0.0) ++changed_frames;
        }
    }
    m.avg_latency_ms = latency_n > 0 ? latency_sum / latency_n : 0;
    m.frame_change_rate =
        delta_frames > 0 ? static_cast<double>(changed_frames) / delta_frames : 0.0;
    m.animation_detected = static_report.has_raf || changed_frames > 0;
    m.canvas_has_content = static_report.has_canvas && changed_frames > 0;
    m.canvas_fill_ratio = m.canvas_has_content ? m.frame_change_rate : 0.0;
    m.fps_quality = !m.animation_detected ? "n/a" : (changed_frames > 0 ? "smooth" : "frozen");

    std::ostringstream extra;
    extra << "gameplay_state_changed=" << (tally.gameplay_changed ? "true" : "false")
          << "; inputs=" << static_report.input_types.size()
          << "; layers=" << trace.layers_run.size();
    m.extra_fields = extra.str();
    return m;
}

namespace {

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += sep;
        out += item;
    }
    return out.empty() ? "none" : out;
}

std::map<std::string, std::string> analyst_bindings(const std::string& task_prompt,
                                                    const ExperienceTrace& trace,
                                                    const StaticReport& sr,
                                                    const ObjectiveMetrics& m) {
    std::map<std::string, std::string> b;
    auto yn = [](bool v) { return v ? std::string("yes") : std::string("no"); };
    b["query"] = task_prompt;
    b["html_size"] = std::to_string(sr.html_size);
    b["has_canvas"] = yn(sr.has_canvas);
    b["has_script"] = yn(sr.has_script);
    b["has_style"] = yn(sr.has_style);
    b["has_svg"] = yn(sr.has_svg);
    b["has_raf"] = yn(sr.has_raf);
    b["input_types"] = join(sr.input_types);
    b["ext_list"] = join(sr.external_dependencies);
    std::vector<std::string> issues;
    if (!sr.has_doctype) issues.push_back("missing doctype");
    if (!sr.has_viewport_meta) issues.push_back("missing viewport meta");
    if (sr.unclosed_tag_count > 0)
        issues.push_back(std::to_string(sr.unclosed_tag_count) + " unclosed tags");
    b["static_issues"] = join(issues);
    b["rendered"] = yn(!trace.load_failed);
    b["page_title"] = sr.title.empty() ? "(untitled)" : sr.title;
    std::vector<std::string> console_msgs;
    std::vector<std::string> err_msgs;
    for (const auto& rec : trace.records) {
        for (const auto& msg : rec.behavioral.console_errors) console_msgs.push_back(msg);
        for (const auto& msg : rec.behavioral.exceptions) err_msgs.push_back(msg);
    }
    b["console_list"] = join(console_msgs);
    b["page_err_list"] = join(err_msgs);
    b["agent_ran"] = "no";
    b["agent_steps"] = "0";
    b["agent_actions"] = "none";
    b["discovered_keys"] = join(m.keys_responded);
    b["keyboard_probed"] = yn(m.keyboard_probed);
    b["keyboard_responsive"] = yn(m.keyboard_responsive);
    b["buttons_responsive"] = std::to_string(m.buttons_responsive);
    b["buttons_tested"] = std::to_string(m.buttons_tested);
    b["dynamic_experience_fields"] = m.extra_fields;
    std::vector<std::string> annotations;
    for (const auto& kf : trace.keyframes)
        annotations.push_back(kf.frame_hash + ": " + kf.annotation);
    b["frame_annotations"] = join(annotations, "\n");
    return b;
}

std::map<std::string, std::string> scorer_bindings(const std::string& task_prompt,
                                                   const llm::AnalystRecord& analyst,
                                                   const ObjectiveMetrics& m) {
    std::map<std::string, std::string> b;
    auto yn = [](bool v) { return v ? std::string("yes") : std::string("no"); };
    char buf[64];
    b["query"] = task_prompt;
    b["observer_report_json"] = analyst.raw.dump();
    json checklist = json::array();
    for (const auto& req : analyst.requirements)
        checklist.push_back({{"requirement", req.requirement},
                             {"status", req.status},
                             {"evidence", req.evidence}});
    b["task_auditor_report_json"] = checklist.dump();
    b["keyboard_probed"] = yn(m.keyboard_probed);
    b["keyboard_responsive"] = yn(m.keyboard_responsive);
    b["keys_responded"] = join(m.keys_responded);
    if (m.buttons_tested > 0)
        std::snprintf(buf, sizeof(buf), "%d/%d", m.buttons_responsive, m.buttons_tested);
    else
        std::snprintf(buf, sizeof(buf), "no buttons probed");
    b["button_response_rate_str"] = buf;
    b["canvas_type"] = m.canvas_type;
    b["canvas_has_content"] = yn(m.canvas_has_content);
    std::snprintf(buf, sizeof(buf), "%.3f", m.canvas_fill_ratio);
    b["canvas_fill_ratio"] = buf;
    b["animation_detected"] = yn(m.animation_detected);
    b["fps_quality"] = m.fps_quality;
    std::snprintf(buf, sizeof(buf), "%.3f", m.frame_change_rate);
    b["frame_change_rate"] = buf;
    b["avg_latency"] = std::to_string(m.avg_latency_ms) + "ms";
    b["max_latency"] = std::to_string(m.max_latency_ms) + "ms";
    b["interactions_timed_out"] = std::to_string(m.interactions_timed_out);
    b["console_count"] = std::to_string(m.console_count);
    b["page_err_count"] = std::to_string(m.page_err_count);
    b["objective_metric_fields"] = m.extra_fields;
    return b;
}

} // namespace

VisualOutcome score_visual(const std::string& task_prompt, const ExperienceTrace& trace,
                           const StaticReport& static_report, const ObjectiveMetrics& metrics,
                           llm::ModelClient::Session& vlm) {
    if (trace.keyframes.empty())
        throw DomainError("score_visual: keyframes must be non-empty");

    VisualOutcome out;
    out.flags = guardrail_flags(trace, static_report);
    Points cap = guardrail_cap(out.flags.size());

    try {
        // Stage 1: the Analyst is the only call that sees frames.
        std::vector<llm::Attachment> frames;
        for (const auto& kf : trace.keyframes)
            frames.push_back({kf.frame_hash, "image/x-portable-graymap", ""});
        std::string analyst_prompt = llm::render(
            llm::TemplateKey::analyst, analyst_bindings(task_prompt, trace, static_report, metrics));
        out.analyst = llm::parse_analyst(
            vlm.call(llm::TemplateKey::analyst, analyst_prompt, frames));

        // Stage 2: the Scorer sees the structured record and objective
        // metrics only; no attachments, no page source.
        std::string scorer_prompt = llm::render(
            llm::TemplateKey::scorer, scorer_bindings(task_prompt, *out.analyst, metrics));
        out.scorer = llm::parse_scorer(vlm.call(llm::TemplateKey::scorer, scorer_prompt));

        Points raw = Points::from_double(out.scorer->visual_design.score);
        if (raw < kZeroPoints) raw = kZeroPoints;
        if (raw > Points::from_hundredths(2000)) raw = Points::from_hundredths(2000);
        out.points = std::min(raw, cap);
    } catch (const ProviderError&) {
        out.degraded = true;
        out.points = std::min(Points::from_hundredths(kDegradedVisualHundredths), cap);
    } catch (const ParseError&) {
        out.degraded = true;
        out.points = std::min(Points::from_hundredths(kDegradedVisualHundredths), cap);
    }
    return out;
}

// ---------------------------------------------------------------------------
// assemble_report
// ---------------------------------------------------------------------------

ScoreReport assemble_report(Profile profile, const FunctionalityScore& functionality,
                            const DeterministicScores& deterministic,
                            const std::optional<VisualOutcome>& visual,
                            const std::set<GuardrailFlag>& flags, const std::string& run_id) {
    ScoreReport r;
    r.score.profile = profile;
    r.score.rendering = deterministic.rendering;
    r.score.functionality = functionality.points;
    r.score.interactivity =
        profile == Profile::noninteractive ? kZeroPoints : deterministic.interactivity;
    r.score.code_quality = deterministic.code_quality;
    if (visual) {
        r.score.visual_design = visual->points;
        r.visual_scored = true;
        r.visual_degraded = visual->degraded;
    } else {
        r.score.visual_design = kZeroPoints; // fast mode: visual absent
    }
    r.score.check();
    r.total = r.score.total();
    r.tc_pass_rate = functionality.pass_rate.to_double();
    r.tc_pass_rate_num = functionality.pass_rate.num();
    r.tc_pass_rate_den = functionality.pass_rate.den();
    r.guardrail_flags = flags;
    r.evidence_refs = deterministic.evidence_refs;
    r.evidence_refs["functionality"].push_back(
        "tc_pass_rate:" + std::to_string(functionality.pass_rate.num()) + "/" +
        std::to_string(functionality.pass_rate.den()));
    if (visual && visual->analyst)
        r.evidence_refs["visual_design"].push_back("analyst:requirements=" +
                                                   std::to_string(visual->analyst->requirements.size()));
    for (const auto& kf_flag : flags)
        r.evidence_refs["visual_design"].push_back("guardrail:" + guardrail_flag_name(kf_flag));
    r.run_id = run_id;
    return r;
}

} // namespace htmlcure::score
