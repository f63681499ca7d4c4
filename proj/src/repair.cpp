#include "htmlcure/repair.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace htmlcure::repair {

// ---------------------------------------------------------------------------
// Strategy tables
// ---------------------------------------------------------------------------

namespace {

const std::array<std::string, 13> kStrategyNames = {
    "HolisticRewrite", "FeatureCompletion", "GameRepair",       "Rewrite",
    "BugFix",          "PlayabilityRepair", "InteractionTargetedFix",
    "VisualEnrichment", "NoOpVerify",       "VisualPolish",     "InteractionEnhance",
    "FunctionalityRefine", "CodeCleanup"};

const std::array<std::string, 3> kOutputModeNames = {"rewrite", "patch", "none"};

} // namespace

const std::string& strategy_name_str(StrategyName s) {
    return kStrategyNames[static_cast<int>(s)];
}

StrategyName strategy_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
        if (kStrategyNames[i] == name) return static_cast<StrategyName>(i);
    throw DomainError("unknown strategy: " + name);
}

const std::string& output_mode_name(OutputMode m) {
    return kOutputModeNames[static_cast<int>(m)];
}

const std::vector<StrategyName>& admissible_set(Band band) {
    static const std::vector<StrategyName> low = {
        StrategyName::HolisticRewrite, StrategyName::FeatureCompletion, StrategyName::GameRepair};
    static const std::vector<StrategyName> mid = {
        StrategyName::Rewrite,          StrategyName::BugFix,
        StrategyName::PlayabilityRepair, StrategyName::InteractionTargetedFix,
        StrategyName::GameRepair,       StrategyName::VisualEnrichment};
    static const std::vector<StrategyName> high = {
        StrategyName::NoOpVerify,         StrategyName::VisualPolish,
        StrategyName::InteractionEnhance, StrategyName::FunctionalityRefine,
        StrategyName::CodeCleanup};
    switch (band) {
        case Band::low: return low;
        case Band::mid: return mid;
        case Band::high: return high;
    }
    throw DomainError("bad band");
}

bool is_admissible(StrategyName s, Band band) {
    const auto& set = admissible_set(band);
    return std::find(set.begin(), set.end(), s) != set.end();
}

const std::string& strategy_instruction(StrategyName s) {
    static const std::map<StrategyName, std::string> kInstructions = {
        {StrategyName::HolisticRewrite,
         "Rebuild a complete implementation; the current page has no stable local target. "
         "Preserve any verified useful structure listed above."},
        {StrategyName::FeatureCompletion,
         "Implement all broken or missing requirements without removing working features."},
        {StrategyName::GameRepair,
         "Target the diagnosed game layer (input, game loop, canvas rendering, overlay state, "
         "or gameplay logic) without rewriting unrelated systems."},
        {StrategyName::Rewrite,
         "Rewrite the page around its usable structure; carry over every working feature."},
        {StrategyName::BugFix,
         "Fix the diagnosed runtime errors and failing checks without changing unrelated "
         "visuals or behavior."},
        {StrategyName::PlayabilityRepair,
         "Repair keyboard and pointer bindings so every declared input path responds."},
        {StrategyName::InteractionTargetedFix,
         "Fix event wiring, input handling, latency, feedback, and state transitions without "
         "changing unrelated visuals."},
        {StrategyName::VisualEnrichment,
         "Improve typography, layout, palette, depth, animation, and responsive polish without "
         "breaking verified behavior."},
        {StrategyName::NoOpVerify,
         "Make no edits; the page is re-executed to verify the current checkpoint."},
        {StrategyName::VisualPolish,
         "Make small additive visual patches only; avoid broad rewrites."},
        {StrategyName::InteractionEnhance,
         "Patch the single diagnosed interaction defect; leave everything else untouched."},
        {StrategyName::FunctionalityRefine,
         "Patch the single failing check; leave working behavior untouched."},
        {StrategyName::CodeCleanup,
         "Patch document hygiene issues (structure, metadata, unclosed tags) without behavior "
         "changes."},
    };
    return kInstructions.at(s);
}

namespace {

OutputMode mode_for(StrategyName s, Band band) {
    switch (s) {
        case StrategyName::HolisticRewrite:
        case StrategyName::FeatureCompletion:
        case StrategyName::Rewrite:
            return OutputMode::rewrite;
        case StrategyName::GameRepair:
            // A Low-band game page has no reliable local target; Mid keeps
            // the scaffold and patches the failing layer.
            return band == Band::low ? OutputMode::rewrite : OutputMode::patch;
        case StrategyName::NoOpVerify:
            return OutputMode::none;
        default:
            return OutputMode::patch;
    }
}

Strategy make_strategy(StrategyName name, Band band) {
    Strategy s;
    s.name = name;
    s.output_mode = mode_for(name, band);
    s.instruction_key = strategy_name_str(name);
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// build_diagnosis
// ---------------------------------------------------------------------------

Diagnosis build_diagnosis(const Evaluation& eval, const std::vector<HistoryEntry>& history,
                          const std::optional<llm::ContrastiveRecord>& contrastive) {
    Diagnosis d;
    d.total = eval.report.total;
    d.components = eval.report.score;
    d.band = classify_state(eval.report.total).band;
    Points target = Points::from_hundredths(9700);
    d.distance_to_export_target = eval.report.total >= target
                                      ? kZeroPoints
                                      : target - eval.report.total;

    for (const auto& tc : eval.tc_results) {
        if (tc.passed) continue;
        TestFailure f;
        f.tc_id = tc.tc_id;
        for (const auto& step : tc.step_outcomes)
            if (step.outcome != ProbeOutcome::pass && !step.detail.empty()) {
                f.message = step.detail;
                break;
            }
        if (f.message.empty()) f.message = "test case failed";
        d.test_failures.push_back(std::move(f));
    }

    if (eval.analyst) {
        d.requirements_total = eval.analyst->summary_total;
        d.requirements_done = eval.analyst->summary_done;
        d.requirements_broken = eval.analyst->summary_broken;
        d.requirements_missing = eval.analyst->summary_missing;
        d.analyst_observations = eval.analyst->broken;
        d.template_like_signals = eval.analyst->template_like_signals;
        d.distinctive_signals = eval.analyst->distinctive_design_signals;
        d.preservation_list = eval.analyst->working;
    }

    d.render_ok = !eval.trace.load_failed;
    bool any_motion = false;
    bool motion_sampled = false;
    std::int64_t latency_sum = 0;
    int latency_n = 0;
    for (const auto& rec : eval.trace.records) {
        d.console_errors += static_cast<int>(rec.behavioral.console_errors.size());
        d.exceptions += static_cast<int>(rec.behavioral.exceptions.size());
        if (rec.action.rfind("motion:", 0) == 0) {
            motion_sampled = true;
            if (rec.visual.frame_delta.value_or(0.0) > 0.0) any_motion = true;
        }
        if (rec.behavioral.latency_ms) {
            latency_sum += *rec.behavioral.latency_ms;
            ++latency_n;
        }
        for (const auto& [probe, outcome] : rec.behavioral.probe_outcomes) {
            if (probe.rfind("layout:", 0) == 0 && outcome == ProbeOutcome::fail)
                d.responsive_layout_failures.push_back(probe.substr(7));
            else if (probe.rfind("control:", 0) == 0) {
                ++d.buttons_tested;
                if (outcome == ProbeOutcome::pass) ++d.buttons_responsive;
            } else if (probe.rfind("keyboard:", 0) == 0) {
                d.keyboard_probed = true;
                if (outcome == ProbeOutcome::pass) d.keyboard_responsive = true;
            } else if (probe == "gameplay:state") {
                d.gameplay_probed = true;
                d.gameplay_changed = outcome == ProbeOutcome::pass;
            }
        }
    }
    d.avg_latency_ms = latency_n > 0 ? latency_sum / latency_n : 0;
    d.motion_frozen = (eval.static_report.has_raf || eval.static_report.has_canvas) &&
                      motion_sampled && !any_motion;
    d.game_evidence = eval.static_report.has_canvas &&
                      (eval.static_report.has_script || eval.static_report.has_raf);
    d.static_issues = (eval.static_report.has_doctype ? 0 : 1) +
                      (eval.static_report.unclosed_tag_count > 0 ? 1 : 0);

    for (const auto& kf : eval.trace.keyframes) d.keyframe_notes.push_back(kf.annotation);
    d.guardrails = eval.report.guardrail_flags;
    d.contrastive = contrastive;

    d.history = history;
    // Accepted totals increase monotonically, so the current page is the
    // best verified checkpoint.
    d.best_total = eval.report.total;
    return d;
}

json Diagnosis::snapshot() const {
    json j;
    j["total"] = points_to_json(total);
    j["band"] = band_name(band);
    j["distance_to_target"] = points_to_json(distance_to_export_target);
    j["failed_tcs"] = static_cast<int>(test_failures.size());
    j["requirements"] = {{"total", requirements_total},
                         {"done", requirements_done},
                         {"broken", requirements_broken},
                         {"missing", requirements_missing}};
    j["console_errors"] = console_errors;
    j["exceptions"] = exceptions;
    j["buttons"] = std::to_string(buttons_responsive) + "/" + std::to_string(buttons_tested);
    j["keyboard"] = keyboard_probed ? (keyboard_responsive ? "responsive" : "dead") : "n/a";
    j["gameplay"] = gameplay_probed ? (gameplay_changed ? "live" : "frozen") : "n/a";
    j["game_evidence"] = game_evidence;
    j["motion_frozen"] = motion_frozen;
    j["layout_failures"] = responsive_layout_failures;
    j["rounds_so_far"] = static_cast<int>(history.size());
    return j;
}

// ---------------------------------------------------------------------------
// route
// ---------------------------------------------------------------------------

namespace {

// Binding priority within a band: game evidence > console/probe failures >
// input-binding failures > presentation, ordered by regression risk.
StrategyName route_low(const Diagnosis& d) {
    bool game_broken = d.game_evidence &&
                       (d.motion_frozen || (d.gameplay_probed && !d.gameplay_changed) ||
                        (d.keyboard_probed && !d.keyboard_responsive));
    if (game_broken || (d.game_evidence && d.requirements_total == 0))
        return StrategyName::GameRepair;
    if (d.requirements_total == 0) return StrategyName::HolisticRewrite;
    if (d.requirements_missing_ratio() > 0.5) return StrategyName::HolisticRewrite;
    if (d.requirements_missing + d.requirements_broken > 0)
        return StrategyName::FeatureCompletion;
    return StrategyName::HolisticRewrite;
}

StrategyName route_mid(const Diagnosis& d) {
    bool game_broken = d.game_evidence &&
                       (d.motion_frozen || (d.gameplay_probed && !d.gameplay_changed) ||
                        (d.keyboard_probed && !d.keyboard_responsive));
    if (game_broken) return StrategyName::GameRepair;
    if (d.requirements_total > 0 && d.requirements_missing_ratio() > 0.5)
        return StrategyName::Rewrite;
    if (d.console_errors > 0 || d.exceptions > 0 || !d.render_ok) return StrategyName::BugFix;
    if (d.keyboard_probed && !d.keyboard_responsive) return StrategyName::PlayabilityRepair;
    if (d.buttons_tested > 0 && d.buttons_responsive < d.buttons_tested)
        return StrategyName::InteractionTargetedFix;
    if (!d.test_failures.empty()) return StrategyName::BugFix;
    return StrategyName::VisualEnrichment;
}

StrategyName route_high(const Diagnosis& d) {
    // Default is preservation; a single localized low-risk defect earns the
    // matching refine operator.
    bool functionality_defect = d.test_failures.size() == 1;
    bool interaction_defect = d.buttons_tested > 0 &&
                              d.buttons_responsive == d.buttons_tested - 1 &&
                              (!d.keyboard_probed || d.keyboard_responsive);
    bool visual_defect = d.guardrails.size() == 1;
    bool code_defect = d.static_issues > 0 && d.static_issues <= 2 && d.console_errors == 0 &&
                       d.exceptions == 0;

    int classes = (functionality_defect ? 1 : 0) + (interaction_defect ? 1 : 0) +
                  (visual_defect ? 1 : 0) + (code_defect ? 1 : 0);
    if (classes != 1) return StrategyName::NoOpVerify;
    if (functionality_defect) return StrategyName::FunctionalityRefine;
    if (interaction_defect) return StrategyName::InteractionEnhance;
    if (visual_defect) return StrategyName::VisualPolish;
    return StrategyName::CodeCleanup;
}

} // namespace

Strategy route(const Diagnosis& d) {
    StrategyName name;
    switch (d.band) {
        case Band::low: name = route_low(d); break;
        case Band::mid: name = route_mid(d); break;
        case Band::high: name = route_high(d); break;
        default: throw DomainError("bad band");
    }
    return make_strategy(name, d.band);
}

// ---------------------------------------------------------------------------
// apply_patches
// ---------------------------------------------------------------------------

std::string apply_patches(const std::string& html, const std::vector<llm::Patch>& patches) {
    if (patches.empty()) throw DomainError("apply_patches: patch list must be non-empty");
    std::string text = html;
    int n = 0;
    for (const auto& patch : patches) {
        ++n;
        std::size_t first = text.find(patch.old_str);
        if (first == std::string::npos)
            throw PatchError(PatchError::Reason::absent,
                             "patch " + std::to_string(n) + ": old_str not found");
        std::size_t second = text.find(patch.old_str, first + 1);
        if (second != std::string::npos)
            throw PatchError(PatchError::Reason::ambiguous,
                             "patch " + std::to_string(n) + ": old_str occurs more than once");
        text = text.substr(0, first) + patch.new_str + text.substr(first + patch.old_str.size());
    }
    return text;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

int select_candidate(const score::ScoreReport& current,
                     const std::vector<score::ScoreReport>& candidates,
                     const score::RegressionWeights& weights) {
    Rational best = Rational::from_points(current.total);
    int best_idx = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Rational comp = score::composite_score(candidates[i], current, weights);
        if (comp > best) { // strict: ties keep the current page / lower index
            best = comp;
            best_idx = static_cast<int>(i);
        }
    }
    return best_idx;
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

namespace {

std::string join_lines(const std::vector<std::string>& items) {
    if (items.empty()) return "none";
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += "\n";
        out += "- " + item;
    }
    return out;
}

std::string probe_evidence_text(const Diagnosis& d) {
    std::ostringstream ss;
    ss << "buttons " << d.buttons_responsive << "/" << d.buttons_tested << " responsive; "
       << "keyboard "
       << (d.keyboard_probed ? (d.keyboard_responsive ? "responsive" : "unresponsive")
                             : "not probed")
       << "; gameplay "
       << (d.gameplay_probed ? (d.gameplay_changed ? "state changes" : "no state change")
                             : "not probed")
       << "; console errors " << d.console_errors << "; exceptions " << d.exceptions
       << "; avg latency " << d.avg_latency_ms << "ms";
    if (d.motion_frozen) ss << "; motion frozen";
    if (!d.responsive_layout_failures.empty())
        ss << "; layout failures at " << d.responsive_layout_failures.size() << " viewport(s)";
    return ss.str();
}

std::string issues_text(const Diagnosis& d) {
    std::vector<std::string> issues;
    for (const auto& f : d.test_failures) issues.push_back(f.tc_id + ": " + f.message);
    for (const auto& b : d.analyst_observations) issues.push_back(b);
    for (const auto& g : d.guardrails) issues.push_back("guardrail: " + guardrail_flag_name(g));
    return join_lines(issues);
}

std::string history_text(const std::vector<HistoryEntry>& history) {
    if (history.empty()) return "none";
    std::string out;
    for (const auto& h : history) {
        if (!out.empty()) out += "\n";
        out += "round " + std::to_string(h.round) + ": " + h.strategy + " -> " +
               (h.accepted ? "accepted" : "kept current page") + " (best candidate " +
               h.best_candidate_total.str() + ")";
    }
    return out;
}

std::string contrastive_text(const std::optional<llm::ContrastiveRecord>& c) {
    if (!c) return "none";
    std::ostringstream ss;
    ss << "improved: " << (c->improved.empty() ? "none" : "") ;
    for (const auto& s : c->improved) ss << "\n- " << s;
    ss << "\nregressed: " << (c->regressed.empty() ? "none" : "");
    for (const auto& s : c->regressed) ss << "\n- " << s;
    ss << "\nunchanged issues: " << (c->unchanged_issues.empty() ? "none" : "");
    for (const auto& s : c->unchanged_issues) ss << "\n- " << s;
    if (!c->priority_fix.empty()) ss << "\npriority fix: " << c->priority_fix;
    return ss.str();
}

std::string diagnose_game_layer(const Diagnosis& d) {
    if (d.keyboard_probed && !d.keyboard_responsive) return "input";
    if (d.motion_frozen) return "loop";
    if (d.game_evidence && d.gameplay_probed && !d.gameplay_changed) return "gameplay";
    if (d.exceptions > 0) return "loop";
    return "canvas";
}

std::string render_repair_prompt(const HtmlArtifact& artifact, const Diagnosis& d,
                                 const Strategy& strategy) {
    if (strategy.name == StrategyName::GameRepair) {
        std::map<std::string, std::string> b;
        b["game_layer"] = diagnose_game_layer(d);
        b["query"] = artifact.prompt;
        b["score"] = d.total.str();
        b["probe_evidence"] = probe_evidence_text(d);
        b["preservation_list"] = join_lines(d.preservation_list);
        b["html"] = artifact.html;
        b["output_mode"] = output_mode_name(strategy.output_mode);
        return llm::render(llm::TemplateKey::game_repair, b);
    }
    std::map<std::string, std::string> b;
    b["strategy_name"] = strategy_name_str(strategy.name);
    b["query"] = artifact.prompt;
    b["score"] = d.total.str();
    b["rendering"] = d.components.rendering.str();
    b["visual_design"] = d.components.visual_design.str();
    b["functionality"] = d.components.functionality.str();
    b["interaction"] = d.components.interactivity.str();
    b["code_quality"] = d.components.code_quality.str();
    b["prev_iterations"] = history_text(d.history);
    b["probe_evidence"] = probe_evidence_text(d);
    b["observer_evidence"] = join_lines(d.analyst_observations);
    json checklist = json::array();
    checklist.push_back({{"done", d.requirements_done},
                         {"broken", d.requirements_broken},
                         {"missing", d.requirements_missing},
                         {"total", d.requirements_total}});
    b["requirement_checklist"] = d.requirements_total > 0 ? checklist.dump() : "none";
    b["visual_context"] = join_lines(d.keyframe_notes);
    b["contrastive_feedback"] = contrastive_text(d.contrastive);
    b["issues_or_missing_features"] = issues_text(d);
    b["preservation_list"] = join_lines(d.preservation_list);
    b["strategy_instruction"] = strategy_instruction(strategy.name) +
                                (strategy.output_mode == OutputMode::patch
                                     ? "\nSelected mode: patch mode."
                                     : "\nSelected mode: rewrite mode.");
    b["html"] = artifact.html;
    return llm::render(llm::TemplateKey::repair, b);
}

} // namespace

// ---------------------------------------------------------------------------
// contrastive_feedback
// ---------------------------------------------------------------------------

llm::ContrastiveRecord contrastive_feedback(const HtmlArtifact& before_artifact,
                                            const Evaluation& before, const Evaluation& after,
                                            llm::ModelClient::Session& session) {
    // Pair keyframes positionally; annotations carry role + viewport, so
    // equal-position pairs describe the same interaction state.
    std::size_t pairs = std::min(before.trace.keyframes.size(), after.trace.keyframes.size());
    std::size_t differing = 0;
    std::vector<llm::Attachment> attachments;
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto& b = before.trace.keyframes[i];
        const auto& a = after.trace.keyframes[i];
        if (b.frame_hash != a.frame_hash) ++differing;
        attachments.push_back({b.frame_hash, "image/x-portable-graymap", ""});
        attachments.push_back({a.frame_hash, "image/x-portable-graymap", ""});
    }
    if (differing == 0) return llm::ContrastiveRecord{}; // nothing changed to compare

    Points delta = after.report.total - before.report.total;
    std::ostringstream dims;
    for (Dimension d : all_dimensions()) {
        Points dd = after.report.score.component(d) - before.report.score.component(d);
        if (!dims.str().empty()) dims << ", ";
        dims << dimension_name(d) << " " << (dd >= kZeroPoints ? "+" : "") << dd.str();
    }
    std::map<std::string, std::string> b;
    b["query"] = before_artifact.prompt;
    b["score_before"] = before.report.total.str();
    b["score_after"] = after.report.total.str();
    b["delta"] = (delta >= kZeroPoints ? "+" : "") + delta.str();
    b["dim_deltas_str"] = dims.str();
    b["pair_count"] = std::to_string(pairs);

    try {
        std::string raw = session.call(llm::TemplateKey::contrastive,
                                       llm::render(llm::TemplateKey::contrastive, b), attachments);
        return llm::parse_contrastive(raw);
    } catch (const ProviderError&) {
        llm::ContrastiveRecord degraded;
        degraded.degraded = true;
        return degraded;
    } catch (const ParseError&) {
        llm::ContrastiveRecord degraded;
        degraded.degraded = true;
        return degraded;
    }
}

// ---------------------------------------------------------------------------
// repair_round
// ---------------------------------------------------------------------------

void RepairConfig::check() const {
    weights.check();
    if (max_rounds < 1 || max_rounds > 8)
        throw DomainError("repair config: max_rounds must be in [1,8]");
    if (candidates_per_round < 1 || candidates_per_round > 2)
        throw DomainError("repair config: candidates_per_round must be 1 or 2");
    if (patience_rounds < 1) throw DomainError("repair config: patience_rounds must be >= 1");
}

RoundRecord repair_round(CurrentPage& page, const Strategy& strategy, const Diagnosis& diagnosis,
                         const RepairConfig& config, llm::ModelClient::Session& session,
                         Evaluator& evaluator, int round) {
    if (!is_admissible(strategy.name, diagnosis.band))
        throw DomainError("strategy " + strategy_name_str(strategy.name) +
                          " is not admissible in band " + band_name(diagnosis.band));

    RoundRecord record;
    record.round = round;
    record.band = diagnosis.band;
    record.strategy = strategy_name_str(strategy.name);
    record.output_mode = output_mode_name(strategy.output_mode);
    record.diagnosis_snapshot = diagnosis.snapshot();
    record.pre_total = page.eval.report.total;

    if (strategy.name == StrategyName::NoOpVerify) {
        // Preservation is an auditable action: one fresh run, recorded.
        Evaluation fresh = evaluator.evaluate(page.artifact);
        record.gate = "verified";
        record.post_total = fresh.report.total;
        page.eval = std::move(fresh);
        return record;
    }

    std::string base_id = page.artifact.id;
    std::size_t hash_pos = base_id.find('#');
    if (hash_pos != std::string::npos) base_id = base_id.substr(0, hash_pos);

    std::vector<HtmlArtifact> artifacts;
    std::vector<score::ScoreReport> reports;
    std::vector<Evaluation> evaluations;
    std::vector<int> usable_index; // candidate record index per evaluated report

    for (int c = 0; c < config.candidates_per_round; ++c) {
        CandidateRecord cand;
        cand.id = base_id + "#r" + std::to_string(round) + "c" + std::to_string(c + 1);
        std::string prompt = render_repair_prompt(page.artifact, diagnosis, strategy);
        std::string raw;
        try {
            llm::TemplateKey key = strategy.name == StrategyName::GameRepair
                                       ? llm::TemplateKey::game_repair
                                       : llm::TemplateKey::repair;
            raw = session.call(key, prompt);
            cand.generated = true;
        } catch (const ProviderError& e) {
            cand.discard_reason = std::string("generation failed: ") + e.what();
            record.candidates.push_back(std::move(cand));
            continue;
        }

        HtmlArtifact candidate = page.artifact;
        candidate.id = cand.id;
        candidate.provenance = Provenance::repaired(round);
        try {
            if (strategy.output_mode == OutputMode::patch) {
                candidate.html = apply_patches(page.artifact.html, llm::parse_patches(raw));
            } else {
                candidate.html = llm::extract_html(raw).html;
            }
            candidate.check();
        } catch (const ParseError& e) {
            cand.discard_reason = std::string("output rejected: ") + e.what();
            record.candidates.push_back(std::move(cand));
            continue;
        } catch (const PatchError& e) {
            cand.discard_reason = std::string("patch failed: ") + e.what();
            record.candidates.push_back(std::move(cand));
            continue;
        } catch (const DomainError& e) {
            cand.discard_reason = std::string("candidate invalid: ") + e.what();
            record.candidates.push_back(std::move(cand));
            continue;
        }

        // Candidate acceptance requires a fresh run under the same protocol.
        Evaluation eval = evaluator.evaluate(candidate);
        if (eval.run_id.empty())
            throw DomainError("evaluator returned no run id for candidate " + candidate.id);
        cand.usable = true;
        cand.run_id = eval.run_id;
        cand.report = eval.report;
        Rational comp = score::composite_score(eval.report, page.eval.report, config.weights);
        cand.s_comp = std::to_string(comp.num()) + "/" + std::to_string(comp.den());
        usable_index.push_back(static_cast<int>(record.candidates.size()));
        record.candidates.push_back(std::move(cand));
        artifacts.push_back(std::move(candidate));
        reports.push_back(eval.report);
        evaluations.push_back(std::move(eval));
    }

    int selected = select_candidate(page.eval.report, reports, config.weights);
    if (selected >= 0) {
        record.selected = usable_index[static_cast<std::size_t>(selected)];
        record.gate = "accepted";
        Evaluation before_eval = std::move(page.eval);
        HtmlArtifact before_artifact = std::move(page.artifact);
        page.artifact = std::move(artifacts[static_cast<std::size_t>(selected)]);
        page.eval = std::move(evaluations[static_cast<std::size_t>(selected)]);
        if (config.contrastive_enabled) {
            llm::ContrastiveRecord feedback =
                contrastive_feedback(before_artifact, before_eval, page.eval, session);
            bool empty = feedback.improved.empty() && feedback.regressed.empty() &&
                         feedback.unchanged_issues.empty() && feedback.priority_fix.empty() &&
                         !feedback.degraded;
            if (!empty) record.contrastive = std::move(feedback);
        }
    } else {
        bool any_generated = false;
        for (const auto& cand : record.candidates) any_generated |= cand.generated;
        record.gate = any_generated ? "kept_current" : "failed_generation";
    }
    record.post_total = page.eval.report.total;
    return record;
}

// ---------------------------------------------------------------------------
// run_repair
// ---------------------------------------------------------------------------

RepairTrace run_repair(const HtmlArtifact& h0, const RepairConfig& config,
                       llm::ModelClient& client, Evaluator& evaluator) {
    config.check();

    RepairTrace trace;
    trace.artifact_id = h0.id;
    trace.family = h0.family;
    trace.lineage.push_back(h0.id);

    auto session = client.session(h0.id);

    CurrentPage page{h0, evaluator.evaluate(h0)};
    trace.initial_report = page.eval.report;
    bool entered_static_failed = !page.eval.static_report.ok;

    trace.best_artifact = page.artifact;
    trace.best_report = page.eval.report;
    trace.best_round = 0;

    if (page.eval.report.total >= config.target_total) {
        trace.termination_reason = "target_reached";
        trace.call_log = session.log();
        return trace;
    }

    std::vector<HistoryEntry> history;
    std::optional<llm::ContrastiveRecord> last_contrastive;
    int stale_rounds = 0;
    bool any_accept = false;

    for (int round = 1; round <= config.max_rounds; ++round) {
        Diagnosis diagnosis = build_diagnosis(page.eval, history, last_contrastive);
        Strategy strategy = route(diagnosis);

        Points best_before = trace.best_report.total;
        RoundRecord record =
            repair_round(page, strategy, diagnosis, config, session, evaluator, round);

        HistoryEntry h;
        h.round = round;
        h.strategy = record.strategy;
        h.accepted = record.gate == "accepted";
        Points best_candidate = kZeroPoints;
        for (const auto& cand : record.candidates)
            if (cand.report) best_candidate = std::max(best_candidate, cand.report->total);
        h.best_candidate_total = best_candidate;
        history.push_back(h);

        last_contrastive = record.contrastive;
        if (record.gate == "accepted") {
            any_accept = true;
            trace.lineage.push_back(page.artifact.id);
            trace.best_artifact = page.artifact;
            trace.best_report = page.eval.report;
            trace.best_round = round;
        } else if (record.gate == "verified") {
            trace.best_report = page.eval.report; // same artifact, fresh run id
        }
        trace.rounds.push_back(std::move(record));

        if (page.eval.report.total >= config.target_total) {
            trace.termination_reason = "target_reached";
            break;
        }
        Points gain = trace.best_report.total - best_before;
        if (gain < config.patience_min_gain) ++stale_rounds;
        else stale_rounds = 0;
        if (stale_rounds >= config.patience_rounds) {
            trace.termination_reason = "patience";
            break;
        }
    }
    if (trace.termination_reason.empty()) trace.termination_reason = "budget";

    // A page that entered unparseable and never produced an accepted
    // candidate has nothing exportable; mark the trace rejected.
    if (!any_accept && entered_static_failed) trace.termination_reason = "rejected";
    trace.call_log = session.log();
    return trace;
}

// ---------------------------------------------------------------------------
// Log serialization
// ---------------------------------------------------------------------------

json RepairTrace::summary_json() const {
    json j;
    j["kind"] = "summary";
    j["artifact_id"] = artifact_id;
    j["family"] = family_name(family);
    j["origin_total"] = points_to_json(initial_report.total);
    j["origin_band"] = band_name(classify_state(initial_report.total).band);
    j["best_total"] = points_to_json(best_report.total);
    j["final_band"] = band_name(classify_state(best_report.total).band);
    j["best_round"] = best_round;
    j["rounds"] = static_cast<int>(rounds.size());
    j["termination_reason"] = termination_reason;
    j["best_run_id"] = best_report.run_id;
    j["final_run_fresh"] = !best_report.run_id.empty();
    j["lineage"] = lineage;
    return j;
}

std::vector<json> RepairTrace::to_log_lines() const {
    std::vector<json> lines;
    lines.push_back(summary_json());
    for (const auto& r : rounds) {
        json j;
        j["kind"] = "round";
        j["artifact_id"] = artifact_id;
        j["round"] = r.round;
        j["band"] = band_name(r.band);
        j["strategy"] = r.strategy;
        j["output_mode"] = r.output_mode;
        j["diagnosis"] = r.diagnosis_snapshot;
        json cands = json::array();
        for (const auto& c : r.candidates) {
            json cj;
            cj["id"] = c.id;
            cj["generated"] = c.generated;
            cj["usable"] = c.usable;
            if (!c.discard_reason.empty()) cj["discard_reason"] = c.discard_reason;
            if (c.report) {
                cj["total"] = points_to_json(c.report->total);
                cj["score"] = to_json(c.report->score);
            }
            if (!c.s_comp.empty()) cj["s_comp"] = c.s_comp;
            if (!c.run_id.empty()) cj["run_id"] = c.run_id;
            cands.push_back(cj);
        }
        j["candidates"] = cands;
        j["selected"] = r.selected;
        j["gate"] = r.gate;
        j["pre_total"] = points_to_json(r.pre_total);
        j["post_total"] = points_to_json(r.post_total);
        j["termination_reason"] =
            (r.round == static_cast<int>(rounds.size())) ? termination_reason : "";
        if (r.contrastive) {
            json c;
            c["improved"] = r.contrastive->improved;
            c["regressed"] = r.contrastive->regressed;
            c["unchanged_issues"] = r.contrastive->unchanged_issues;
            c["priority_fix"] = r.contrastive->priority_fix;
            c["degraded"] = r.contrastive->degraded;
            j["contrastive"] = c;
        }
        lines.push_back(j);
    }
    return lines;
}

} // namespace htmlcure::repair
