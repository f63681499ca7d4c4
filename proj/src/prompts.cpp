#include "htmlcure/prompts.hpp"

#include <array>
#include <cctype>

#include "htmlcure/errors.hpp"

namespace htmlcure::llm {

namespace {

const std::string kGeneration =
    R"(You generate benchmark solutions as a single self-contained HTML document.
Return only the final HTML.
Do not include analysis, explanations, markdown fences, or any text before/after
the HTML.
Start with <!DOCTYPE html> when applicable and ensure the document is complete
and closed.)";

const std::string kSafetySuffix =
    R"(Build a harmless, front-end-only demo. Use fake placeholder data only. Do not
process, transmit, store, or validate real credentials or payment data; if
payment fields are requested, implement UI-only demo formatting/validation with
synthetic examples.)";

const std::string kAnalyst =
    R"(You are a meticulous HTML page analyst. You will describe EXACTLY what you see in
the screenshots, report objective facts from probe data, AND verify each task
requirement. Do NOT score. Only observe and audit.

## Task Description
{query}

## Static Analysis
- HTML size: {html_size}; Canvas: {has_canvas}; JS: {has_script};
  CSS: {has_style}; SVG: {has_svg}; rAF: {has_raf}
- Input types detected: {input_types}
- External resources: {ext_list}
- Static issues: {static_issues}

## Render and Runtime Evidence
- Rendered: {rendered}; Title: {page_title}
- Serious console errors: {console_list}
- JS exceptions: {page_err_list}

## Browser Interaction Evidence
- Agent phase: {agent_ran}; steps: {agent_steps}; actions: {agent_actions}
- Confirmed responsive keys: {discovered_keys}
- Keyboard probe: {keyboard_probed}; responsive: {keyboard_responsive}
- Button census: {buttons_responsive}/{buttons_tested} responsive
- Form, drag, gameplay, canvas, animation, audio, and latency evidence:
  {dynamic_experience_fields}

## Screenshots
Each image is a keyframe from automated testing. Review them IN ORDER.
{frame_annotations}

Compare consecutive frames carefully:
- Identical frames after interaction = interaction BROKEN
- Progressive change = interaction WORKING

## Your Task
Part 1: Observation.
Describe the page factually. Cite specific evidence such as frame deltas, latency,
button response rate, keyboard response, canvas fill, and console state. List
distinct visual elements, generic/template-like signals, distinctive design
signals, working features, broken features, interaction quality, and layout notes.

Part 2: Requirement Audit.
Break the task description into prompt-grounded requirements. For each requirement,
return status = done, broken, or missing with evidence. Ignore packaging constraints
such as "single HTML file" unless they cause a user-facing failure. Do not count
optional extras as requirements.

Reply ONLY with valid JSON:
{
  "page_type": "...",
  "visual_state": "...",
  "visual_elements": ["..."],
  "template_like_signals": ["..."],
  "distinctive_design_signals": ["..."],
  "design_specificity": "...",
  "working": ["..."],
  "broken": ["..."],
  "interaction_quality": "...",
  "layout_notes": "...",
  "requirements": [
    {"requirement": "...", "status": "done|broken|missing", "evidence": "..."}
  ],
  "summary": {"total": 0, "done": 0, "broken": 0, "missing": 0}
})";

const std::string kScorer =
    R"(You are a strict HTML quality scorer. You receive structured evidence from a
prior analysis stage plus objective metrics. You have NO screenshots. Score based
ONLY on the evidence provided.

## Task Description
{query}

## Analyst Report
{observer_report_json}

## Requirement Checklist
{task_auditor_report_json}

## Objective Metrics Summary
- Keyboard: probed={keyboard_probed}; responsive={keyboard_responsive};
  keys={keys_responded}
- Button response rate: {button_response_rate_str}
- Canvas: type={canvas_type}; content={canvas_has_content}; fill={canvas_fill_ratio}
- Animation: detected={animation_detected}; fps={fps_quality};
  frame changes={frame_change_rate}
- Latency: avg={avg_latency}; max={max_latency}; timed out={interactions_timed_out}
- Console and JS exceptions: {console_count}; {page_err_count}
- Form, drag, gameplay, structural, and agent evidence: {objective_metric_fields}

## Scoring Rules
1. Evidence only. If a feature is not supported by the Analyst report or probe
   data, do not assume it exists.
2. Functionality is driven by the requirement checklist. Done items raise the
   score; broken items penalize more than missing items because they indicate a
   failed implementation.
3. Interaction is constrained by objective probes. Unresponsive buttons, keyboard
   failure, gameplay with no state change, or timed-out actions cap interaction.
4. Visual design is judged from the Analyst's visual evidence. Polished but
   reusable templates should not receive top visual scores without prompt-specific
   design signals.
5. Code quality is independent of visual quality and depends on runtime cleanliness,
   maintainability, event wiring, and implementation organization.
6. Score conservatively and cite evidence in every reason.

Return JSON with the five dimensions and total:
{
  "rendering": {"score": 0, "reason": "..."},
  "visual_design": {"score": 0, "reason": "..."},
  "functionality": {"score": 0, "reason": "..."},
  "interaction": {"score": 0, "reason": "..."},
  "code_quality": {"score": 0, "reason": "..."},
  "total_score": 0,
  "bugs": ["specific observed bug"],
  "missing_features": ["missing prompt-grounded feature"],
  "highlights": ["working feature to preserve"],
  "improvement_hints": ["actionable repair hint"],
  "summary": "..."
})";

const std::string kTester =
    R"(You are an automated HTML page quality tester. Thoroughly test the page and
produce a detailed report.

Visit this URL: {page_url}

## What this page should do
{query}

## Testing procedure
1. Load the page and observe initial rendering.
2. Activate entry points such as Start, Submit, Play, Enter, or OK.
3. Test every feature mentioned in the task:
   - click buttons and interactive elements
   - fill and submit forms
   - test navigation, menus, tabs, pagination, and modes
   - observe and interact with animated or canvas-based content
   - navigate through multiple states or views
4. Complete at least one full user workflow.
5. Report unresponsive elements, visual glitches, broken layout, on-page errors,
   and missing content.

{interaction_guide}

## Report
1. Rendering: initial page state and visible failures.
2. Feature status: working, partial, broken, or missing.
3. Bug list: what happened versus what should have happened.
4. Missing features.
5. Overall quality: Excellent, Good, Fair, Poor, or Broken.)";

const std::string kRepair =
    R"(You are an expert HTML/CSS/JavaScript developer. Improve the current page under
the strategy selected by the repair controller: {strategy_name}.

## Task
{query}

## Current page state
Total score: {score}/100
Dimension scores: rendering={rendering}, visual_design={visual_design},
functionality={functionality}, interaction={interaction}, code_quality={code_quality}

## Previous repair attempts
{prev_iterations}

## Objective probe evidence
{probe_evidence}

## Visual and requirement evidence
{observer_evidence}
{requirement_checklist}
{visual_context}
{contrastive_feedback}

## Problems to fix
{issues_or_missing_features}

## Features that must be preserved
{preservation_list}

## Strategy-specific instruction
{strategy_instruction}

Examples:
- Holistic rewrite: rebuild a complete implementation when the page lacks a
  stable local target, while preserving any verified useful structure.
- Feature completion: implement all broken or missing requirements without
  removing working features.
- Interaction repair: fix event wiring, input handling, latency, feedback, and
  state transitions without changing unrelated visuals.
- Game repair: target the diagnosed layer such as input, game loop, canvas
  rendering, overlay state, or gameplay logic.
- Visual enrichment: improve typography, layout, palette, depth, animation, and
  responsive polish without breaking verified behavior.
- High-state refinement: make small additive patches and avoid broad rewrites.

## Current HTML
```html
{html}
```

## Output rule
If the selected mode is patch mode, return JSON patches:
{"patches": [{"old_str": "exact substring", "new_str": "replacement"}]}

If the selected mode is rewrite mode, return only the complete HTML file.)";

const std::string kGameRepair =
    R"(You are an expert HTML/CSS/JavaScript game developer. Automated probes identified
the failing layer: {game_layer}. Fix that layer without rewriting unrelated
systems.

## Task
{query}

## Current state
Total score: {score}/100
Probe evidence: {probe_evidence}
Working features to preserve: {preservation_list}

## Root-cause checklist
If {game_layer}=input:
1. canvas is not focusable or lacks tabindex
2. keydown/keyup listeners are attached to the wrong element
3. preventDefault is missing for arrow keys
4. key state is not read inside the game loop

If {game_layer}=loop:
1. requestAnimationFrame is never called
2. loop starts only after a user action
3. update or draw throws and stops the loop

If {game_layer}=canvas:
1. canvas width or height is zero
2. getContext is missing or called before the DOM is ready
3. clearRect runs without redraw
4. overlay or CSS hides the canvas

If {game_layer}=overlay:
1. game-over or modal screen is visible on load
2. start screen cannot be dismissed
3. initial score, lives, or state incorrectly trigger a terminal state

If {game_layer}=gameplay:
1. collision, scoring, state machine, timer, level progression, or physics is wrong
2. input works but game state does not change correctly

## Current HTML
```html
{html}
```

Return the requested patch or full HTML according to {output_mode}.)";

const std::string kContrastive =
    R"(You are a visual quality analyst comparing two versions of an HTML page. The page
was modified between BEFORE and AFTER. Identify what improved, what regressed,
and what remained unchanged.

## Task
{query}

## Score change
{score_before} -> {score_after} ({delta})
Dimension deltas: {dim_deltas_str}

## Frame pairs
{pair_count} paired screenshots are provided below. For each pair, BEFORE is the
old version and AFTER is the new version at the same interaction state.

Classify each visible difference:
- IMPROVED: broken, missing, or ugly before; fixed, present, or better after
- REGRESSED: working or good before; broken, worse, or missing after
- UNCHANGED: same problem visible in both versions

Focus on functional and visual differences, not minor pixel shifts.

Reply ONLY with JSON:
{
  "improved": ["..."],
  "regressed": ["..."],
  "unchanged_issues": ["..."],
  "priority_fix": "single most important thing to fix next"
})";

const std::string kVisualDiagnosis =
    R"(You are a visual quality expert. Examine this HTML page screenshot and identify
specific visual issues preventing it from reaching professional quality.

Task: {query}
Current score: {score}; visual_design={visual_design}; rendering={rendering}

Focus on color palette, typography, spacing, layout, visual depth, polish,
responsive quality, hover states, transitions, and micro-animations. Do NOT
suggest functionality changes.

Return JSON:
{"issues": ["..."], "suggestions": ["..."], "css_focus_areas": ["..."]})";

const std::string kVisualVerification =
    R"(You are a visual quality analyst comparing BEFORE and AFTER versions of an HTML
page modified for visual quality.

Task: {query}
Before score: {score_before}; After score: {score_after}

Compare polish, layout integrity, content completeness, and whether interactive
controls remain visible and properly styled.

Return JSON:
{"improved": true, "functional_regression": false,
 "improvements": ["..."], "regressions": ["..."]})";

const std::array<std::string, 9> kKeyNames = {
    "generation",  "analyst",     "scorer",           "tester",          "repair",
    "game_repair", "contrastive", "visual_diagnosis", "visual_verification"};

} // namespace

const std::string& template_key_name(TemplateKey key) {
    return kKeyNames[static_cast<int>(key)];
}

TemplateKey template_key_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kKeyNames.size(); ++i)
        if (kKeyNames[i] == name) return static_cast<TemplateKey>(i);
    throw DomainError("unknown template key: " + name);
}

const std::vector<TemplateKey>& all_template_keys() {
    static const std::vector<TemplateKey> keys = {
        TemplateKey::generation,  TemplateKey::analyst,     TemplateKey::scorer,
        TemplateKey::tester,      TemplateKey::repair,      TemplateKey::game_repair,
        TemplateKey::contrastive, TemplateKey::visual_diagnosis,
        TemplateKey::visual_verification};
    return keys;
}

std::set<std::string> scan_placeholders(const std::string& body) {
    std::set<std::string> out;
    for (std::size_t i = 0; i + 2 < body.size(); ++i) {
        if (body[i] != '{') continue;
        if (!std::islower(static_cast<unsigned char>(body[i + 1]))) continue;
        std::size_t j = i + 1;
        while (j < body.size() &&
               (std::islower(static_cast<unsigned char>(body[j])) ||
                std::isdigit(static_cast<unsigned char>(body[j])) || body[j] == '_'))
            ++j;
        if (j < body.size() && body[j] == '}' && j > i + 1) {
            out.insert(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return out;
}

const PromptTemplate& get_template(TemplateKey key) {
    static const auto* table = [] {
        auto* m = new std::map<TemplateKey, PromptTemplate>;
        auto put = [&](TemplateKey k, const std::string& body) {
            PromptTemplate t;
            t.key = k;
            t.body = body;
            t.required_placeholders = scan_placeholders(body);
            (*m)[k] = std::move(t);
        };
        put(TemplateKey::generation, kGeneration);
        put(TemplateKey::analyst, kAnalyst);
        put(TemplateKey::scorer, kScorer);
        put(TemplateKey::tester, kTester);
        put(TemplateKey::repair, kRepair);
        put(TemplateKey::game_repair, kGameRepair);
        put(TemplateKey::contrastive, kContrastive);
        put(TemplateKey::visual_diagnosis, kVisualDiagnosis);
        put(TemplateKey::visual_verification, kVisualVerification);
        return m;
    }();
    return table->at(key);
}

const std::string& safety_retry_suffix() { return kSafetySuffix; }

} // namespace htmlcure::llm
