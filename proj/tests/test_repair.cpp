#include <doctest.h>

#include "htmlcure/repair.hpp"

using namespace htmlcure;
using namespace htmlcure::repair;

namespace {

std::uint64_t mix(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Spreads a total across dimensions; each dimension is monotone in the
// total, so a higher-total report never regresses any component.
score::ScoreReport spread_report(std::int64_t total_h, const std::string& run_id = "run") {
    score::ScoreReport r;
    r.score.profile = Profile::interactive;
    std::int64_t rest = total_h;
    auto take = [&](std::int64_t cap) {
        std::int64_t v = std::min(cap, rest);
        rest -= v;
        return Points::from_hundredths(v);
    };
    r.score.functionality = take(5500);
    r.score.visual_design = take(2000);
    r.score.rendering = take(1000);
    r.score.interactivity = take(1000);
    r.score.code_quality = take(500);
    r.score.check();
    r.total = r.score.total();
    r.run_id = run_id;
    return r;
}

Evaluation spread_eval(std::int64_t total_h, const std::string& run_id) {
    Evaluation e;
    e.report = spread_report(total_h, run_id);
    e.trace.artifact_id = "x";
    e.static_report.ok = true;
    e.run_id = run_id;
    return e;
}

// Deterministic evaluator: totals come from a hash of the artifact id.
class HashEvaluator final : public Evaluator {
public:
    explicit HashEvaluator(std::uint64_t seed, std::int64_t origin_total)
        : seed_(seed), origin_total_(origin_total) {}

    static std::int64_t total_for(std::uint64_t seed, const std::string& id) {
        std::uint64_t h = seed;
        for (unsigned char c : id) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return static_cast<std::int64_t>(h % 10001);
    }

    Evaluation evaluate(const HtmlArtifact& artifact) override {
        ++calls;
        std::int64_t total = artifact.provenance.kind == Provenance::Kind::generated
                                 ? origin_total_
                                 : total_for(seed_, artifact.id);
        return spread_eval(total, artifact.id + "#e" + std::to_string(calls));
    }

    int calls = 0;

private:
    std::uint64_t seed_;
    std::int64_t origin_total_;
};

// Evaluator returning a scripted total per call (after the initial page).
class SequenceEvaluator final : public Evaluator {
public:
    SequenceEvaluator(std::int64_t origin, std::vector<std::int64_t> totals)
        : origin_(origin), totals_(std::move(totals)) {}

    Evaluation evaluate(const HtmlArtifact& artifact) override {
        ++calls;
        std::int64_t total = origin_;
        if (artifact.provenance.kind == Provenance::Kind::repaired) {
            REQUIRE(next_ < totals_.size());
            total = totals_[next_++];
        }
        return spread_eval(total, artifact.id + "#e" + std::to_string(calls));
    }

    int calls = 0;

private:
    std::int64_t origin_;
    std::vector<std::int64_t> totals_;
    std::size_t next_ = 0;
};

std::string rewrite_doc(const std::string& marker) {
    return "<!DOCTYPE html><html><head><title>R</title></head><body><h1>Rebuilt</h1><p>" +
           marker + " page body with plenty of content to stay above the static pass "
           "threshold for trivial pages, including several full sentences.</p></body></html>";
}

HtmlArtifact low_page(const std::string& id = "page-low") {
    HtmlArtifact a;
    a.id = id;
    a.html = "<html><body><p>thin page</p></body></html>";
    a.prompt = "build something useful";
    a.family = Family::apps_tools;
    a.interactive = true;
    return a;
}

llm::ModelClient rewrite_client() {
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_default(llm::TemplateKey::repair, rewrite_doc("default"));
    mock->add_default(llm::TemplateKey::game_repair, rewrite_doc("game"));
    mock->add_default(llm::TemplateKey::contrastive,
                      R"({"improved":[],"regressed":[],"unchanged_issues":[],"priority_fix":"x"})");
    return llm::ModelClient(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);
}

// Serves a no-op patch that applies to any page with one </body>; patch-mode
// rounds then produce evaluable candidates whose ids drive scripted totals.
llm::ModelClient patch_client() {
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_default(llm::TemplateKey::repair,
                      R"({"patches":[{"old_str":"</body>","new_str":"</body>"}]})");
    mock->add_default(llm::TemplateKey::game_repair,
                      R"({"patches":[{"old_str":"</body>","new_str":"</body>"}]})");
    mock->add_default(llm::TemplateKey::contrastive,
                      R"({"improved":[],"regressed":[],"unchanged_issues":[],"priority_fix":"x"})");
    return llm::ModelClient(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);
}

Diagnosis base_diagnosis(Band band) {
    Diagnosis d;
    std::int64_t total = band == Band::low ? 2000 : band == Band::mid ? 6000 : 8500;
    d.total = Points::from_hundredths(total);
    d.components = spread_report(total).score;
    d.band = band;
    d.best_total = d.total;
    return d;
}

} // namespace

// ---------------------------------------------------------------------------
// Admissible sets and routing
// ---------------------------------------------------------------------------

TEST_CASE("admissible operator sets match the band tables") {
    using S = StrategyName;
    CHECK(admissible_set(Band::low) ==
          std::vector<S>{S::HolisticRewrite, S::FeatureCompletion, S::GameRepair});
    CHECK(admissible_set(Band::mid) ==
          std::vector<S>{S::Rewrite, S::BugFix, S::PlayabilityRepair, S::InteractionTargetedFix,
                         S::GameRepair, S::VisualEnrichment});
    CHECK(admissible_set(Band::high) ==
          std::vector<S>{S::NoOpVerify, S::VisualPolish, S::InteractionEnhance,
                         S::FunctionalityRefine, S::CodeCleanup});
    CHECK(is_admissible(S::GameRepair, Band::low));
    CHECK(is_admissible(S::GameRepair, Band::mid));
    CHECK_FALSE(is_admissible(S::GameRepair, Band::high));
    CHECK_FALSE(is_admissible(S::HolisticRewrite, Band::mid));
}

TEST_CASE("high-band operators never rewrite") {
    // All Low operators rewrite; Mid GameRepair patches; High refines patch.
    Diagnosis low = base_diagnosis(Band::low);
    low.game_evidence = true;
    low.motion_frozen = true;
    CHECK(route(low).output_mode == OutputMode::rewrite);
    Diagnosis mid = base_diagnosis(Band::mid);
    mid.game_evidence = true;
    mid.motion_frozen = true;
    Strategy mid_game = route(mid);
    CHECK(mid_game.name == StrategyName::GameRepair);
    CHECK(mid_game.output_mode == OutputMode::patch);
}

TEST_CASE("routing follows the published policy examples") {
    // Low, no game evidence, >50% requirements missing -> HolisticRewrite.
    Diagnosis low = base_diagnosis(Band::low);
    low.requirements_total = 10;
    low.requirements_missing = 6;
    low.requirements_done = 4;
    CHECK(route(low).name == StrategyName::HolisticRewrite);

    // Mid, unresponsive buttons, clean console -> InteractionTargetedFix.
    Diagnosis mid = base_diagnosis(Band::mid);
    mid.buttons_tested = 4;
    mid.buttons_responsive = 2;
    CHECK(route(mid).name == StrategyName::InteractionTargetedFix);

    // High, no defects -> NoOpVerify.
    Diagnosis high = base_diagnosis(Band::high);
    CHECK(route(high).name == StrategyName::NoOpVerify);
    CHECK(route(high).output_mode == OutputMode::none);
}

TEST_CASE("routing binds observed failures to operator families") {
    Diagnosis mid = base_diagnosis(Band::mid);
    mid.console_errors = 2;
    CHECK(route(mid).name == StrategyName::BugFix);

    mid = base_diagnosis(Band::mid);
    mid.keyboard_probed = true;
    mid.keyboard_responsive = false;
    CHECK(route(mid).name == StrategyName::PlayabilityRepair);

    mid = base_diagnosis(Band::mid);
    mid.requirements_total = 8;
    mid.requirements_missing = 5;
    CHECK(route(mid).name == StrategyName::Rewrite);

    mid = base_diagnosis(Band::mid);
    CHECK(route(mid).name == StrategyName::VisualEnrichment);

    // Game evidence outranks console errors.
    mid = base_diagnosis(Band::mid);
    mid.console_errors = 1;
    mid.game_evidence = true;
    mid.gameplay_probed = true;
    mid.gameplay_changed = false;
    CHECK(route(mid).name == StrategyName::GameRepair);

    Diagnosis high = base_diagnosis(Band::high);
    high.test_failures.push_back({"tc-1", "assert failed"});
    CHECK(route(high).name == StrategyName::FunctionalityRefine);

    high = base_diagnosis(Band::high);
    high.buttons_tested = 5;
    high.buttons_responsive = 4;
    CHECK(route(high).name == StrategyName::InteractionEnhance);

    high = base_diagnosis(Band::high);
    high.guardrails.insert(score::GuardrailFlag::no_viewport_meta);
    CHECK(route(high).name == StrategyName::VisualPolish);

    high = base_diagnosis(Band::high);
    high.static_issues = 1;
    CHECK(route(high).name == StrategyName::CodeCleanup);

    // Two defect classes at once: stay conservative.
    high = base_diagnosis(Band::high);
    high.test_failures.push_back({"tc-1", "x"});
    high.guardrails.insert(score::GuardrailFlag::absent_styling);
    CHECK(route(high).name == StrategyName::NoOpVerify);
}

// ---------------------------------------------------------------------------
// build_diagnosis
// ---------------------------------------------------------------------------

TEST_CASE("diagnosis captures score state, failures, and history") {
    Evaluation eval = spread_eval(8500, "r1");
    Diagnosis fresh = build_diagnosis(eval, {});
    CHECK(fresh.band == Band::high);
    CHECK(fresh.history.empty());
    CHECK(fresh.distance_to_export_target.hundredths() == 1200); // 97 - 85

    Evaluation above = spread_eval(9800, "r2");
    CHECK(build_diagnosis(above, {}).distance_to_export_target.hundredths() == 0);

    exec::TcResult failing;
    failing.tc_id = "tc-7";
    failing.passed = false;
    exec::StepOutcome out;
    out.step_index = 1;
    out.outcome = ProbeOutcome::fail;
    out.detail = "assertion false: state.x == 1";
    failing.step_outcomes.push_back(out);
    eval.tc_results = {failing, failing, failing};
    eval.tc_results[1].tc_id = "tc-8";
    eval.tc_results[2].tc_id = "tc-9";
    Diagnosis with_failures = build_diagnosis(eval, {});
    REQUIRE(with_failures.test_failures.size() == 3);
    CHECK(with_failures.test_failures[0].tc_id == "tc-7");
    CHECK(with_failures.test_failures[0].message == "assertion false: state.x == 1");

    std::vector<HistoryEntry> history = {{1, "BugFix", true, Points::from_hundredths(7000)}};
    CHECK(build_diagnosis(eval, history).history.size() == 1);
}

// ---------------------------------------------------------------------------
// apply_patches
// ---------------------------------------------------------------------------

TEST_CASE("patches: unique, ambiguous, absent, sequential") {
    std::string html = "<div style=\"color:red\">a</div>";
    auto patched = apply_patches(html, {{"color:red", "color:blue"}});
    CHECK(patched == "<div style=\"color:blue\">a</div>");

    std::string many_divs;
    for (int i = 0; i < 40; ++i) many_divs += "<div>x</div>";
    try {
        apply_patches(many_divs, {{"div", "span"}});
        FAIL("expected ambiguity error");
    } catch (const PatchError& e) {
        CHECK(e.reason == PatchError::Reason::ambiguous);
    }

    try {
        apply_patches(html, {{"nonexistent", "y"}});
        FAIL("expected absent error");
    } catch (const PatchError& e) {
        CHECK(e.reason == PatchError::Reason::absent);
    }

    // Sequential semantics: patch 2 targets text created by patch 1.
    std::vector<llm::Patch> sequential = {{"alpha", "beta"}, {"beta", "gamma"}};
    CHECK(apply_patches("<p>alpha</p>", sequential) == "<p>gamma</p>");

    CHECK_THROWS_AS(apply_patches(html, {}), DomainError);
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

TEST_CASE("selection follows the composite argmax with conservative ties") {
    score::RegressionWeights w;
    // Current 65. Candidate A totals 72 but regresses functionality by 6, so
    // S_comp(A) = 72 - 1.5*6 = 63. Candidate B totals 70 with no regression.
    score::ScoreReport current = spread_report(6500);
    score::ScoreReport a = current;
    a.score.functionality = current.score.functionality - Points::from_hundredths(600);
    a.score.visual_design = Points::from_hundredths(2000);
    a.score.rendering = Points::from_hundredths(300);
    a.score.check();
    a.total = a.score.total();
    REQUIRE(a.total.hundredths() == 7200);
    score::ScoreReport b = spread_report(7000);
    std::vector<score::ScoreReport> candidates = {a, b};
    int selected = select_candidate(current, candidates, w);
    CHECK(selected == 1);

    // Both candidates below the current composite: keep the page.
    std::vector<score::ScoreReport> worse = {spread_report(6000), spread_report(5000)};
    CHECK(select_candidate(current, worse, w) == -1);

    // Equal composite to current: prefer the current page.
    std::vector<score::ScoreReport> equal = {spread_report(6500)};
    CHECK(select_candidate(current, equal, w) == -1);

    // Two identical improving candidates: lower index wins.
    std::vector<score::ScoreReport> twins = {spread_report(8000), spread_report(8000)};
    CHECK(select_candidate(current, twins, w) == 0);
}

// ---------------------------------------------------------------------------
// Rounds and the loop
// ---------------------------------------------------------------------------

TEST_CASE("a pre-met target stops before any round") {
    HashEvaluator evaluator(1, 9800);
    llm::ModelClient client = rewrite_client();
    RepairTrace trace = run_repair(low_page(), RepairConfig{}, client, evaluator);
    CHECK(trace.termination_reason == "target_reached");
    CHECK(trace.rounds.empty());
    CHECK(trace.best_round == 0);
    CHECK(evaluator.calls == 1);
}

TEST_CASE("patience fires after two stale rounds and keeps the best checkpoint") {
    // Candidate totals per round: 60, 75, 73, 74 (one candidate per round).
    // A Mid-band origin keeps every round in patch mode.
    SequenceEvaluator evaluator(4500, {6000, 7500, 7300, 7400});
    llm::ModelClient client = patch_client();
    RepairConfig config;
    config.candidates_per_round = 1;
    RepairTrace trace = run_repair(low_page(), config, client, evaluator);
    CHECK(trace.termination_reason == "patience");
    CHECK(trace.rounds.size() == 4);
    CHECK(trace.best_round == 2);
    CHECK(trace.best_report.total.hundredths() == 7500);
    CHECK(trace.rounds[2].gate == "kept_current");
    CHECK(trace.rounds[3].gate == "kept_current");
}

TEST_CASE("budget exhaustion stops after eight rounds of small gains") {
    // +2 points per round from 20: never stale, never 97.
    std::vector<std::int64_t> totals;
    for (int i = 1; i <= 8; ++i) totals.push_back(2000 + 200 * i);
    SequenceEvaluator evaluator(2000, totals);
    llm::ModelClient client = rewrite_client();
    RepairConfig config;
    config.candidates_per_round = 1;
    RepairTrace trace = run_repair(low_page(), config, client, evaluator);
    CHECK(trace.termination_reason == "budget");
    CHECK(trace.rounds.size() == 8);
    CHECK(trace.best_round == 8);
    CHECK(trace.best_report.total.hundredths() == 3600);
}

TEST_CASE("the export is never worse than the input") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        std::uint64_t s = seed;
        std::int64_t origin = static_cast<std::int64_t>(mix(s) % 9000);
        HashEvaluator evaluator(seed, origin);
        llm::ModelClient client = rewrite_client();
        RepairTrace trace = run_repair(low_page("page-" + std::to_string(seed)), RepairConfig{},
                                       client, evaluator);
        CHECK(trace.best_report.total.hundredths() >= origin);
        CHECK(trace.rounds.size() <= 8);
        for (const auto& round : trace.rounds)
            CHECK(round.candidates.size() <= 2);
    }
}

TEST_CASE("every candidate that enters selection carries a fresh run id") {
    HashEvaluator evaluator(42, 2500);
    llm::ModelClient client = rewrite_client();
    RepairTrace trace = run_repair(low_page(), RepairConfig{}, client, evaluator);
    for (const auto& round : trace.rounds)
        for (const auto& cand : round.candidates)
            if (cand.usable) CHECK_FALSE(cand.run_id.empty());
}

TEST_CASE("failed generation keeps the current page and is recorded") {
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_failing_entry(llm::TemplateKey::repair, 0, "provider", 1 << 20, "");
    mock->add_failing_entry(llm::TemplateKey::repair, 1, "provider", 1 << 20, "");
    llm::ProviderConfig pc;
    pc.retry.max_attempts = 2;
    llm::ModelClient client(mock, pc, llm::virtual_clock(), true);
    HashEvaluator evaluator(7, 2500);
    RepairConfig config;
    config.max_rounds = 1;
    RepairTrace trace = run_repair(low_page(), config, client, evaluator);
    REQUIRE(trace.rounds.size() == 1);
    CHECK(trace.rounds[0].gate == "failed_generation");
    CHECK(trace.best_report.total.hundredths() == 2500);
}

TEST_CASE("unparseable page that never recovers is rejected") {
    // Static pass failed at entry; the mock yields patch JSON that fails
    // extraction, so no candidate is ever accepted.
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_default(llm::TemplateKey::repair, R"({"patches":[{"old_str":"a","new_str":"b"}]})");
    llm::ModelClient client(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);

    class StaticFailEvaluator final : public Evaluator {
    public:
        Evaluation evaluate(const HtmlArtifact& artifact) override {
            Evaluation e = spread_eval(0, artifact.id + "#e1");
            e.static_report.ok = false;
            e.static_report.malformed = true;
            return e;
        }
    } evaluator;

    RepairTrace trace = run_repair(low_page(), RepairConfig{}, client, evaluator);
    CHECK(trace.termination_reason == "rejected");
}

TEST_CASE("repair traces are deterministic under the scripted mock") {
    auto run_once = [] {
        HashEvaluator evaluator(11, 2500);
        llm::ModelClient client = rewrite_client();
        RepairTrace trace = run_repair(low_page(), RepairConfig{}, client, evaluator);
        std::string out;
        for (const auto& line : trace.to_log_lines()) out += line.dump() + "\n";
        return out;
    };
    CHECK(run_once() == run_once());
}

// ---------------------------------------------------------------------------
// Contrastive feedback
// ---------------------------------------------------------------------------

TEST_CASE("identical keyframes bypass the contrastive call") {
    auto mock = std::make_shared<llm::MockProvider>(); // would fail if called
    llm::ModelClient client(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);
    auto session = client.session("p");
    Evaluation before = spread_eval(5000, "r1");
    before.trace.keyframes = {{"h1", "first paint"}, {"h2", "final"}};
    Evaluation after = spread_eval(6000, "r2");
    after.trace.keyframes = {{"h1", "first paint"}, {"h2", "final"}};
    llm::ContrastiveRecord rec =
        contrastive_feedback(low_page(), before, after, session);
    CHECK(rec.improved.empty());
    CHECK(rec.regressed.empty());
    CHECK_FALSE(rec.degraded);
}

TEST_CASE("differing keyframes trigger the scripted comparison") {
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_default(
        llm::TemplateKey::contrastive,
        R"({"improved":["canvas now animates"],"regressed":[],"unchanged_issues":[],"priority_fix":"polish"})");
    llm::ModelClient client(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);
    auto session = client.session("p");
    Evaluation before = spread_eval(5000, "r1");
    before.trace.keyframes = {{"h1", "first paint"}};
    Evaluation after = spread_eval(6200, "r2");
    after.trace.keyframes = {{"h9", "first paint"}};
    llm::ContrastiveRecord rec = contrastive_feedback(low_page(), before, after, session);
    REQUIRE(rec.improved.size() == 1);
    CHECK(rec.priority_fix == "polish");
}

TEST_CASE("a malformed contrastive reply degrades the feedback") {
    auto mock = std::make_shared<llm::MockProvider>();
    mock->add_default(llm::TemplateKey::contrastive,
                      R"({"improved":[],"regressed":[],"unchanged_issues":[]})");
    llm::ModelClient client(mock, llm::ProviderConfig{}, llm::virtual_clock(), true);
    auto session = client.session("p");
    Evaluation before = spread_eval(5000, "r1");
    before.trace.keyframes = {{"h1", "first paint"}};
    Evaluation after = spread_eval(6200, "r2");
    after.trace.keyframes = {{"h2", "first paint"}};
    llm::ContrastiveRecord rec = contrastive_feedback(low_page(), before, after, session);
    CHECK(rec.degraded);
}
