#include <doctest.h>

#include "htmlcure/executor.hpp"
#include "htmlcure/fixtures.hpp"
#include "htmlcure/synthetic_backend.hpp"

using namespace htmlcure;
using namespace htmlcure::exec;

namespace {

HtmlArtifact artifact_for(const std::string& id) {
    for (const auto& p : fixtures::corpus_pages())
        if (p.id == id) return p;
    throw std::runtime_error("no corpus page " + id);
}

bench::TestCase tc_for(const std::string& item_id, const std::string& tc_id) {
    for (const auto& item : fixtures::corpus_items())
        if (item.id == item_id)
            for (const auto& tc : item.test_cases)
                if (tc.tc_id == tc_id) return tc;
    throw std::runtime_error("no tc " + tc_id);
}

HtmlArtifact blank_page() {
    HtmlArtifact a;
    a.id = "blank";
    a.html = "<html></html>";
    a.prompt = "blank";
    return a;
}

} // namespace

TEST_CASE("protocol records are ordered 1..T with no gaps") {
    SyntheticBackend backend;
    ProtocolConfig config;
    ExperienceTrace trace = run_protocol(artifact_for("p01-counter"), config, backend);
    REQUIRE(!trace.records.empty());
    for (std::size_t i = 0; i < trace.records.size(); ++i)
        CHECK(trace.records[i].step_index == static_cast<int>(i) + 1);
}

TEST_CASE("protocol is bit-reproducible on the synthetic backend") {
    SyntheticBackend backend;
    ProtocolConfig config;
    for (const char* id : {"p01-counter", "p03-game", "p05-static-article"}) {
        ExperienceTrace a = run_protocol(artifact_for(id), config, backend);
        ExperienceTrace b = run_protocol(artifact_for(id), config, backend);
        CHECK(to_json(a).dump() == to_json(b).dump());
    }
}

TEST_CASE("layer 3 is conditional on the trigger") {
    SyntheticBackend backend;
    ProtocolConfig config;

    // Static article: no canvas, no responsive controls, not interactive.
    ExperienceTrace article = run_protocol(artifact_for("p05-static-article"), config, backend);
    CHECK(article.layers_run == std::vector<int>{1, 2, 4});

    // Canvas game with animation activity.
    ExperienceTrace game = run_protocol(artifact_for("p03-game"), config, backend);
    CHECK(game.layers_run == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("blank page renders nothing and never changes") {
    SyntheticBackend backend;
    ProtocolConfig config;
    ExperienceTrace trace = run_protocol(blank_page(), config, backend);
    for (const auto& rec : trace.records)
        if (rec.visual.frame_delta) CHECK(*rec.visual.frame_delta == 0.0);
}

TEST_CASE("frame delta appears only after a previous frame at the same viewport") {
    SyntheticBackend backend;
    ProtocolConfig config;
    ExperienceTrace trace = run_protocol(artifact_for("p01-counter"), config, backend);
    std::map<std::string, int> seen;
    for (const auto& rec : trace.records) {
        std::string vp = rec.visual.viewport.str();
        if (seen[vp] == 0) CHECK(!rec.visual.frame_delta.has_value());
        else CHECK(rec.visual.frame_delta.has_value());
        ++seen[vp];
    }
}

TEST_CASE("load failure produces a terminal record, not a fault") {
    SyntheticBackend backend;
    ProtocolConfig config;
    HtmlArtifact broken;
    broken.id = "no-doc";
    broken.html = "  "; // parses to nothing
    broken.prompt = "x";
    ExperienceTrace trace = run_protocol(broken, config, backend);
    CHECK(trace.load_failed);
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.records[0].behavioral.probe_outcomes.size() == 1);
    CHECK(trace.records[0].behavioral.probe_outcomes[0].second == ProbeOutcome::fail);
    CHECK(trace.layers_run == std::vector<int>{1});
}

TEST_CASE("total budget truncates execution with slack") {
    SyntheticBackend backend;
    ProtocolConfig config;
    config.total_budget_ms = 100; // tiny
    ExperienceTrace trace = run_protocol(artifact_for("p03-game"), config, backend);
    CHECK(trace.coverage_meta.at("elapsed_ms") <= config.total_budget_ms + config.step_timeout_ms);
    ProtocolConfig full;
    ExperienceTrace full_trace = run_protocol(artifact_for("p03-game"), full, backend);
    CHECK(trace.records.size() < full_trace.records.size());
}

TEST_CASE("missing click target fails the test case") {
    SyntheticBackend backend;
    bench::TestCase tc;
    tc.tc_id = "missing";
    tc.weight = Rational::integer(1);
    bench::Step click;
    click.kind = bench::StepKind::click;
    click.target = "#start"; // absent from the counter page
    tc.steps = {click};
    TcResult result = run_test_case(artifact_for("p01-counter"), tc, backend);
    CHECK_FALSE(result.passed);
    REQUIRE(result.step_outcomes.size() == 1);
    CHECK(result.step_outcomes[0].outcome == ProbeOutcome::fail);
    CHECK(result.step_outcomes[0].detail.find("target not found") != std::string::npos);
}

TEST_CASE("screenshot change check: live handler passes, inert button fails") {
    SyntheticBackend backend;
    TcResult live = run_test_case(artifact_for("p01-counter"), tc_for("p01-counter", "p01-tc01"),
                                  backend);
    CHECK(live.passed);

    TcResult inert =
        run_test_case(artifact_for("p02-inert"), tc_for("p02-inert", "p02-tc00"), backend);
    CHECK_FALSE(inert.passed);
    bool saw_identical = false;
    for (const auto& s : inert.step_outcomes)
        if (s.detail.find("identical") != std::string::npos) saw_identical = true;
    CHECK(saw_identical);
}

TEST_CASE("assertions read the live page state") {
    SyntheticBackend backend;
    CHECK(run_test_case(artifact_for("p01-counter"), tc_for("p01-counter", "p01-tc00"), backend)
              .passed);
    CHECK(run_test_case(artifact_for("p03-game"), tc_for("p03-game", "p03-tc00"), backend)
              .passed);
    CHECK(run_test_case(artifact_for("p03-game"), tc_for("p03-game", "p03-tc02"), backend)
              .passed);
    CHECK(run_test_case(artifact_for("p11-form"), tc_for("p11-form", "p11-tc00"), backend)
              .passed);
    // Dead keyboard: the assertion sees unmoved state.
    CHECK_FALSE(run_test_case(artifact_for("p04-broken-game"),
                              tc_for("p04-broken-game", "p04-tc00"), backend)
                    .passed);
}

TEST_CASE("slow handler times out but execution continues") {
    SyntheticBackend backend;
    TcResult result =
        run_test_case(artifact_for("p12-slow"), tc_for("p12-slow", "p12-tc00"), backend);
    CHECK_FALSE(result.passed);
    CHECK(result.step_outcomes[0].outcome == ProbeOutcome::timeout);
    CHECK(result.step_outcomes.size() == 2); // the assert still ran
}

TEST_CASE("malformed step arguments fail before any browser action") {
    SyntheticBackend backend;
    bench::TestCase tc;
    tc.tc_id = "bad";
    tc.weight = Rational::integer(1);
    bench::Step resize;
    resize.kind = bench::StepKind::resize;
    resize.width = 0;
    resize.height = 667;
    tc.steps = {resize};
    CHECK_THROWS_AS(run_test_case(artifact_for("p01-counter"), tc, backend), ValidationError);
}

TEST_CASE("test case runs are bit-reproducible") {
    SyntheticBackend backend;
    for (const auto& item : fixtures::corpus_items())
        for (const auto& tc : item.test_cases) {
            HtmlArtifact page = artifact_for(item.id);
            TcResult a = run_test_case(page, tc, backend);
            TcResult b = run_test_case(page, tc, backend);
            CHECK(tc_result_to_json(a).dump() == tc_result_to_json(b).dump());
        }
}

// ---------------------------------------------------------------------------
// Keyframe curation
// ---------------------------------------------------------------------------

namespace {

RawFrame raw(int step, Viewport vp, const std::string& hash, std::optional<double> delta,
             bool first = false, bool final_state = false, bool after = false, int before = -1) {
    RawFrame f;
    f.step_index = step;
    f.viewport = vp;
    f.hash = hash;
    f.delta = delta;
    f.event_context = "ctx" + std::to_string(step);
    f.first_paint = first;
    f.final_state = final_state;
    f.interaction_after = after;
    f.pair_before_index = before;
    return f;
}

} // namespace

TEST_CASE("curation: zero interactions keeps first paint and final per viewport") {
    Viewport d{1280, 800}, m{375, 667};
    std::vector<RawFrame> frames = {
        raw(1, d, "a", {}, true),
        raw(2, m, "b", {}, true),
        raw(3, d, "a", 0.0, false, true),
        raw(4, m, "b", 0.0, false, true),
    };
    auto kfs = curate_keyframes(frames, 8);
    REQUIRE(kfs.size() == 4);
    CHECK(kfs[0].frame_hash == "a");
    CHECK(kfs[1].frame_hash == "b");
}

TEST_CASE("curation: one state-changing click with budget 8 gives six frames") {
    Viewport d{1280, 800}, m{375, 667};
    std::vector<RawFrame> frames = {
        raw(1, d, "fp1", {}, true),
        raw(2, m, "fp2", {}, true),
        raw(3, d, "before", 0.0),
        raw(4, d, "after", 0.4, false, false, true, 3),
        raw(5, d, "fin1", 0.0, false, true),
        raw(6, m, "fin2", 0.0, false, true),
    };
    auto kfs = curate_keyframes(frames, 8);
    REQUIRE(kfs.size() == 6);
    // Ordered by step index.
    CHECK(kfs[2].frame_hash == "before");
    CHECK(kfs[3].frame_hash == "after");
}

TEST_CASE("curation: budget 2 keeps exactly the first-paint frames") {
    Viewport d{1280, 800}, m{375, 667};
    std::vector<RawFrame> frames = {
        raw(1, d, "fp1", {}, true),
        raw(2, m, "fp2", {}, true),
        raw(3, d, "before", 0.0),
        raw(4, d, "after", 0.9, false, false, true, 3),
        raw(5, d, "fin1", 0.0, false, true),
    };
    auto kfs = curate_keyframes(frames, 2);
    REQUIRE(kfs.size() == 2);
    CHECK(kfs[0].frame_hash == "fp1");
    CHECK(kfs[1].frame_hash == "fp2");
}

TEST_CASE("protocol keyframes respect the budget and include first paint") {
    SyntheticBackend backend;
    ProtocolConfig config;
    config.keyframe_budget = 4;
    ExperienceTrace trace = run_protocol(artifact_for("p03-game"), config, backend);
    CHECK(trace.keyframes.size() <= 4);
    REQUIRE(!trace.keyframes.empty());
    CHECK(trace.keyframes[0].annotation.find("first paint") != std::string::npos);
}

TEST_CASE("config validation") {
    ProtocolConfig config;
    config.viewports.clear();
    CHECK_THROWS_AS(config.check(), DomainError);
    config = ProtocolConfig{};
    config.keyframe_budget = 1;
    CHECK_THROWS_AS(config.check(), DomainError);
}
