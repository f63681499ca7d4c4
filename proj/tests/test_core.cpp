#include <doctest.h>

#include "htmlcure/core.hpp"
#include "htmlcure/sha256.hpp"

using namespace htmlcure;

namespace {
std::uint64_t mix(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
} // namespace

TEST_CASE("points fixed-point arithmetic and formatting") {
    Points a = Points::from_hundredths(4125);
    CHECK(a.value() == doctest::Approx(41.25));
    CHECK(a.str() == "41.25");
    CHECK(Points::from_hundredths(6250).str() == "62.5");
    CHECK(Points::from_hundredths(1000).str() == "10");
    CHECK(Points::from_hundredths(-150).str() == "-1.5");
    CHECK(Points::from_double(41.25).hundredths() == 4125);
    CHECK((a + Points::from_hundredths(75)).hundredths() == 4200);
    CHECK(a > Points::from_hundredths(4124));
}

TEST_CASE("rational exact arithmetic and decimal parsing") {
    Rational r = Rational::from_decimal("0.5");
    CHECK(r.num() == 1);
    CHECK(r.den() == 2);
    CHECK(Rational::from_decimal("-2").num() == -2);
    CHECK(Rational::from_decimal("1e-3") == Rational(1, 1000));
    CHECK(Rational::from_decimal("1.25e2") == Rational(125, 1));
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
    CHECK(Rational(3, 4) * Rational::integer(55) == Rational(165, 4));
    CHECK((Rational(165, 4)).round_to_points().hundredths() == 4125);
    CHECK(Rational(1, 3) < Rational(1, 2));
    CHECK_THROWS_AS(Rational::from_decimal("abc"), DomainError);
    CHECK_THROWS_AS(Rational::from_decimal(""), DomainError);
    CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);
}

TEST_CASE("classify_state bands") {
    CHECK(classify_state(Points::from_hundredths(3500)).band == Band::low);
    CHECK(classify_state(Points::from_hundredths(4000)).band == Band::mid);
    CHECK(classify_state(Points::from_hundredths(8000)).band == Band::high);
    CHECK(classify_state(Points::from_hundredths(7999)).band == Band::mid);
    CHECK(classify_state(Points::from_hundredths(0)).band == Band::low);
    CHECK(classify_state(Points::from_hundredths(10000)).band == Band::high);
    CHECK(classify_state(Points::from_hundredths(3500)).score.hundredths() == 3500);
    CHECK_THROWS_AS(classify_state(Points::from_hundredths(-1)), DomainError);
    CHECK_THROWS_AS(classify_state(Points::from_hundredths(10001)), DomainError);
}

TEST_CASE("classify_state is monotone") {
    std::uint64_t seed = 7;
    for (int i = 0; i < 2000; ++i) {
        std::int64_t a = static_cast<std::int64_t>(mix(seed) % 10001);
        std::int64_t b = static_cast<std::int64_t>(mix(seed) % 10001);
        if (a > b) std::swap(a, b);
        Band ba = classify_state(Points::from_hundredths(a)).band;
        Band bb = classify_state(Points::from_hundredths(b)).band;
        CHECK(static_cast<int>(ba) <= static_cast<int>(bb));
    }
}

TEST_CASE("score vector budgets per profile") {
    ScoreVector s;
    s.profile = Profile::interactive;
    s.rendering = Points::from_hundredths(1000);
    s.visual_design = Points::from_hundredths(2000);
    s.functionality = Points::from_hundredths(5500);
    s.interactivity = Points::from_hundredths(1000);
    s.code_quality = Points::from_hundredths(500);
    CHECK_NOTHROW(s.check());
    CHECK(s.total().hundredths() == 10000);

    ScoreVector n = s;
    n.profile = Profile::noninteractive;
    n.functionality = Points::from_hundredths(6500);
    n.interactivity = kZeroPoints;
    CHECK_NOTHROW(n.check());
    CHECK(n.total().hundredths() == 10000);

    // Interactivity has no budget in the noninteractive profile.
    n.interactivity = Points::from_hundredths(1);
    CHECK_THROWS_AS(n.check(), DomainError);
    s.functionality = Points::from_hundredths(5501);
    CHECK_THROWS_AS(s.check(), DomainError);
    s.functionality = Points::from_hundredths(-1);
    CHECK_THROWS_AS(s.check(), DomainError);
}

TEST_CASE("total is the exact component sum") {
    std::uint64_t seed = 11;
    for (int i = 0; i < 500; ++i) {
        ScoreVector s;
        s.profile = Profile::interactive;
        s.rendering = Points::from_hundredths(static_cast<std::int64_t>(mix(seed) % 1001));
        s.visual_design = Points::from_hundredths(static_cast<std::int64_t>(mix(seed) % 2001));
        s.functionality = Points::from_hundredths(static_cast<std::int64_t>(mix(seed) % 5501));
        s.interactivity = Points::from_hundredths(static_cast<std::int64_t>(mix(seed) % 1001));
        s.code_quality = Points::from_hundredths(static_cast<std::int64_t>(mix(seed) % 501));
        std::int64_t manual = s.rendering.hundredths() + s.visual_design.hundredths() +
                              s.functionality.hundredths() + s.interactivity.hundredths() +
                              s.code_quality.hundredths();
        CHECK(s.total().hundredths() == manual);
    }
}

TEST_CASE("artifact invariants") {
    HtmlArtifact a;
    a.id = "x";
    a.html = "<html><body>hello</body></html>";
    a.prompt = "p";
    CHECK_NOTHROW(a.check());
    a.html = "plain words";
    CHECK_THROWS_AS(a.check(), DomainError);
    a.html = "";
    CHECK_THROWS_AS(a.check(), DomainError);
    CHECK_THROWS_AS(Provenance::repaired(0), DomainError);
    CHECK_THROWS_AS(Provenance::repaired(9), DomainError);
    CHECK(Provenance::repaired(8).round == 8);
}

TEST_CASE("core types round-trip through the line format") {
    HtmlArtifact a;
    a.id = "page-7";
    a.html = "<html><body><button id=\"b\">Go</button></body></html>";
    a.prompt = "make a page\nwith two lines";
    a.family = Family::games_simulations;
    a.interactive = true;
    a.provenance = Provenance::repaired(3);
    HtmlArtifact a2 = artifact_from_json(parse_line(to_line(to_json(a))));
    CHECK(a2.id == a.id);
    CHECK(a2.html == a.html);
    CHECK(a2.prompt == a.prompt);
    CHECK(a2.family == a.family);
    CHECK(a2.interactive == a.interactive);
    CHECK(a2.provenance == a.provenance);

    ScoreVector s;
    s.profile = Profile::noninteractive;
    s.rendering = Points::from_hundredths(850);
    s.visual_design = Points::from_hundredths(1375);
    s.functionality = Points::from_hundredths(6500);
    s.code_quality = Points::from_hundredths(425);
    CHECK(score_vector_from_json(parse_line(to_line(to_json(s)))) == s);

    ExperienceTrace t;
    t.artifact_id = "page-7";
    t.layers_run = {1, 2, 4};
    t.keyframes = {{"abc123", "first paint @ 1280x800"}};
    t.coverage_meta = {{"steps_total", 9}, {"controls_probed", 2}};
    EvidenceRecord r;
    r.step_index = 1;
    r.action = "load";
    r.visual.frame_hash = "abc123";
    r.visual.viewport = {1280, 800};
    r.behavioral.dom_digest = "dd";
    r.behavioral.probe_outcomes = {{"load", ProbeOutcome::pass}};
    t.records.push_back(r);
    EvidenceRecord r2 = r;
    r2.step_index = 2;
    r2.action = "probe:click #b";
    r2.visual.frame_delta = 0.25;
    r2.behavioral.latency_ms = 16;
    r2.behavioral.console_errors = {"boom"};
    r2.behavioral.probe_outcomes = {{"control:#b", ProbeOutcome::fail}};
    t.records.push_back(r2);
    ExperienceTrace t2 = trace_from_json(parse_line(to_line(to_json(t))));
    CHECK(t2 == t);
}

TEST_CASE("sha256 known vectors") {
    CHECK(Sha256::hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::hex("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}
