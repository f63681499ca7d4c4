#include <doctest.h>

#include <cstdlib>

#include "htmlcure/model_client.hpp"

using namespace htmlcure;
using namespace htmlcure::llm;

TEST_CASE("template bodies expose the expected placeholders") {
    CHECK(get_template(TemplateKey::generation).required_placeholders.empty());
    const auto& analyst = get_template(TemplateKey::analyst).required_placeholders;
    CHECK(analyst.size() == 24);
    CHECK(analyst.count("query") == 1);
    CHECK(analyst.count("frame_annotations") == 1);
    const auto& scorer = get_template(TemplateKey::scorer).required_placeholders;
    CHECK(scorer.size() == 19);
    CHECK(scorer.count("observer_report_json") == 1);
    const auto& repair = get_template(TemplateKey::repair).required_placeholders;
    CHECK(repair.size() == 18);
    CHECK(repair.count("strategy_instruction") == 1);
    CHECK(repair.count("html") == 1);
    const auto& game = get_template(TemplateKey::game_repair).required_placeholders;
    CHECK(game.count("game_layer") == 1);
    CHECK(game.count("output_mode") == 1);
    const auto& contrastive = get_template(TemplateKey::contrastive).required_placeholders;
    CHECK(contrastive.count("pair_count") == 1);
    CHECK(contrastive.count("dim_deltas_str") == 1);
}

TEST_CASE("render splices placeholders and nothing else") {
    // Generation has no placeholders: empty bindings are fine and the body
    // passes through untouched.
    std::string generation = render(TemplateKey::generation, {});
    CHECK(generation == get_template(TemplateKey::generation).body);

    // Missing placeholder errors name the offender.
    std::map<std::string, std::string> partial = {{"score", "41"}};
    try {
        render(TemplateKey::visual_diagnosis, partial);
        FAIL("expected RenderError");
    } catch (const RenderError& e) {
        CHECK(e.missing_placeholder == "query");
    }

    // Golden splice: rendering equals a literal textual substitution.
    std::map<std::string, std::string> b;
    for (const auto& name : get_template(TemplateKey::repair).required_placeholders)
        b[name] = "<" + name + "-value>";
    std::string rendered = render(TemplateKey::repair, b);
    std::string expected = get_template(TemplateKey::repair).body;
    for (const auto& [name, value] : b) {
        std::string token = "{" + name + "}";
        std::size_t pos;
        while ((pos = expected.find(token)) != std::string::npos)
            expected.replace(pos, token.size(), value);
    }
    CHECK(rendered == expected);

    // Literal braces in the output contract survive rendering.
    CHECK(rendered.find("{\"patches\": [{\"old_str\"") != std::string::npos);
}

TEST_CASE("render is injective in the bindings") {
    std::map<std::string, std::string> a = {{"query", "build a clock"},
                                            {"score", "50"},
                                            {"visual_design", "10"},
                                            {"rendering", "8"}};
    std::map<std::string, std::string> b = a;
    b["query"] = "build a calendar";
    CHECK(render(TemplateKey::visual_diagnosis, a) != render(TemplateKey::visual_diagnosis, b));
}

TEST_CASE("mock provider: scripted responses, ordinals, and scopes") {
    auto mock = std::make_shared<MockProvider>();
    mock->add_entry(TemplateKey::scorer, 0, "first");
    mock->add_entry(TemplateKey::scorer, 1, "second");
    mock->add_default(TemplateKey::scorer, "fallback");
    mock->add_entry(TemplateKey::scorer, 0, "scoped", "page-9");

    ProviderRequest req;
    req.key = TemplateKey::scorer;
    req.ordinal = 0;
    req.scope = "page-1";
    CHECK(mock->complete(req).text == "first");
    req.ordinal = 1;
    CHECK(mock->complete(req).text == "second");
    req.ordinal = 7;
    CHECK(mock->complete(req).text == "fallback");
    req.scope = "page-9";
    req.ordinal = 0;
    CHECK(mock->complete(req).text == "scoped");

    req.key = TemplateKey::analyst;
    CHECK_THROWS_AS(mock->complete(req), ProviderError);
}

TEST_CASE("retries: two scripted failures then success") {
    auto mock = std::make_shared<MockProvider>();
    mock->add_failing_entry(TemplateKey::scorer, 0, "provider", 2, "recovered");
    ProviderConfig pc;
    pc.retry.max_attempts = 3;
    ModelClient client(mock, pc, virtual_clock(), true);
    auto session = client.session("p");
    CHECK(session.call(TemplateKey::scorer, "prompt") == "recovered");
    REQUIRE(session.log().size() == 1);
    CHECK(session.log()[0].attempts == 3); // retry count 2
    CHECK(session.log()[0].ok);
}

TEST_CASE("exhausted retries surface a provider error") {
    auto mock = std::make_shared<MockProvider>();
    mock->add_failing_entry(TemplateKey::scorer, 0, "timeout", 1 << 20, "never");
    ProviderConfig pc;
    pc.retry.max_attempts = 3;
    ModelClient client(mock, pc, virtual_clock(), true);
    auto session = client.session("p");
    CHECK_THROWS_AS(session.call(TemplateKey::scorer, "prompt"), ProviderError);
    REQUIRE(session.log().size() == 1);
    CHECK_FALSE(session.log()[0].ok);
    CHECK(session.log()[0].attempts == 3);
}

namespace {
class RefusalThenHtml final : public Provider {
public:
    const std::string& provider_name() const override {
        static const std::string n = "test";
        return n;
    }
    const std::string& model_name() const override {
        static const std::string n = "test";
        return n;
    }
    ProviderResponse complete(const ProviderRequest& request) override {
        prompts.push_back(request.prompt);
        if (prompts.size() == 1)
            return {"I cannot help with building a payment form.", std::nullopt};
        return {"<!DOCTYPE html><html><body>demo</body></html>", std::nullopt};
    }
    std::vector<std::string> prompts;
};
} // namespace

TEST_CASE("generation retries once with the safety suffix after a refusal") {
    auto provider = std::make_shared<RefusalThenHtml>();
    ModelClient client(provider, ProviderConfig{}, virtual_clock(), true);
    auto session = client.session("p");
    std::string out = session.call(TemplateKey::generation, "base prompt");
    CHECK(out.find("<!DOCTYPE html") != std::string::npos);
    REQUIRE(provider->prompts.size() == 2);
    CHECK(provider->prompts[0] == "base prompt");
    CHECK(provider->prompts[1].find(safety_retry_suffix()) != std::string::npos);
    REQUIRE(session.log().size() == 1);
    CHECK(session.log()[0].safety_retry);
}

TEST_CASE("auth tokens never leak into the audit log") {
    const char* token = "sk-very-secret-token-123";
    setenv("HTMLCURE_TEST_TOKEN", token, 1);
    auto mock = std::make_shared<MockProvider>();
    mock->add_default(TemplateKey::scorer, "ok");
    ProviderConfig pc;
    pc.auth_token_env = "HTMLCURE_TEST_TOKEN";
    ModelClient client(mock, pc, virtual_clock(), true);
    auto session = client.session("p");
    session.call(TemplateKey::scorer, "prompt");
    for (const auto& rec : session.log()) {
        std::string line = to_json(rec).dump();
        CHECK(line.find(token) == std::string::npos);
        CHECK(line.find("HTMLCURE_TEST_TOKEN") == std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// parse_structured
// ---------------------------------------------------------------------------

TEST_CASE("scorer parse enforces the dimension sum") {
    std::string good = R"({"rendering":{"score":8,"reason":"r"},
        "visual_design":{"score":16,"reason":"v"},
        "functionality":{"score":30,"reason":"f"},
        "interaction":{"score":5,"reason":"i"},
        "code_quality":{"score":4,"reason":"c"},
        "total_score":63,"bugs":[],"missing_features":[],
        "highlights":[],"improvement_hints":[],"summary":"s"})";
    ScorerRecord rec = parse_scorer(good);
    CHECK(rec.visual_design.score == 16);
    CHECK(rec.total_score == 63);

    std::string bad = good;
    bad.replace(bad.find("63"), 2, "90");
    CHECK_THROWS_AS(parse_scorer(bad), ParseError);
}

TEST_CASE("patches parse") {
    auto patches = parse_patches(R"({"patches":[{"old_str":"a","new_str":"b"}]})");
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].old_str == "a");
    CHECK(patches[0].new_str == "b");
    CHECK_THROWS_AS(parse_patches(R"({"patches":[]})"), ParseError);
    CHECK_THROWS_AS(parse_patches(R"({"patches":[{"old_str":"","new_str":"b"}]})"), ParseError);
    CHECK_THROWS_AS(parse_patches(R"({"nope":1})"), ParseError);
    // One fenced wrapper is tolerated.
    auto fenced = parse_patches("```json\n{\"patches\":[{\"old_str\":\"x\",\"new_str\":\"y\"}]}\n```");
    CHECK(fenced.size() == 1);
}

TEST_CASE("analyst parse: statuses and summary consistency") {
    json good;
    good["page_type"] = "app";
    good["visual_state"] = "ok";
    good["visual_elements"] = json::array();
    good["template_like_signals"] = json::array();
    good["distinctive_design_signals"] = json::array();
    good["design_specificity"] = "low";
    good["working"] = json::array();
    good["broken"] = json::array();
    good["interaction_quality"] = "ok";
    good["layout_notes"] = "ok";
    good["requirements"] = json::array(
        {json{{"requirement", "a"}, {"status", "done"}, {"evidence", "e"}},
         json{{"requirement", "b"}, {"status", "missing"}, {"evidence", "e"}}});
    good["summary"] = {{"total", 2}, {"done", 1}, {"broken", 0}, {"missing", 1}};
    CHECK(parse_analyst(good.dump()).requirements.size() == 2);

    json bad_status = good;
    bad_status["requirements"][0]["status"] = "partial";
    bad_status["summary"] = {{"total", 2}, {"done", 0}, {"broken", 0}, {"missing", 1}};
    CHECK_THROWS_AS(parse_analyst(bad_status.dump()), ParseError);

    json bad_counts = good;
    bad_counts["summary"]["total"] = 3;
    CHECK_THROWS_AS(parse_analyst(bad_counts.dump()), ParseError);
}

TEST_CASE("contrastive parse requires priority_fix") {
    std::string good =
        R"({"improved":["a"],"regressed":[],"unchanged_issues":[],"priority_fix":"fix x"})";
    CHECK(parse_contrastive(good).priority_fix == "fix x");
    std::string missing = R"({"improved":[],"regressed":[],"unchanged_issues":[]})";
    CHECK_THROWS_AS(parse_contrastive(missing), ParseError);
}

TEST_CASE("visual diagnosis and verification parse") {
    auto diag = parse_visual_diagnosis(
        R"({"issues":["flat palette"],"suggestions":["add depth"],"css_focus_areas":["buttons"]})");
    CHECK(diag.issues.size() == 1);
    auto verif = parse_visual_verification(
        R"({"improved":true,"functional_regression":false,"improvements":["contrast"],"regressions":[]})");
    CHECK(verif.improved);
    CHECK_FALSE(verif.functional_regression);
}

// ---------------------------------------------------------------------------
// extract_html
// ---------------------------------------------------------------------------

TEST_CASE("extract_html unwraps one fence") {
    std::string raw = "```html\n<!DOCTYPE html><html><body>x</body></html>\n```";
    ExtractedHtml out = extract_html(raw);
    CHECK(out.html.rfind("<!DOCTYPE html", 0) == 0);
    CHECK_FALSE(out.leading_prose_stripped);
}

TEST_CASE("extract_html drops and flags leading prose") {
    ExtractedHtml out = extract_html("Sure! Here is the page: <html><body>x</body></html>");
    CHECK(out.leading_prose_stripped);
    CHECK(out.html.rfind("<html>", 0) == 0);
}

TEST_CASE("extract_html rejects empty, truncated, and non-HTML outputs") {
    CHECK_THROWS_AS(extract_html(""), ParseError);
    CHECK_THROWS_AS(extract_html("just words, no document"), ParseError);
    try {
        extract_html("<!DOCTYPE html><html><body>never closed");
        FAIL("expected truncation error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("the optional agent phase renders the tester prompt") {
    std::string prompt = render_interaction_tester_prompt(
        "http://localhost:9999/page", "Build a puzzle game.", "Arrow keys move the piece.");
    CHECK(prompt.find("http://localhost:9999/page") != std::string::npos);
    CHECK(prompt.find("Build a puzzle game.") != std::string::npos);
    CHECK(prompt.find("Arrow keys move the piece.") != std::string::npos);
    CHECK(prompt.find("{page_url}") == std::string::npos);
}

TEST_CASE("provider config parsing") {
    json j;
    j["endpoint"] = "http://localhost:9000/v1/chat/completions";
    j["model"] = "judge-1";
    j["temperature"] = 0.0;
    j["retry"] = {{"max_attempts", 5}, {"backoff_ms", 50}};
    ProviderConfig pc = provider_config_from_json(j);
    CHECK(pc.model == "judge-1");
    CHECK(pc.retry.max_attempts == 5);
    CHECK(pc.max_output_tokens == 30000);
    CHECK(pc.max_in_flight == 4);
    j["retry"]["max_attempts"] = 0;
    CHECK_THROWS_AS(provider_config_from_json(j), ConfigError);
}
