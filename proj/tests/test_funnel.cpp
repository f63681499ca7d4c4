#include <doctest.h>

#include <set>

#include "htmlcure/fixtures.hpp"
#include "htmlcure/funnel.hpp"

using namespace htmlcure;
using namespace htmlcure::funnel;

namespace {

TraceSummary summary(const std::string& id, Family family, std::int64_t origin_h,
                     std::int64_t best_h, bool fresh = true, std::string html = "") {
    TraceSummary s;
    s.artifact_id = id;
    s.family = family;
    s.origin_total = Points::from_hundredths(origin_h);
    s.best_total = Points::from_hundredths(best_h);
    s.best_round = best_h > origin_h ? 2 : 0;
    s.rounds = 3;
    s.final_run_fresh = fresh;
    s.termination_reason = "patience";
    s.html = std::move(html);
    return s;
}

std::string long_doc(const std::string& seed_text) {
    std::string html = "<html><body>";
    for (int i = 0; i < 30; ++i)
        html += "<p>" + seed_text + " paragraph " + std::to_string(i) + "</p>";
    html += "</body></html>";
    return html;
}

PolicyRow prow(Band band, const std::string& strategy, double delta, std::int64_t count = 1) {
    PolicyRow row;
    row.band = band;
    row.strategy = strategy;
    row.delta = Points::from_double(delta);
    row.count = count;
    return row;
}

} // namespace

// ---------------------------------------------------------------------------
// Gate
// ---------------------------------------------------------------------------

TEST_CASE("gate: clear export, partial, and reject channels") {
    Gatekeeper keeper;
    GateDecision exported =
        keeper.gate(summary("a", Family::apps_tools, 3500, 9200, true, long_doc("alpha")));
    CHECK(exported.decision == Decision::export_page);
    CHECK(exported.final_band == Band::high);

    GateDecision partial = keeper.gate(summary("b", Family::apps_tools, 3500, 6800));
    CHECK(partial.decision == Decision::partial);

    GateDecision unimproved = keeper.gate(summary("c", Family::apps_tools, 5000, 5000));
    CHECK(unimproved.decision == Decision::reject);

    // Above threshold but the final run is stale: improved -> partial.
    GateDecision stale = keeper.gate(summary("d", Family::apps_tools, 3500, 9200, false));
    CHECK(stale.decision == Decision::partial);
    CHECK(stale.reason.find("fresh") != std::string::npos);
}

TEST_CASE("gate: high-origin redundancy channels") {
    Gatekeeper keeper;
    // Preserved High page with no delta adds nothing over the filter baseline.
    GateDecision preserved = keeper.gate(summary("h1", Family::apps_tools, 8800, 8800));
    CHECK(preserved.decision == Decision::reject);
    CHECK(preserved.final_band == Band::high);
    CHECK(preserved.reason.find("insufficient") != std::string::npos);

    // High origin with a real gain exports.
    GateDecision improved = keeper.gate(
        summary("h2", Family::apps_tools, 8200, 9100, true, long_doc("bravo")));
    CHECK(improved.decision == Decision::export_page);

    // A near-duplicate of an accepted export is rejected even when High.
    GateDecision duplicate = keeper.gate(
        summary("h3", Family::apps_tools, 8200, 9100, true, long_doc("bravo")));
    CHECK(duplicate.decision == Decision::reject);
    CHECK(duplicate.reason.find("duplicate") != std::string::npos);
}

TEST_CASE("shingle similarity separates near-duplicates from distinct pages") {
    auto a = shingle_set(long_doc("alpha"));
    auto near = shingle_set(long_doc("alpha") + "<footer>tail</footer>");
    std::string far_doc = "<html><body><h1>Weather almanac</h1>";
    for (int i = 0; i < 30; ++i)
        far_doc += "<section>Rainfall tables for month " + std::to_string(i * 37) +
                   " with humidity and wind readings.</section>";
    far_doc += "</body></html>";
    auto far = shingle_set(far_doc);
    CHECK(jaccard(a, a) == 1.0);
    CHECK(jaccard(a, near) >= 0.9);
    CHECK(jaccard(a, far) < 0.5);
}

// ---------------------------------------------------------------------------
// Reports over the released aggregate tables
// ---------------------------------------------------------------------------

TEST_CASE("funnel report reproduces the released pool accounting") {
    FunnelReport report = funnel_report(fixtures::aggregate_funnel_rows());
    CHECK(report.band(Band::low).traces == 15686);
    CHECK(report.band(Band::low).reject == 5);
    CHECK(report.band(Band::low).partial == 7205);
    CHECK(report.band(Band::low).exported == 8476);
    CHECK(report.band(Band::low).partial_pct == 45.9);
    CHECK(report.band(Band::low).export_pct == 54.0);
    CHECK(report.band(Band::low).reject_pct == 0.0);
    CHECK(report.band(Band::low).pool_share_pct == 13.3);

    CHECK(report.band(Band::mid).traces == 62012);
    CHECK(report.band(Band::mid).exported == 50881);
    CHECK(report.band(Band::mid).partial == 11121);
    CHECK(report.band(Band::mid).partial_pct == 17.9);
    CHECK(report.band(Band::mid).export_pct == 82.1);
    CHECK(report.band(Band::mid).pool_share_pct == 79.9);

    CHECK(report.band(Band::high).traces == 13786);
    CHECK(report.band(Band::high).reject == 9440);
    CHECK(report.band(Band::high).reject_pct == 68.5);
    CHECK(report.band(Band::high).exported == 4346);
    CHECK(report.band(Band::high).export_pct == 31.5);
    CHECK(report.band(Band::high).partial == 0);
    CHECK(report.band(Band::high).pool_share_pct == 6.8);

    CHECK(report.pool == 63703);
    CHECK(report.total_traces == 91484);
}

TEST_CASE("degenerate funnel inputs") {
    CHECK(funnel_report({}).pool == 0);
    CHECK(funnel_report({}).total_traces == 0);

    FunnelRow one;
    one.orig_band = Band::low;
    one.final_band = Band::high;
    one.decision = Decision::export_page;
    one.count = 1;
    FunnelReport single = funnel_report({one});
    CHECK(single.band(Band::low).traces == 1);
    CHECK(single.band(Band::low).exported == 1);
    CHECK(single.band(Band::low).reject == 0);
    CHECK(single.band(Band::low).partial == 0);
    CHECK(single.band(Band::low).pool_share_pct == 100.0);
}

TEST_CASE("transition matrix reproduces the released band accounting") {
    TransitionMatrix m = transition_report(fixtures::aggregate_funnel_rows());
    CHECK(m.cell(Band::low, Band::low) == 278);
    CHECK(m.cell(Band::low, Band::mid) == 6932);
    CHECK(m.cell(Band::low, Band::high) == 8476);
    CHECK(m.row_pct(Band::low, Band::low) == 1.8);
    CHECK(m.row_pct(Band::low, Band::mid) == 44.2);
    CHECK(m.row_pct(Band::low, Band::high) == 54.0);
    CHECK(m.cell(Band::mid, Band::mid) == 11129);
    CHECK(m.cell(Band::mid, Band::high) == 50883);
    CHECK(m.row_pct(Band::mid, Band::high) == 82.1);
    CHECK(m.cell(Band::high, Band::high) == 13786);
    CHECK(m.row_pct(Band::high, Band::high) == 100.0);
    CHECK(m.cell(Band::high, Band::low) == 0);
}

TEST_CASE("transition matrix degenerate cases") {
    FunnelRow unchanged;
    unchanged.orig_band = Band::mid;
    unchanged.final_band = Band::mid;
    unchanged.decision = Decision::partial;
    unchanged.count = 7;
    TransitionMatrix m = transition_report({unchanged});
    CHECK(m.row_pct(Band::mid, Band::mid) == 100.0);
    CHECK(m.row_total(Band::low) == 0);

    FunnelRow low_to_mid;
    low_to_mid.orig_band = Band::low;
    low_to_mid.final_band = Band::mid; // a Low page ending at 45
    low_to_mid.decision = Decision::partial;
    low_to_mid.count = 1;
    TransitionMatrix one = transition_report({low_to_mid});
    CHECK(one.row_pct(Band::low, Band::mid) == 100.0);
    CHECK(one.cell(Band::low, Band::mid) == 1);
}

TEST_CASE("transition restricted to exports is dominated elementwise") {
    auto rows = fixtures::aggregate_funnel_rows();
    std::vector<FunnelRow> exports_only;
    for (const auto& row : rows)
        if (row.decision == Decision::export_page) exports_only.push_back(row);
    TransitionMatrix full = transition_report(rows);
    TransitionMatrix restricted = transition_report(exports_only);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(restricted.cell(static_cast<Band>(r), static_cast<Band>(c)) <=
                  full.cell(static_cast<Band>(r), static_cast<Band>(c)));
}

TEST_CASE("policy report reproduces the released strategy table") {
    auto stats = policy_report(fixtures::aggregate_policy_rows());
    auto find = [&](Band band, const std::string& strategy) -> const PolicyStats& {
        for (const auto& s : stats)
            if (s.band == band && s.strategy == strategy) return s;
        throw std::runtime_error("missing policy row " + strategy);
    };
    const auto& low_rewrite = find(Band::low, "HolisticRewrite");
    CHECK(low_rewrite.n == 35822);
    CHECK(low_rewrite.mean_delta == 14.2);
    CHECK(low_rewrite.success_pct == 90.0);
    CHECK(low_rewrite.catastrophe_pct == 0.6);

    const auto& mid_fix = find(Band::mid, "InteractionTargetedFix");
    CHECK(mid_fix.n == 324880);
    CHECK(mid_fix.mean_delta == 11.3);
    CHECK(mid_fix.success_pct == 95.4);
    CHECK(mid_fix.catastrophe_pct == 0.1);

    const auto& mid_rewrite = find(Band::mid, "Rewrite");
    CHECK(mid_rewrite.mean_delta == 8.3);
    CHECK(mid_rewrite.catastrophe_pct == 0.4);

    const auto& high_fix = find(Band::high, "FunctionalityRefine");
    CHECK(high_fix.n == 232128);
    CHECK(high_fix.mean_delta == -0.2);
    CHECK(high_fix.success_pct == 0.0);
    CHECK(high_fix.catastrophe_pct == 0.0);

    const auto& high_rewrite = find(Band::high, "Rewrite");
    CHECK(high_rewrite.mean_delta == -2.7);
    CHECK(high_rewrite.catastrophe_pct == 17.0);
}

TEST_CASE("policy report hand-checked aggregates") {
    std::vector<PolicyRow> zeros = {prow(Band::mid, "BugFix", 0.0, 50)};
    auto z = policy_report(zeros);
    REQUIRE(z.size() == 1);
    CHECK(z[0].mean_delta == 0.0);
    CHECK(z[0].success_pct == 0.0);
    CHECK(z[0].catastrophe_pct == 0.0);

    std::vector<PolicyRow> mixed = {prow(Band::mid, "BugFix", 6.0), prow(Band::mid, "BugFix", -11.0),
                                    prow(Band::mid, "BugFix", 0.0)};
    auto m = policy_report(mixed);
    REQUIRE(m.size() == 1);
    CHECK(m[0].n == 3);
    CHECK(m[0].mean_delta == -1.7); // -5/3 to one decimal
    CHECK(m[0].success_pct == 33.3);
    CHECK(m[0].catastrophe_pct == 33.3);
}

TEST_CASE("every decision lands in exactly one funnel cell") {
    std::vector<GateDecision> decisions;
    Gatekeeper keeper;
    std::uint64_t count = 0;
    for (int origin : {2000, 5000, 8500})
        for (int best : {2000, 5000, 6800, 8500, 9300}) {
            if (best < origin) continue;
            decisions.push_back(keeper.gate(summary("p" + std::to_string(count++),
                                                    Family::games_simulations, origin, best)));
        }
    auto rows = funnel_rows_from_decisions(decisions);
    std::int64_t total = 0;
    for (const auto& row : rows) total += row.count;
    CHECK(total == static_cast<std::int64_t>(decisions.size()));
    FunnelReport report = funnel_report(rows);
    CHECK(report.total_traces == total);
    for (int b = 0; b < 3; ++b) {
        const BandFunnel& band = report.bands[b];
        CHECK(band.traces == band.reject + band.partial + band.exported);
    }
}

// ---------------------------------------------------------------------------
// Export manifest
// ---------------------------------------------------------------------------

namespace {

std::vector<GateDecision> synthetic_pool() {
    std::vector<GateDecision> decisions;
    int id = 0;
    auto add = [&](Family family, int count) {
        for (int i = 0; i < count; ++i) {
            GateDecision d;
            d.artifact_id = "e" + std::to_string(10000 + id++);
            d.family = family;
            d.original_band = Band::mid;
            d.final_band = Band::high;
            d.decision = Decision::export_page;
            d.reason = "quality cleared";
            d.best_total = Points::from_hundredths(8800);
            d.rounds = 3;
            d.best_round = 2;
            decisions.push_back(d);
        }
    };
    add(Family::apps_tools, 400);
    add(Family::content_marketing, 300);
    add(Family::games_simulations, 200);
    add(Family::visual_art_animation, 100);
    // A rejected trace must never enter the manifest pool.
    GateDecision rejected;
    rejected.artifact_id = "rejected-1";
    rejected.family = Family::apps_tools;
    rejected.decision = Decision::reject;
    decisions.push_back(rejected);
    return decisions;
}

} // namespace

TEST_CASE("manifest sampling is stratified, seeded, and bounded") {
    auto decisions = synthetic_pool();
    auto manifest = export_manifest(decisions, 500, 7);
    CHECK(manifest.size() == 500);
    std::map<Family, int> by_family;
    std::set<std::string> ids;
    for (const auto& e : manifest) {
        ++by_family[e.family];
        ids.insert(e.artifact_id);
        CHECK(e.artifact_id != "rejected-1");
    }
    CHECK(ids.size() == 500);
    // Pool shares: 40% / 30% / 20% / 10%; tolerance +-1% of the sample.
    CHECK(by_family[Family::apps_tools] == 200);
    CHECK(by_family[Family::content_marketing] == 150);
    CHECK(by_family[Family::games_simulations] == 100);
    CHECK(by_family[Family::visual_art_animation] == 50);

    auto manifest2 = export_manifest(decisions, 500, 7);
    REQUIRE(manifest.size() == manifest2.size());
    for (std::size_t i = 0; i < manifest.size(); ++i)
        CHECK(manifest[i].artifact_id == manifest2[i].artifact_id);

    auto different_seed = export_manifest(decisions, 500, 8);
    bool any_difference = false;
    for (std::size_t i = 0; i < manifest.size(); ++i)
        if (manifest[i].artifact_id != different_seed[i].artifact_id) any_difference = true;
    CHECK(any_difference);
}

TEST_CASE("manifest with sample equal to the pool is the identity") {
    auto decisions = synthetic_pool();
    auto manifest = export_manifest(decisions, 1000, 3);
    CHECK(manifest.size() == 1000);
    std::set<std::string> ids;
    for (const auto& e : manifest) ids.insert(e.artifact_id);
    CHECK(ids.size() == 1000);
}

TEST_CASE("oversized samples are a domain error") {
    auto decisions = synthetic_pool();
    CHECK_THROWS_AS(export_manifest(decisions, 1001, 3), DomainError);
}

// ---------------------------------------------------------------------------
// Log interop
// ---------------------------------------------------------------------------

TEST_CASE("policy rows fold repair-log round lines") {
    std::vector<json> lines;
    json round;
    round["kind"] = "round";
    round["artifact_id"] = "p";
    round["band"] = "Mid";
    round["strategy"] = "BugFix";
    round["pre_total"] = 5000;
    round["post_total"] = 6100;
    lines.push_back(round);
    json summary_line;
    summary_line["kind"] = "summary";
    lines.push_back(summary_line);
    auto rows = policy_rows_from_trace_logs(lines);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].delta.hundredths() == 1100);
    CHECK(rows[0].strategy == "BugFix");
}

TEST_CASE("gate decisions round-trip through json") {
    Gatekeeper keeper;
    GateDecision d = keeper.gate(summary("x", Family::webgl_3d, 3000, 8800));
    GateDecision back = gate_decision_from_json(to_json(d));
    CHECK(back.artifact_id == d.artifact_id);
    CHECK(back.decision == d.decision);
    CHECK(back.final_band == d.final_band);
    CHECK(back.best_total == d.best_total);
}
