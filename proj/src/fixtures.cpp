#include "htmlcure/fixtures.hpp"

#include <algorithm>
#include <cstdio>

#include "htmlcure/jsonl.hpp"

namespace htmlcure::fixtures {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::uint64_t state = seed;
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[splitmix64(state) % i]);
}

std::string zero_pad(int value, int width) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Benchmark release
// ---------------------------------------------------------------------------

namespace {

struct FamilySpec {
    Family family;
    const char* slug;
    const char* noun;
    int items;
    int tcs;
    int subtypes;
};

const FamilySpec kFamilies[] = {
    {Family::apps_tools, "apps", "tool", 105, 1688, 18},
    {Family::content_marketing, "content", "page", 110, 1660, 16},
    {Family::data_visualization, "dataviz", "dashboard", 35, 588, 7},
    {Family::games_simulations, "games", "game", 55, 682, 9},
    {Family::webgl_3d, "webgl", "scene", 20, 328, 4},
    {Family::visual_art_animation, "visart", "animation", 75, 1054, 11},
};

constexpr int kTotalItems = 400;
constexpr int kTotalTcs = 6000;
constexpr int kThreeStepTcs = 4120; // 4120*3 + 1880*2 = 16,120 steps
constexpr int kEasy = 122, kMedium = 156, kHard = 122;
constexpr int kInteractiveItems = 338;

bench::Step make_step(const std::string& kind, std::map<std::string, json> args) {
    json j;
    j["kind"] = kind;
    for (auto& [k, v] : args) j[k] = v;
    return bench::step_from_json(j, "fixture");
}

std::vector<bench::Step> tc_steps(int t) {
    std::vector<bench::Step> steps;
    if (t < kThreeStepTcs) {
        switch (t % 3) {
            case 0: steps.push_back(make_step("screenshot", {})); break;
            case 1: steps.push_back(make_step("wait", {{"ms", 250}})); break;
            case 2: steps.push_back(make_step("eval_script", {{"expression", "state.ready"}})); break;
        }
    }
    const std::string n = std::to_string(t);
    static const char* kKeys[] = {"ArrowLeft", "ArrowRight", "Space", "Enter"};
    switch (t % 6) {
        case 0:
            steps.push_back(make_step("click", {{"target", "#action-" + n}}));
            steps.push_back(make_step("assert_text", {{"expected", "Result " + n}}));
            break;
        case 1:
            steps.push_back(
                make_step("type_text", {{"target", "#input-" + n}, {"text", "sample " + n}}));
            steps.push_back(make_step(
                "assert_script", {{"expression", "state.saved_" + std::to_string(t % 3) +
                                                     " == true"}}));
            break;
        case 2:
            steps.push_back(make_step("click_text", {{"text", "Start " + n}}));
            steps.push_back(make_step("screenshot_change_check", {}));
            break;
        case 3:
            steps.push_back(make_step("resize", {{"width", 375}, {"height", 667}}));
            steps.push_back(make_step("visibility_check", {{"target", "#panel-" + n}}));
            break;
        case 4:
            steps.push_back(make_step("key_press", {{"key", kKeys[t % 4]}}));
            steps.push_back(make_step(
                "assert_script", {{"expression", "state.step >= " + std::to_string(t % 5)}}));
            break;
        case 5:
            steps.push_back(make_step("hover", {{"target", "#card-" + n}}));
            steps.push_back(make_step("visibility_check", {{"target", "#tooltip-" + n}}));
            break;
    }
    return steps;
}

json tc_weight(int t) {
    switch (t % 6) {
        case 1: return 2;
        case 3: return 3;
        case 5: return 0.5;
        default: return 1;
    }
}

std::string item_prompt(const FamilySpec& spec, int index, const std::string& sub_type) {
    static const char* kDescriptors[] = {"with live state updates", "with filter controls",
                                         "with a progress summary", "with keyboard shortcuts",
                                         "with a responsive two-column layout"};
    std::string prompt = "Design " + std::string(spec.slug) + " " + spec.noun + " " +
                         zero_pad(index, 3) + ": a self-contained HTML " + spec.noun + " (" +
                         sub_type + ") " + kDescriptors[index % 5] +
                         ". Everything must work from a single file with no external resources.";
    return prompt;
}

} // namespace

void write_release(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<std::string> difficulties;
    difficulties.insert(difficulties.end(), kEasy, "easy");
    difficulties.insert(difficulties.end(), kMedium, "medium");
    difficulties.insert(difficulties.end(), kHard, "hard");
    seeded_shuffle(difficulties, 0x48544d4c31ull);

    std::vector<int> interactive(kTotalItems, 0);
    std::fill(interactive.begin(), interactive.begin() + kInteractiveItems, 1);
    seeded_shuffle(interactive, 0x48544d4c32ull);

    std::vector<std::string> pool;
    int global_item = 0;
    int global_tc = 0;
    for (const auto& spec : kFamilies) {
        std::vector<json> lines;
        int base = spec.tcs / spec.items;
        int remainder = spec.tcs % spec.items;
        for (int i = 0; i < spec.items; ++i, ++global_item) {
            bench::BenchItem item;
            item.id = "hb-" + std::string(spec.slug) + "-" + zero_pad(i, 3);
            item.category = spec.family;
            item.sub_type = std::string(spec.slug) + "-" + zero_pad(i % spec.subtypes, 2);
            item.difficulty = difficulties[global_item];
            item.has_interaction = interactive[global_item] != 0;
            item.prompt = item_prompt(spec, i, item.sub_type);
            int tc_count = base + (i < remainder ? 1 : 0);
            for (int k = 0; k < tc_count; ++k, ++global_tc) {
                bench::TestCase tc;
                tc.tc_id = item.id + "-tc" + zero_pad(k, 2);
                tc.weight = Rational::from_decimal(tc_weight(global_tc).dump());
                tc.steps = tc_steps(global_tc);
                pool.push_back(tc.tc_id);
                item.test_cases.push_back(std::move(tc));
            }
            // One unscored extra per item; parse_release must drop it.
            bench::TestCase extra;
            extra.tc_id = item.id + "-tcx";
            extra.weight = Rational::integer(1);
            extra.steps = {make_step("screenshot", {}), make_step("wait", {{"ms", 200}})};
            item.test_cases.push_back(std::move(extra));
            lines.push_back(bench::item_to_json(item));
        }
        write_jsonl(dir / ("items_" + std::string(spec.slug) + ".jsonl"), lines);
    }

    std::string pool_text;
    for (const auto& id : pool) pool_text += id + "\n";
    write_text_file(dir / "frozen_pool.txt", pool_text);
}

// ---------------------------------------------------------------------------
// Aggregate tables
// ---------------------------------------------------------------------------

std::vector<funnel::FunnelRow> aggregate_funnel_rows() {
    using funnel::Decision;
    auto row = [](Band o, Band f, Decision d, std::int64_t count) {
        funnel::FunnelRow r;
        r.orig_band = o;
        r.final_band = f;
        r.decision = d;
        r.count = count;
        return r;
    };
    // Decision marginals per origin band and final-band marginals both match
    // the released tables; the split between them is the released joint view.
    return {
        row(Band::low, Band::low, Decision::reject, 5),
        row(Band::low, Band::low, Decision::partial, 273),
        row(Band::low, Band::mid, Decision::partial, 6932),
        row(Band::low, Band::high, Decision::export_page, 8476),
        row(Band::mid, Band::mid, Decision::reject, 10),
        row(Band::mid, Band::mid, Decision::partial, 11119),
        row(Band::mid, Band::high, Decision::partial, 2),
        row(Band::mid, Band::high, Decision::export_page, 50881),
        row(Band::high, Band::high, Decision::reject, 9440),
        row(Band::high, Band::high, Decision::export_page, 4346),
    };
}

std::vector<funnel::PolicyRow> solve_policy_group(Band band, const std::string& strategy,
                                                  std::int64_t n, const std::string& mean,
                                                  const std::string& success_pct,
                                                  const std::string& catastrophe_pct) {
    auto round_half_up = [](const Rational& r) -> std::int64_t {
        // floor(r + 1/2)
        Rational shifted = r + Rational(1, 2);
        std::int64_t q = shifted.num() / shifted.den();
        if (shifted.num() < 0 && shifted.num() % shifted.den() != 0) --q;
        return q;
    };
    Rational mean_r = Rational::from_decimal(mean);
    Rational succ_r = Rational::from_decimal(success_pct) / Rational::integer(100);
    Rational cat_r = Rational::from_decimal(catastrophe_pct) / Rational::integer(100);

    std::int64_t n_success = round_half_up(succ_r * Rational::integer(n));
    std::int64_t n_cat = round_half_up(cat_r * Rational::integer(n));
    std::int64_t n_mid = n - n_success - n_cat;
    if (n_mid < 0) throw DomainError("policy group infeasible: " + strategy);

    Rational target_r = mean_r * Rational::integer(n) * Rational::integer(10);
    if (target_r.den() != 1)
        throw DomainError("policy group mean not representable in tenths: " + strategy);
    std::int64_t target_tenths = target_r.num();

    constexpr std::int64_t kCatTenths = -120; // catastrophe rows sit at -12.0
    std::int64_t rest = target_tenths - kCatTenths * n_cat;

    auto floor_div = [](std::int64_t a, std::int64_t b) {
        std::int64_t q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    };

    std::vector<funnel::PolicyRow> rows;
    auto push = [&](std::int64_t delta_tenths, std::int64_t count) {
        if (count <= 0) return;
        funnel::PolicyRow row;
        row.band = band;
        row.strategy = strategy;
        row.delta = Points::from_hundredths(delta_tenths * 10);
        row.count = count;
        rows.push_back(row);
    };

    if (n_success > 0) {
        std::int64_t base = floor_div(rest, n_success);
        std::int64_t extra = rest - base * n_success;
        if (base < 50 || base + 1 > 1000)
            throw DomainError("policy group success deltas out of range: " + strategy);
        push(base + 1, extra);
        push(base, n_success - extra);
        push(0, n_mid);
    } else if (n_mid > 0) {
        std::int64_t base = floor_div(rest, n_mid);
        std::int64_t extra = rest - base * n_mid;
        if (base < -99 || base + 1 > 49)
            throw DomainError("policy group neutral deltas out of range: " + strategy);
        push(base + 1, extra);
        push(base, n_mid - extra);
    } else if (rest != 0) {
        throw DomainError("policy group has no rows to carry the mean: " + strategy);
    }
    push(kCatTenths, n_cat);

    // Internal check: the realized aggregate must reproduce the targets.
    auto stats = funnel::policy_report(rows);
    if (stats.size() != 1 || stats[0].n != n)
        throw DomainError("policy group self-check failed: " + strategy);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", stats[0].mean_delta);
    if (std::string(buf) != mean && !(mean == "-0.0" && std::string(buf) == "0.0"))
        throw DomainError("policy group mean self-check failed: " + strategy + " got " + buf);
    return rows;
}

std::vector<funnel::PolicyRow> aggregate_policy_rows() {
    std::vector<funnel::PolicyRow> rows;
    auto append = [&](std::vector<funnel::PolicyRow> group) {
        rows.insert(rows.end(), group.begin(), group.end());
    };
    append(solve_policy_group(Band::low, "HolisticRewrite", 35822, "14.2", "90.0", "0.6"));
    append(solve_policy_group(Band::low, "BugFix", 6000, "9.1", "92.0", "0.0"));
    append(solve_policy_group(Band::mid, "InteractionTargetedFix", 324880, "11.3", "95.4", "0.1"));
    append(solve_policy_group(Band::mid, "Rewrite", 24000, "8.3", "92.0", "0.4"));
    append(solve_policy_group(Band::high, "FunctionalityRefine", 232128, "-0.2", "0.0", "0.0"));
    append(solve_policy_group(Band::high, "Rewrite", 12000, "-2.7", "0.0", "17.0"));
    return rows;
}

void write_aggregate_tables(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<json> funnel_lines;
    for (const auto& row : aggregate_funnel_rows()) {
        json j;
        j["orig_band"] = band_name(row.orig_band);
        j["final_band"] = band_name(row.final_band);
        j["decision"] = funnel::decision_name(row.decision);
        j["count"] = row.count;
        funnel_lines.push_back(j);
    }
    write_jsonl(dir / "funnel_rows.jsonl", funnel_lines);

    std::vector<json> policy_lines;
    for (const auto& row : aggregate_policy_rows()) {
        json j;
        j["band"] = band_name(row.band);
        j["strategy"] = row.strategy;
        double d = row.delta.value();
        if (d == static_cast<double>(static_cast<std::int64_t>(d)))
            j["delta"] = static_cast<std::int64_t>(d);
        else
            j["delta"] = d;
        j["count"] = row.count;
        policy_lines.push_back(j);
    }
    write_jsonl(dir / "policy_rows.jsonl", policy_lines);
}

// ---------------------------------------------------------------------------
// 12-page corpus
// ---------------------------------------------------------------------------

namespace {

std::string page_head(const std::string& title, bool viewport = true, bool style = true) {
    std::string head = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
    if (viewport)
        head += "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n";
    head += "<title>" + title + "</title>\n";
    if (style)
        head += "<style>body{font-family:sans-serif;margin:0;background:#f4f4f8}"
                "h1{color:#223}button{padding:8px 14px}</style>\n";
    head += "</head>\n<body>\n";
    return head;
}

HtmlArtifact page(const std::string& id, Family family, bool interactive,
                  const std::string& prompt, const std::string& html) {
    HtmlArtifact a;
    a.id = id;
    a.family = family;
    a.interactive = interactive;
    a.prompt = prompt;
    a.html = html;
    a.provenance = Provenance::generated();
    return a;
}

std::string good_game_html() {
    std::string html = page_head("Orbit Dodger");
    html += R"(<h1>Orbit Dodger</h1>
<p>Use the arrow keys to steer your ship between the drifting moons, and tap
space to bank a point each time you thread a gap. The run keeps going as long
as you keep dodging, and the score stays on the HUD below the field.</p>
<canvas id="field" width="640" height="320" data-bind="frame"></canvas>
<div id="hud">score <span id="score" data-bind="score">0</span></div>
<script>
function loop(){ requestAnimationFrame(loop); }
</script>
<script type="text/x-synth-hooks">
{"state":{"frame":0,"x":5,"score":0},
 "handlers":[
  {"on":"tick","do":[{"inc":"frame","by":1}]},
  {"on":"key","key":"ArrowLeft","do":[{"inc":"x","by":-1}]},
  {"on":"key","key":"ArrowRight","do":[{"inc":"x","by":1}]},
  {"on":"key","key":"Space","do":[{"inc":"score","by":1}]}
 ]}
</script>
</body></html>)";
    return html;
}

} // namespace

std::vector<HtmlArtifact> corpus_pages() {
    std::vector<HtmlArtifact> pages;

    // p01: working counter app.
    {
        std::string html = page_head("Click Counter");
        html += R"(<h1>Click Counter</h1>
<p>Press the button to count clicks. The total updates live and the reset
control returns it to zero. The counter keeps its state for the whole visit,
so you can tally laps, reps, or anything else worth counting without losing
your place.</p>
<button id="add">Add one</button>
<button id="reset">Reset</button>
<div id="count" data-bind="count">0</div>
<div id="status">ready</div>
<script type="text/x-synth-hooks">
{"state":{"count":0},
 "handlers":[
  {"on":"click","target":"#add","do":[{"inc":"count","by":1},{"text":"#status","value":"counted"}]},
  {"on":"click","target":"#reset","do":[{"set":"count","to":0},{"text":"#status","value":"reset"}]}
 ]}
</script>
</body></html>)";
        pages.push_back(page("p01-counter", Family::apps_tools, true,
                             "Build a click counter with add and reset buttons and a live total.",
                             html));
    }

    // p02: buttons render but nothing is wired.
    {
        std::string html = page_head("Task Runner");
        html += R"(<h1>Task Runner</h1>
<p>Start and stop background tasks from one panel. The status line below the
controls reports the current run state, and every change should be visible
immediately after pressing a button so operators can trust what they see.</p>
<button id="go">Start task</button>
<button id="stop">Stop task</button>
<div id="panel">idle</div>
<script type="text/x-synth-hooks">
{"state":{},"inert":["#go","#stop"],"handlers":[]}
</script>
</body></html>)";
        pages.push_back(page("p02-inert", Family::apps_tools, true,
                             "Build a task runner with start/stop buttons that update a status "
                             "panel.",
                             html));
    }

    // p03: working canvas game.
    pages.push_back(page("p03-game", Family::games_simulations, true,
                         "Build a small arrow-key dodging game on a canvas with a score counter.",
                         good_game_html()));

    // p04: game scaffold with dead keys and a frozen loop.
    {
        std::string html = page_head("Maze Runner");
        html += R"(<h1>Maze Runner</h1>
<p>Arrow keys should move the runner.</p>
<canvas id="maze" width="640" height="320"></canvas>
<div id="pos">position 5</div>
<script>
function start(){ requestAnimationFrame(tick); }
</script>
<script type="text/x-synth-hooks">
{"state":{"px":5},"no_keys":true,
 "handlers":[
  {"on":"key","key":"ArrowLeft","do":[{"inc":"px","by":-1}]}
 ]}
</script>
</body></html>)";
        pages.push_back(page("p04-broken-game", Family::games_simulations, true,
                             "Build a maze game where arrow keys move the runner across a canvas.",
                             html));
    }

    // p05: solid static article.
    {
        std::string html = page_head("Field Guide");
        html += R"(<h1 id="intro">A Field Guide to Tide Pools</h1>
<p>This guide walks through the animals and plants you can meet at low tide,
how to read the zones of a rocky shore, and how to explore without harming
the pools. Bring boots with grip, check the tide tables, and give every
creature room to breathe.</p>
<h2>Zones of the shore</h2>
<p>The splash zone sits highest, wetted only by spray. Below it the high
intertidal dries out twice a day, while the low intertidal almost never
sees air and hosts the richest life.</p>
<h2>Common residents</h2>
<p>Anemones, hermit crabs, sculpins, and sea stars are the regulars.
Mussels and barnacles crowd the middle rocks.</p>
<h2>Field manners</h2>
<p>Touch gently with a wet finger, never pry animals loose, and put every
rock back the way you found it.</p>
</body></html>)";
        pages.push_back(page("p05-static-article", Family::content_marketing, false,
                             "Write an illustrated field guide page about tide pools with "
                             "clear sections.",
                             html));
    }

    // p06: fixed-width block overflows every viewport.
    {
        std::string html = page_head("Print Gallery");
        html += R"(<h1>Print Gallery</h1>
<div id="wide" style="width:1500px">A wall of prints laid out on a fixed
1500 pixel strip that refuses to shrink with the window.</div>
<p>Browse the collection of silkscreen prints from the studio archive. Each
print in the strip above is shown at press scale, with notes on paper stock,
ink runs, and the edition size recorded by the printer at the time.</p>
</body></html>)";
        pages.push_back(page("p06-overflow", Family::content_marketing, false,
                             "Build a gallery landing page for silkscreen prints.", html));
    }

    // p07: no viewport meta, no styling at all.
    {
        std::string html = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
                           "<title>Particle Clock</title>\n</head>\n<body>\n";
        html += R"(<h1>Particle Clock</h1>
<p>A clock face drawn from drifting particles. The digits reform every
minute and scatter on the hour, leaving faint trails behind them as they
drift back into place for the next reading.</p>
<div id="stage">particles idle</div>
</body></html>)";
        pages.push_back(page("p07-bare", Family::visual_art_animation, false,
                             "Build a particle clock animation page.", html));
    }

    // p08: console errors on load, inert control.
    {
        std::string html = page_head("Run Console");
        html += R"(<h1>Run Console</h1>
<p>Queue a job and watch its output land in the console panel below. The run
button kicks off the configured job, streams its progress, and leaves the
final status visible so a failed boot is never silent.</p>
<button id="run">Run job</button>
<div id="out">no output</div>
<script type="text/x-synth-hooks">
{"state":{},
 "handlers":[
  {"on":"load","do":[{"throw":"TypeError: jobs is undefined"},{"console_error":"boot sequence failed"}]}
 ],
 "inert":["#run"]}
</script>
</body></html>)";
        pages.push_back(page("p08-console-errors", Family::apps_tools, true,
                             "Build a job console with a run button that prints job output.",
                             html));
    }

    // p09: blank shell (trivial; fails the static pass).
    pages.push_back(page("p09-blank", Family::data_visualization, true,
                         "Build a sales dashboard with a filterable bar chart.",
                         "<html></html>"));

    // p10: prose with no markup (malformed; fails the static pass).
    pages.push_back(page("p10-malformed", Family::webgl_3d, true,
                         "Build a rotating 3D scene viewer with orbit controls.",
                         "I describe a lovely spinning cube scene here < without building it."));

    // p11: working form.
    {
        std::string html = page_head("Greeting Form");
        html += R"(<h1>Greeting Form</h1>
<p>Type a name and press the greet button to get a personal greeting. The
form responds as you type, and the greeting line updates in place without a
page reload, which keeps the exchange quick and friendly.</p>
<input id="name" type="text" value="">
<button id="submit">Greet</button>
<div id="greet">-</div>
<script type="text/x-synth-hooks">
{"state":{"submitted":false},
 "handlers":[
  {"on":"click","target":"#name","do":[{"set":"focused","to":true}]},
  {"on":"input","target":"#name","do":[{"set":"typed","to":true}]},
  {"on":"click","target":"#submit","do":[{"set":"submitted","to":true},{"text":"#greet","value":"hello"}]}
 ]}
</script>
</body></html>)";
        pages.push_back(page("p11-form", Family::apps_tools, true,
                             "Build a greeting form with a name input and a greet button.", html));
    }

    // p12: one control responds only after a long stall.
    {
        std::string html = page_head("Report Loader");
        html += R"(<h1>Report Loader</h1>
<p>Two ways to read the numbers: quick stats for a summary that lands at
once, or the full report loader that gathers every table. The full loader is
known to stall on large archives, which is exactly what this page is for
catching.</p>
<button id="load">Load report</button>
<button id="fast">Quick stats</button>
<div id="data">empty</div>
<script type="text/x-synth-hooks">
{"state":{"ok":false},
 "handlers":[
  {"on":"click","target":"#load","do":[{"delay_ms":15000},{"text":"#data","value":"loaded"}]},
  {"on":"click","target":"#fast","do":[{"set":"ok","to":true}]}
 ]}
</script>
</body></html>)";
        pages.push_back(page("p12-slow", Family::apps_tools, true,
                             "Build a report loader with a fast stats button and a full loader.",
                             html));
    }
    return pages;
}

namespace {

bench::TestCase make_tc(const std::string& id, json weight, std::vector<bench::Step> steps) {
    bench::TestCase tc;
    tc.tc_id = id;
    tc.weight = Rational::from_decimal(weight.dump());
    tc.steps = std::move(steps);
    return tc;
}

} // namespace

std::vector<bench::BenchItem> corpus_items() {
    auto pages = corpus_pages();
    std::vector<bench::BenchItem> items;
    int idx = 0;
    for (const auto& p : pages) {
        bench::BenchItem item;
        item.id = p.id;
        item.category = p.family;
        item.sub_type = "corpus-" + zero_pad(idx % 4, 2);
        item.difficulty = idx % 3 == 0 ? "easy" : (idx % 3 == 1 ? "medium" : "hard");
        item.prompt = p.prompt;
        item.has_interaction = p.interactive;
        ++idx;
        items.push_back(std::move(item));
    }

    auto find = [&](const std::string& id) -> bench::BenchItem& {
        for (auto& item : items)
            if (item.id == id) return item;
        throw DomainError("corpus item missing: " + id);
    };

    find("p01-counter").test_cases = {
        make_tc("p01-tc00", 2,
                {make_step("click", {{"target", "#add"}}),
                 make_step("assert_script", {{"expression", "state.count == 1"}})}),
        make_tc("p01-tc01", 1,
                {make_step("screenshot", {}), make_step("click", {{"target", "#add"}}),
                 make_step("screenshot_change_check", {})}),
        make_tc("p01-tc02", 1,
                {make_step("visibility_check", {{"target", "#status"}}),
                 make_step("assert_text", {{"expected", "Click Counter"}})}),
    };
    find("p02-inert").test_cases = {
        make_tc("p02-tc00", 1,
                {make_step("screenshot", {}), make_step("click", {{"target", "#go"}}),
                 make_step("screenshot_change_check", {})}),
        make_tc("p02-tc01", 1,
                {make_step("click", {{"target", "#go"}}),
                 make_step("assert_script", {{"expression", "state.started == true"}})}),
        make_tc("p02-tc02", 1, {make_step("visibility_check", {{"target", "#panel"}})}),
    };
    find("p03-game").test_cases = {
        make_tc("p03-tc00", 2,
                {make_step("key_press", {{"key", "ArrowRight"}}),
                 make_step("assert_script", {{"expression", "state.x == 6"}})}),
        make_tc("p03-tc01", 1,
                {make_step("screenshot", {}), make_step("wait", {{"ms", 400}}),
                 make_step("screenshot_change_check", {})}),
        make_tc("p03-tc02", 1,
                {make_step("key_press", {{"key", "Space"}}),
                 make_step("key_press", {{"key", "Space"}}),
                 make_step("assert_script", {{"expression", "state.score >= 2"}})}),
    };
    find("p04-broken-game").test_cases = {
        make_tc("p04-tc00", 2,
                {make_step("key_press", {{"key", "ArrowLeft"}}),
                 make_step("assert_script", {{"expression", "state.px < 5"}})}),
        make_tc("p04-tc01", 1,
                {make_step("screenshot", {}), make_step("wait", {{"ms", 400}}),
                 make_step("screenshot_change_check", {})}),
    };
    find("p05-static-article").test_cases = {
        make_tc("p05-tc00", 1,
                {make_step("visibility_check", {{"target", "#intro"}}),
                 make_step("assert_text", {{"expected", "tide"}})}),
        make_tc("p05-tc01", 1,
                {make_step("resize", {{"width", 375}, {"height", 667}}),
                 make_step("visibility_check", {{"target", "#intro"}})}),
        make_tc("p05-tc02", 1,
                {make_step("assert_script", {{"expression", "count('h2') >= 3"}})}),
    };
    find("p06-overflow").test_cases = {
        make_tc("p06-tc00", 1, {make_step("visibility_check", {{"target", "#wide"}})}),
        make_tc("p06-tc01", 1, {make_step("assert_text", {{"expected", "silkscreen"}})}),
    };
    find("p07-bare").test_cases = {
        make_tc("p07-tc00", 1, {make_step("visibility_check", {{"target", "#stage"}})}),
        make_tc("p07-tc01", 1, {make_step("assert_text", {{"expected", "Particle Clock"}})}),
    };
    find("p08-console-errors").test_cases = {
        make_tc("p08-tc00", 2,
                {make_step("click", {{"target", "#run"}}),
                 make_step("assert_script", {{"expression", "state.ran == true"}})}),
        make_tc("p08-tc01", 1, {make_step("visibility_check", {{"target", "#out"}})}),
    };
    find("p09-blank").test_cases = {
        make_tc("p09-tc00", 1, {make_step("visibility_check", {{"target", "#chart"}})}),
        make_tc("p09-tc01", 1, {make_step("assert_text", {{"expected", "sales"}})}),
    };
    find("p10-malformed").test_cases = {
        make_tc("p10-tc00", 1, {make_step("visibility_check", {{"target", "#scene"}})}),
        make_tc("p10-tc01", 1, {make_step("assert_text", {{"expected", "orbit"}})}),
    };
    find("p11-form").test_cases = {
        make_tc("p11-tc00", 2,
                {make_step("type_text", {{"target", "#name"}, {"text", "Ada"}}),
                 make_step("click", {{"target", "#submit"}}),
                 make_step("assert_text", {{"target", "#greet"}, {"expected", "hello"}})}),
        make_tc("p11-tc01", 1,
                {make_step("click", {{"target", "#submit"}}),
                 make_step("assert_script", {{"expression", "state.submitted == true"}})}),
    };
    find("p12-slow").test_cases = {
        make_tc("p12-tc00", 1,
                {make_step("click", {{"target", "#load"}}),
                 make_step("assert_text", {{"target", "#data"}, {"expected", "loaded"}})}),
        make_tc("p12-tc01", 1,
                {make_step("click", {{"target", "#fast"}}),
                 make_step("assert_script", {{"expression", "state.ok == true"}})}),
    };
    return items;
}

// ---------------------------------------------------------------------------
// Mock script
// ---------------------------------------------------------------------------

namespace {

std::string default_analyst_response() {
    json j;
    j["page_type"] = "app";
    j["visual_state"] = "rendered";
    j["visual_elements"] = {"heading", "primary panel"};
    j["template_like_signals"] = json::array();
    j["distinctive_design_signals"] = {"custom palette"};
    j["design_specificity"] = "moderate";
    j["working"] = {"layout"};
    j["broken"] = json::array();
    j["interaction_quality"] = "mixed";
    j["layout_notes"] = "single column";
    j["requirements"] = json::array();
    j["summary"] = {{"total", 0}, {"done", 0}, {"broken", 0}, {"missing", 0}};
    return j.dump();
}

std::string default_scorer_response() {
    json j;
    j["rendering"] = {{"score", 8}, {"reason", "loads cleanly"}};
    j["visual_design"] = {{"score", 12}, {"reason", "clear hierarchy, modest polish"}};
    j["functionality"] = {{"score", 30}, {"reason", "requirement checklist partial"}};
    j["interaction"] = {{"score", 5}, {"reason", "probe evidence mixed"}};
    j["code_quality"] = {{"score", 4}, {"reason", "tidy static pass"}};
    j["total_score"] = 59;
    j["bugs"] = json::array();
    j["missing_features"] = json::array();
    j["highlights"] = {"layout"};
    j["improvement_hints"] = {"fix event wiring"};
    j["summary"] = "serviceable page with partial behavior";
    return j.dump();
}

std::string default_contrastive_response() {
    json j;
    j["improved"] = {"interaction wiring responds after the edit"};
    j["regressed"] = json::array();
    j["unchanged_issues"] = json::array();
    j["priority_fix"] = "verify the remaining checks stay green";
    return j.dump();
}

std::string default_repair_response() {
    json j;
    j["patches"] = json::array();
    j["patches"].push_back({{"old_str", "</body>"}, {"new_str", "<!-- reviewed -->\n</body>"}});
    return j.dump();
}

std::string p02_fix_response() {
    json j;
    j["patches"] = json::array();
    j["patches"].push_back(
        {{"old_str", "{\"state\":{},\"inert\":[\"#go\",\"#stop\"],\"handlers\":[]}"},
         {"new_str",
          "{\"state\":{\"started\":false},\"inert\":[],\"handlers\":["
          "{\"on\":\"click\",\"target\":\"#go\",\"do\":[{\"set\":\"started\",\"to\":true},"
          "{\"text\":\"#panel\",\"value\":\"running\"}]},"
          "{\"on\":\"click\",\"target\":\"#stop\",\"do\":[{\"set\":\"started\",\"to\":false},"
          "{\"text\":\"#panel\",\"value\":\"stopped\"}]}]}"}});
    return j.dump();
}

std::string p08_fix_response() {
    json j;
    j["patches"] = json::array();
    j["patches"].push_back(
        {{"old_str",
          "{\"on\":\"load\",\"do\":[{\"throw\":\"TypeError: jobs is undefined\"},"
          "{\"console_error\":\"boot sequence failed\"}]}"},
         {"new_str",
          "{\"on\":\"click\",\"target\":\"#run\",\"do\":[{\"set\":\"ran\",\"to\":true},"
          "{\"text\":\"#out\",\"value\":\"job complete\"}]}"}});
    j["patches"].push_back({{"old_str", ",\n \"inert\":[\"#run\"]"}, {"new_str", ""}});
    return j.dump();
}

std::string dashboard_rewrite_response() {
    std::string html = page_head("Sales Dashboard");
    html += R"(<h1>Sales Dashboard</h1>
<p>Quarterly sales by region with a filterable bar chart. Pick a region with
the buttons to narrow the series; the chart legend and the summary line both
follow the active filter so the numbers on screen always agree with the
selection.</p>
<button id="filter-west">West</button>
<button id="filter-east">East</button>
<div id="chart" data-bind="series">all regions</div>
<script type="text/x-synth-hooks">
{"state":{"series":"all regions"},
 "handlers":[
  {"on":"click","target":"#filter-west","do":[{"set":"series","to":"west only"}]},
  {"on":"click","target":"#filter-east","do":[{"set":"series","to":"east only"}]}
 ]}
</script>
</body></html>)";
    return html;
}

std::string scene_rewrite_response() {
    std::string html = page_head("Orbit Scene Viewer");
    html += R"(<h1>Orbit Scene Viewer</h1>
<p>Drag or use the arrow keys to orbit the cube scene. The camera sweeps a
full circle around the model, the HUD reports the current angle in degrees,
and the idle animation keeps the scene slowly turning when your hands are
off the keys.</p>
<canvas id="scene" width="640" height="360" data-bind="angle"></canvas>
<div id="hud">angle <span data-bind="angle">0</span></div>
<script>
function render(){ requestAnimationFrame(render); }
</script>
<script type="text/x-synth-hooks">
{"state":{"angle":0},
 "handlers":[
  {"on":"tick","do":[{"inc":"angle","by":2}]},
  {"on":"key","key":"ArrowLeft","do":[{"inc":"angle","by":-10}]},
  {"on":"key","key":"ArrowRight","do":[{"inc":"angle","by":10}]}
 ]}
</script>
</body></html>)";
    return html;
}

} // namespace

std::vector<json> corpus_mock_script() {
    std::vector<json> lines;
    auto default_entry = [&](const char* key, const std::string& response) {
        json j;
        j["key"] = key;
        j["default"] = true;
        j["response"] = response;
        lines.push_back(j);
    };
    auto scoped_default = [&](const char* key, const std::string& scope,
                              const std::string& response) {
        json j;
        j["key"] = key;
        j["default"] = true;
        j["scope"] = scope;
        j["response"] = response;
        lines.push_back(j);
    };
    default_entry("analyst", default_analyst_response());
    default_entry("scorer", default_scorer_response());
    default_entry("contrastive", default_contrastive_response());
    default_entry("repair", default_repair_response());
    default_entry("game_repair", good_game_html());
    default_entry("generation", dashboard_rewrite_response());

    scoped_default("repair", "p02-inert", p02_fix_response());
    scoped_default("repair", "p08-console-errors", p08_fix_response());
    scoped_default("repair", "p09-blank", dashboard_rewrite_response());
    scoped_default("repair", "p10-malformed", scene_rewrite_response());
    scoped_default("game_repair", "p04-broken-game", good_game_html());
    return lines;
}

void write_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<json> page_lines;
    for (const auto& p : corpus_pages()) page_lines.push_back(to_json(p));
    write_jsonl(dir / "pages.jsonl", page_lines);

    fs::path release = dir / "release";
    fs::create_directories(release);
    std::vector<json> item_lines;
    std::string pool;
    for (const auto& item : corpus_items()) {
        item_lines.push_back(bench::item_to_json(item));
        for (const auto& tc : item.test_cases) pool += tc.tc_id + "\n";
    }
    write_jsonl(release / "items_corpus.jsonl", item_lines);
    write_text_file(release / "frozen_pool.txt", pool);

    write_jsonl(dir / "mock_script.jsonl", corpus_mock_script());

    json provider;
    provider["endpoint"] = "";
    provider["model"] = "scripted-mock";
    provider["auth_token_env"] = "HTMLCURE_API_TOKEN";
    provider["max_output_tokens"] = 30000;
    provider["temperature"] = 0.0;
    provider["retry"] = {{"max_attempts", 3}, {"backoff_ms", 200}};
    provider["timeout_ms"] = 600000;
    provider["max_in_flight"] = 4;
    write_text_file(dir / "provider.json", provider.dump(2) + "\n");
}

} // namespace htmlcure::fixtures
