// htmlcure: evaluate single-file HTML pages under the deterministic browser
// protocol, repair them with the state-aware controller, gate and export the
// refined pool, and reproduce the funnel analytics tables.
//
// Exit codes: 0 success, 1 validation/quality failure, 2 configuration
// error, 3 transport/provider failure.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "htmlcure/bench.hpp"
#include "htmlcure/fixtures.hpp"
#include "htmlcure/funnel.hpp"
#include "htmlcure/jsonl.hpp"
#include "htmlcure/pipeline.hpp"

using namespace htmlcure;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitQuality = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;

void on_interrupt(int) { pipeline::request_drain(); }

struct CommonOpts {
    std::string backend = "synthetic";
    std::string mode = "full";
    int workers = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::string provider_config;
    std::string mock_script;
    std::string devtools_url;
    std::string spill_frames;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--backend", opts.backend, "Browser backend: synthetic | devtools");
    cmd->add_option("--mode", opts.mode, "full (with visual phase) | fast (skips it)");
    cmd->add_option("--workers", opts.workers, "Worker pool size");
    cmd->add_option("--seed", opts.seed, "Seed for sampling");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--provider-config", opts.provider_config, "Provider config JSON");
    cmd->add_option("--mock-script", opts.mock_script, "Scripted mock provider file");
    cmd->add_option("--devtools-url", opts.devtools_url,
                    "ws:// endpoint of a headless browser (devtools backend)");
    cmd->add_option("--spill-frames", opts.spill_frames,
                    "Directory for captured frames, one image per frame hash");
}

pipeline::RunConfig make_run_config(const CommonOpts& opts) {
    pipeline::RunConfig config;
    config.backend = opts.backend;
    config.mode = opts.mode;
    config.workers = opts.workers;
    config.seed = opts.seed;
    config.out_dir = opts.out;
    config.provider_config_path = opts.provider_config;
    config.mock_script_path = opts.mock_script;
    config.devtools_url = opts.devtools_url;
    config.protocol.frame_spill_dir = opts.spill_frames;
    if (config.devtools_url.empty()) {
        const char* env = std::getenv("HTMLCURE_BROWSER_WS");
        if (env) config.devtools_url = env;
    }
    return config;
}

int count_failures(const std::vector<pipeline::PageOutcome>& outcomes) {
    int failed = 0;
    for (const auto& o : outcomes)
        if (!o.ok) ++failed;
    return failed;
}

// ---------------------------------------------------------------------------
// bench-validate
// ---------------------------------------------------------------------------

int cmd_bench_validate(const std::string& release_dir, const std::string& corpus_file,
                       const std::string& out_dir) {
    std::vector<bench::BenchItem> items;
    try {
        items = bench::parse_release(release_dir);
    } catch (const ValidationError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitQuality;
    }

    int violations = 0;
    for (const auto& item : items) {
        bench::ValidationReport report = bench::validate_item(item);
        for (const auto& v : report.violations) {
            std::cerr << "violation " << v.item_id << (v.tc_id.empty() ? "" : "/" + v.tc_id)
                      << " [" << v.code << "]: " << v.message << "\n";
            ++violations;
        }
    }

    std::vector<std::string> corpus;
    if (!corpus_file.empty()) {
        for (const auto& line : read_jsonl(corpus_file))
            corpus.push_back(line.is_string() ? line.get<std::string>()
                                              : line.value("prompt", ""));
    }
    bench::AuditReport audit = bench::audit_release(items, corpus);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::vector<json> violation_lines;
        for (const auto& item : items)
            for (const auto& v : bench::validate_item(item).violations)
                violation_lines.push_back({{"item_id", v.item_id},
                                           {"tc_id", v.tc_id},
                                           {"code", v.code},
                                           {"message", v.message}});
        write_jsonl(std::filesystem::path(out_dir) / "validation_report.jsonl",
                    violation_lines);
        std::vector<json> audit_lines;
        for (const auto& group : audit.duplicate_evidence_groups)
            audit_lines.push_back({{"kind", "duplicate_evidence"}, {"tc_ids", group}});
        for (const auto& tc : audit.shallow_visual_tcs)
            audit_lines.push_back({{"kind", "shallow_visual"}, {"tc_id", tc}});
        for (const auto& group : audit.cross_template_groups)
            audit_lines.push_back({{"kind", "cross_template"}, {"item_ids", group}});
        audit_lines.push_back({{"kind", "corpus_overlap"},
                               {"count", audit.corpus_overlap_count}});
        write_jsonl(std::filesystem::path(out_dir) / "audit_report.jsonl", audit_lines);
    }

    bench::ReleaseStats stats = bench::release_stats(items);
    std::cout << "items: " << stats.total_items << "\n"
              << "scored test cases: " << stats.total_test_cases << "\n"
              << "subtypes: " << stats.total_subtypes << "\n"
              << "steps: " << stats.total_steps << "\n"
              << "difficulty: " << stats.easy << " easy / " << stats.medium << " medium / "
              << stats.hard << " hard\n"
              << "interactive items: " << stats.interactive_items << "\n";
    for (Family f : all_families()) {
        auto it = stats.per_family.find(f);
        if (it == stats.per_family.end()) continue;
        std::cout << "  " << family_name(f) << ": " << it->second.items << " items, "
                  << it->second.test_cases << " TCs, " << it->second.subtypes << " subtypes\n";
    }
    std::cout << "schema violations: " << violations << "\n"
              << "duplicate-evidence groups: " << audit.duplicate_evidence_groups.size() << "\n"
              << "shallow-visual TCs: " << audit.shallow_visual_tcs.size() << "\n"
              << "cross-template groups: " << audit.cross_template_groups.size() << "\n";
    if (!corpus_file.empty())
        std::cout << "corpus overlaps: " << audit.corpus_overlap_count << "\n";

    bool clean = violations == 0 && audit.clean();
    std::cout << (clean ? "PASS" : "FAIL") << "\n";
    return clean ? kExitOk : kExitQuality;
}

// ---------------------------------------------------------------------------
// evaluate / repair
// ---------------------------------------------------------------------------

int cmd_evaluate(const CommonOpts& opts, const std::string& pages_file,
                 const std::string& release_dir) {
    pipeline::RunConfig config = make_run_config(opts);
    auto pages = pipeline::load_pages(pages_file);
    auto items = bench::parse_release(release_dir);
    auto outcomes = pipeline::run_evaluate_batch(config, pages, items);
    int failed = count_failures(outcomes);
    std::cout << "evaluated " << outcomes.size() - failed << "/" << outcomes.size()
              << " pages (per-page failures recorded in failures.jsonl)\n";
    return kExitOk; // per-page failures are data; the batch itself succeeded
}

int cmd_repair(const CommonOpts& opts, const std::string& pages_file,
               const std::string& release_dir) {
    pipeline::RunConfig config = make_run_config(opts);
    auto pages = pipeline::load_pages(pages_file);
    auto items = bench::parse_release(release_dir);
    auto outcomes = pipeline::run_repair_batch(config, pages, items);
    int failed = count_failures(outcomes);
    std::cout << "repaired " << outcomes.size() - failed << "/" << outcomes.size() << " pages\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

int cmd_export(const std::string& run_dir, const std::string& out_dir, std::int64_t sample,
               std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::path logs = fs::path(run_dir) / "repair_logs.jsonl";
    if (!fs::exists(logs)) throw ConfigError("no repair_logs.jsonl under " + run_dir);
    fs::create_directories(out_dir);

    std::vector<funnel::TraceSummary> summaries;
    for (const auto& line : read_jsonl(logs)) {
        if (line.value("kind", "") != "summary") continue;
        funnel::TraceSummary s = funnel::summary_from_json(line);
        fs::path best = fs::path(run_dir) / "pages" / s.artifact_id / "best.html";
        if (fs::exists(best)) s.html = read_text_file(best);
        summaries.push_back(std::move(s));
    }
    std::sort(summaries.begin(), summaries.end(),
              [](const funnel::TraceSummary& a, const funnel::TraceSummary& b) {
                  return a.artifact_id < b.artifact_id;
              });

    funnel::Gatekeeper keeper;
    std::vector<funnel::GateDecision> decisions;
    for (const auto& s : summaries) decisions.push_back(keeper.gate(s));

    std::vector<json> decision_lines;
    for (const auto& d : decisions) decision_lines.push_back(funnel::to_json(d));
    write_jsonl(fs::path(out_dir) / "gate_decisions.jsonl", decision_lines);

    auto rows = funnel::funnel_rows_from_decisions(decisions);
    funnel::FunnelReport report = funnel::funnel_report(rows);
    write_text_file(fs::path(out_dir) / "funnel.txt", funnel::render_funnel(report));
    std::cout << funnel::render_funnel(report);

    std::size_t pool = static_cast<std::size_t>(report.pool);
    std::size_t take = sample < 0 ? pool : static_cast<std::size_t>(sample);
    auto manifest = funnel::export_manifest(decisions, take, seed);
    std::vector<json> manifest_lines;
    for (const auto& e : manifest) manifest_lines.push_back(funnel::to_json(e));
    write_jsonl(fs::path(out_dir) / "manifest.jsonl", manifest_lines);
    std::cout << "manifest: " << manifest.size() << " pages\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const std::string& run_dir, const std::string& funnel_rows_file,
                const std::string& policy_rows_file, const std::string& decisions_path,
                const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::vector<funnel::FunnelRow> funnel_rows;
    std::vector<funnel::PolicyRow> policy_rows;

    if (!funnel_rows_file.empty()) funnel_rows = funnel::funnel_rows_from_jsonl(funnel_rows_file);
    if (!policy_rows_file.empty()) policy_rows = funnel::policy_rows_from_jsonl(policy_rows_file);

    if (!run_dir.empty()) {
        fs::path logs = fs::path(run_dir) / "repair_logs.jsonl";
        if (!fs::exists(logs)) throw ConfigError("no repair_logs.jsonl under " + run_dir);
        auto lines = read_jsonl(logs);
        policy_rows = funnel::policy_rows_from_trace_logs(lines);
        fs::path decisions_file = decisions_path.empty()
                                      ? fs::path(run_dir) / "gate_decisions.jsonl"
                                      : fs::path(decisions_path);
        if (fs::exists(decisions_file)) {
            std::vector<funnel::GateDecision> decisions;
            for (const auto& line : read_jsonl(decisions_file))
                decisions.push_back(funnel::gate_decision_from_json(line));
            funnel_rows = funnel::funnel_rows_from_decisions(decisions);
        } else {
            // Without gate decisions, band movement still reports; every
            // trace lands in one row with a neutral decision channel.
            for (const auto& line : lines) {
                if (line.value("kind", "") != "summary") continue;
                funnel::TraceSummary s = funnel::summary_from_json(line);
                funnel::FunnelRow row;
                row.orig_band = s.origin_band();
                row.final_band = s.final_band();
                row.decision = funnel::Decision::partial;
                row.count = 1;
                funnel_rows.push_back(row);
            }
        }
    }

    std::string output;
    if (!funnel_rows.empty()) {
        funnel::FunnelReport report = funnel::funnel_report(funnel_rows);
        funnel::TransitionMatrix matrix = funnel::transition_report(funnel_rows);
        output += "== Refined pool funnel ==\n" + funnel::render_funnel(report) + "\n";
        output += "== State transitions (score bands) ==\n" + funnel::render_transition(matrix) +
                  "\n";
    }
    if (!policy_rows.empty()) {
        auto stats = funnel::policy_report(policy_rows);
        output += "== State-aware repair utility ==\n" + funnel::render_policy(stats);
    }
    if (output.empty()) throw ConfigError("analyze: nothing to report (no inputs)");
    std::cout << output;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "analysis.txt", output);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

int cmd_fixtures(const std::string& out_dir, const std::string& kind) {
    namespace fs = std::filesystem;
    fs::path base = out_dir;
    if (kind == "release" || kind == "all") {
        fixtures::write_release(base / "release");
        std::cout << "release fixtures -> " << (base / "release").string() << "\n";
    }
    if (kind == "tables" || kind == "all") {
        fixtures::write_aggregate_tables(base / "tables");
        std::cout << "aggregate tables -> " << (base / "tables").string() << "\n";
    }
    if (kind == "corpus" || kind == "all") {
        fixtures::write_corpus(base / "corpus");
        std::cout << "synthetic corpus -> " << (base / "corpus").string() << "\n";
    }
    if (kind != "release" && kind != "tables" && kind != "corpus" && kind != "all")
        throw ConfigError("fixtures: unknown kind '" + kind + "'");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_interrupt);

    CLI::App app{"HTML page evaluation, state-aware repair, and export funnel"};
    app.require_subcommand(1);

    std::string release_dir;
    std::string corpus_file;
    std::string validate_out;
    auto* validate =
        app.add_subcommand("bench-validate", "Parse, validate, and audit a benchmark release");
    validate->add_option("release", release_dir, "Release directory")->required();
    validate->add_option("--against-corpus", corpus_file,
                         "Prompt corpus (JSONL) for the overlap audit");
    validate->add_option("--out", validate_out,
                         "Directory for line-delimited validation/audit reports");

    CommonOpts eval_opts;
    std::string pages_file;
    std::string eval_release;
    auto* evaluate = app.add_subcommand("evaluate", "Score pages under the browser protocol");
    evaluate->add_option("--pages", pages_file, "pages.jsonl of artifacts")->required();
    evaluate->add_option("--release", eval_release, "Benchmark release directory")->required();
    add_common(evaluate, eval_opts);

    CommonOpts repair_opts;
    std::string repair_pages;
    std::string repair_release;
    auto* repair_cmd = app.add_subcommand("repair", "Run the state-aware repair loop");
    repair_cmd->add_option("--pages", repair_pages, "pages.jsonl of artifacts")->required();
    repair_cmd->add_option("--release", repair_release, "Benchmark release directory")
        ->required();
    add_common(repair_cmd, repair_opts);

    std::string export_run_dir;
    std::string export_out;
    std::int64_t export_sample = -1;
    std::uint64_t export_seed = 0;
    auto* export_cmd = app.add_subcommand("export", "Gate repair traces and emit the manifest");
    export_cmd->add_option("--run-dir", export_run_dir, "Directory written by 'repair'")
        ->required();
    export_cmd->add_option("--out", export_out, "Output directory")->required();
    export_cmd->add_option("--sample", export_sample, "Manifest size (default: whole pool)");
    export_cmd->add_option("--seed", export_seed, "Sampling seed");

    std::string analyze_run_dir;
    std::string analyze_funnel;
    std::string analyze_policy;
    std::string analyze_out;
    auto* analyze =
        app.add_subcommand("analyze", "Funnel, transition, and policy tables from traces");
    analyze->add_option("--run-dir", analyze_run_dir, "Directory written by 'repair'");
    analyze->add_option("--funnel-rows", analyze_funnel, "Aggregate funnel rows (JSONL)");
    analyze->add_option("--policy-rows", analyze_policy, "Aggregate policy rows (JSONL)");
    std::string analyze_decisions;
    analyze->add_option("--decisions", analyze_decisions,
                        "gate_decisions.jsonl from 'export' (defaults to the run dir)");
    analyze->add_option("--out", analyze_out, "Directory for rendered tables");

    std::string fixtures_out;
    std::string fixtures_kind = "all";
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Write deterministic fixture sets");
    fixtures_cmd->add_option("--out", fixtures_out, "Output directory")->required();
    fixtures_cmd->add_option("--kind", fixtures_kind, "release | tables | corpus | all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed())
            return cmd_bench_validate(release_dir, corpus_file, validate_out);
        if (evaluate->parsed()) return cmd_evaluate(eval_opts, pages_file, eval_release);
        if (repair_cmd->parsed()) return cmd_repair(repair_opts, repair_pages, repair_release);
        if (export_cmd->parsed())
            return cmd_export(export_run_dir, export_out, export_sample, export_seed);
        if (analyze->parsed())
            return cmd_analyze(analyze_run_dir, analyze_funnel, analyze_policy,
                               analyze_decisions, analyze_out);
        if (fixtures_cmd->parsed()) return cmd_fixtures(fixtures_out, fixtures_kind);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitQuality;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitQuality;
    }
    return kExitConfig;
}
