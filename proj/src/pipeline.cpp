#include "htmlcure/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "htmlcure/devtools.hpp"
#include "htmlcure/jsonl.hpp"
#include "htmlcure/sha256.hpp"
#include "htmlcure/synthetic_backend.hpp"

namespace htmlcure::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

void RunConfig::check() const {
    if (backend != "synthetic" && backend != "devtools")
        throw ConfigError("backend must be 'synthetic' or 'devtools', got '" + backend + "'");
    if (mode != "full" && mode != "fast")
        throw ConfigError("mode must be 'full' or 'fast', got '" + mode + "'");
    if (backend == "devtools" && devtools_url.empty())
        throw ConfigError("devtools backend requires --devtools-url (or HTMLCURE_BROWSER_WS)");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (mode == "full" && mock_script_path.empty() && provider_config_path.empty())
        throw ConfigError("full mode needs --provider-config or --mock-script (or use --mode fast)");
    protocol.check();
    repair_config.check();
}

std::string RunConfig::digest() const {
    json j;
    j["backend"] = backend;
    j["mode"] = mode;
    j["seed"] = seed;
    j["provider_config"] = provider_config_path.string();
    j["mock_script"] = mock_script_path.string();
    j["devtools_url"] = devtools_url;
    json viewports = json::array();
    for (const auto& vp : protocol.viewports) viewports.push_back(vp.str());
    j["viewports"] = viewports;
    j["step_timeout_ms"] = protocol.step_timeout_ms;
    j["total_budget_ms"] = protocol.total_budget_ms;
    j["keyframe_budget"] = protocol.keyframe_budget;
    j["frame_spill_dir"] = protocol.frame_spill_dir;
    j["max_rounds"] = repair_config.max_rounds;
    j["candidates_per_round"] = repair_config.candidates_per_round;
    j["target_total"] = repair_config.target_total.hundredths();
    j["patience_rounds"] = repair_config.patience_rounds;
    j["patience_min_gain"] = repair_config.patience_min_gain.hundredths();
    j["export_threshold"] = gate_policy.export_threshold.hundredths();
    return Sha256::short_hex(j.dump());
}

BackendFactory make_backend_factory(const RunConfig& config) {
    if (config.backend == "devtools") {
        exec::DevtoolsConfig dt;
        dt.websocket_url = config.devtools_url;
        dt.default_viewport = config.protocol.viewports;
        return [dt] { return std::make_unique<exec::DevtoolsBackend>(dt); };
    }
    return [] { return std::make_unique<exec::SyntheticBackend>(); };
}

std::shared_ptr<llm::ModelClient> make_model_client(const RunConfig& config) {
    if (!config.mock_script_path.empty()) {
        auto provider = llm::MockProvider::load(config.mock_script_path);
        llm::ProviderConfig pc;
        if (!config.provider_config_path.empty())
            pc = llm::load_provider_config(config.provider_config_path);
        pc.model = "scripted-mock";
        return std::make_shared<llm::ModelClient>(provider, pc, llm::virtual_clock(), true);
    }
    if (config.provider_config_path.empty()) return nullptr; // fast mode, no visual calls
    llm::ProviderConfig pc = llm::load_provider_config(config.provider_config_path);
    auto provider = std::make_shared<llm::HttpProvider>(pc);
    return std::make_shared<llm::ModelClient>(provider, pc, llm::system_clock());
}

// ---------------------------------------------------------------------------
// PageEvaluator
// ---------------------------------------------------------------------------

namespace {
std::string base_artifact_id(const std::string& id) {
    std::size_t pos = id.find('#');
    return pos == std::string::npos ? id : id.substr(0, pos);
}
} // namespace

PageEvaluator::PageEvaluator(const RunConfig& config, BackendFactory backend_factory,
                             std::shared_ptr<llm::ModelClient> client,
                             std::map<std::string, bench::BenchItem> items_by_id)
    : config_(config),
      backend_factory_(std::move(backend_factory)),
      client_(std::move(client)),
      items_(std::move(items_by_id)) {}

std::vector<llm::CallLogRecord> PageEvaluator::take_call_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    auto it = call_logs_.find(std::this_thread::get_id());
    if (it == call_logs_.end()) return {};
    auto out = std::move(it->second);
    call_logs_.erase(it);
    return out;
}

repair::Evaluation PageEvaluator::evaluate(const HtmlArtifact& artifact) {
    auto item_it = items_.find(base_artifact_id(artifact.id));
    if (item_it == items_.end())
        throw ConfigError("no benchmark item for page id '" + base_artifact_id(artifact.id) +
                          "'");
    const bench::BenchItem& item = item_it->second;
    Profile profile = item.has_interaction ? Profile::interactive : Profile::noninteractive;

    std::string run_id;
    {
        std::lock_guard<std::mutex> lock(log_mutex_);
        run_id = artifact.id + "#e" + std::to_string(++eval_counts_[artifact.id]);
    }

    repair::Evaluation eval;
    eval.run_id = run_id;
    eval.static_report = score::static_pass(artifact);

    if (!eval.static_report.ok) {
        // Malformed or trivial pages never reach the browser; they score
        // zero across the board and enter repair as Low-band rewrites.
        eval.trace.artifact_id = artifact.id;
        eval.trace.load_failed = true;
        score::ScoreReport report;
        report.score.profile = profile;
        report.total = report.score.total();
        report.tc_pass_rate = 0.0;
        report.tc_pass_rate_num = 0;
        report.tc_pass_rate_den = 1;
        report.run_id = run_id;
        report.evidence_refs["rendering"].push_back(
            eval.static_report.malformed ? "static:malformed" : "static:trivial");
        eval.report = std::move(report);
        return eval;
    }

    auto backend = backend_factory_();
    HtmlArtifact exec_artifact = artifact;
    exec_artifact.interactive = item.has_interaction;
    eval.trace = exec::run_protocol(exec_artifact, config_.protocol, *backend);

    for (const auto& tc : item.test_cases)
        eval.tc_results.push_back(exec::run_test_case(exec_artifact, tc, *backend, config_.protocol));

    score::FunctionalityScore functionality =
        score::score_functionality(eval.tc_results, profile);
    score::DeterministicScores deterministic =
        score::score_deterministic(eval.trace, eval.static_report, profile);
    std::set<score::GuardrailFlag> flags = score::guardrail_flags(eval.trace, eval.static_report);

    std::optional<score::VisualOutcome> visual;
    if (config_.mode == "full" && client_ && !eval.trace.keyframes.empty()) {
        score::ObjectiveMetrics metrics =
            score::build_objective_metrics(eval.trace, eval.static_report);
        auto session = client_->session(artifact.id);
        visual = score::score_visual(item.prompt, eval.trace, eval.static_report, metrics,
                                     session);
        eval.analyst = visual->analyst;
        std::lock_guard<std::mutex> lock(log_mutex_);
        auto& log = call_logs_[std::this_thread::get_id()];
        for (const auto& rec : session.log()) log.push_back(rec);
    }

    eval.report = score::assemble_report(profile, functionality, deterministic, visual, flags,
                                         run_id);
    return eval;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

namespace {

std::atomic<bool> g_drain{false};

void run_pool(int workers, std::size_t jobs, const std::function<void(std::size_t)>& work) {
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (;;) {
            if (g_drain.load()) return;
            std::size_t index = next.fetch_add(1);
            if (index >= jobs) return;
            work(index);
        }
    };
    if (workers <= 1) {
        loop();
        return;
    }
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(loop);
    for (auto& t : threads) t.join();
}

bool marker_matches(const fs::path& marker, const std::string& digest) {
    if (!fs::exists(marker)) return false;
    try {
        json j = json::parse(read_text_file(marker));
        return j.value("config_digest", "") == digest;
    } catch (...) {
        return false;
    }
}

void write_marker(const fs::path& marker, const std::string& digest) {
    json j;
    j["config_digest"] = digest;
    write_text_file(marker, j.dump() + "\n");
}

void write_call_log(const fs::path& path, const std::vector<llm::CallLogRecord>& records) {
    std::vector<json> lines;
    for (const auto& r : records) lines.push_back(llm::to_json(r));
    write_jsonl(path, lines);
}

std::vector<const HtmlArtifact*> sorted_pages(const std::vector<HtmlArtifact>& pages) {
    std::vector<const HtmlArtifact*> out;
    for (const auto& p : pages) out.push_back(&p);
    std::sort(out.begin(), out.end(),
              [](const HtmlArtifact* a, const HtmlArtifact* b) { return a->id < b->id; });
    return out;
}

} // namespace

void request_drain() { g_drain.store(true); }

// ---------------------------------------------------------------------------
// Evaluate batch
// ---------------------------------------------------------------------------

std::vector<PageOutcome> run_evaluate_batch(const RunConfig& config,
                                            const std::vector<HtmlArtifact>& pages,
                                            const std::vector<bench::BenchItem>& items) {
    config.check();
    if (config.out_dir.empty()) throw ConfigError("evaluate: --out is required");
    fs::create_directories(config.out_dir / "pages");
    const std::string digest = config.digest();

    std::map<std::string, bench::BenchItem> item_map;
    for (const auto& item : items) item_map[item.id] = item;

    auto client = make_model_client(config);
    PageEvaluator evaluator(config, make_backend_factory(config), client, item_map);

    auto order = sorted_pages(pages);
    std::vector<PageOutcome> outcomes(order.size());

    run_pool(config.workers, order.size(), [&](std::size_t index) {
        const HtmlArtifact& page = *order[index];
        PageOutcome& outcome = outcomes[index];
        outcome.artifact_id = page.id;
        fs::path dir = config.out_dir / "pages" / page.id;
        fs::path marker = dir / "_done_evaluate.json";
        if (marker_matches(marker, digest)) {
            outcome.ok = true;
            outcome.skipped = true;
            return;
        }
        try {
            fs::create_directories(dir);
            repair::Evaluation eval = evaluator.evaluate(page);
            write_text_file(dir / "report.json",
                            score::score_report_to_json(eval.report).dump(2) + "\n");
            write_jsonl(dir / "trace.jsonl", trace_to_lines(eval.trace));
            std::vector<json> tc_lines;
            for (const auto& tc : eval.tc_results) tc_lines.push_back(exec::tc_result_to_json(tc));
            write_jsonl(dir / "tc_results.jsonl", tc_lines);
            write_text_file(dir / "static.json",
                            score::static_report_to_json(eval.static_report).dump(2) + "\n");
            write_call_log(dir / "llm_log.jsonl", evaluator.take_call_log());
            write_marker(marker, digest);
            outcome.ok = true;
        } catch (const Error& e) {
            evaluator.take_call_log();
            outcome.error = e.what();
            write_text_file(dir / "_error.json", json{{"error", e.what()}}.dump() + "\n");
        }
    });

    // Merged views are rebuilt from page directories in sorted id order, so
    // they are identical whatever the worker interleaving was.
    std::vector<json> merged_reports;
    std::vector<json> merged_traces;
    std::vector<json> failures;
    for (const auto* page : order) {
        fs::path dir = config.out_dir / "pages" / page->id;
        if (fs::exists(dir / "_done_evaluate.json")) {
            json report = json::parse(read_text_file(dir / "report.json"));
            merged_reports.push_back({{"artifact_id", page->id}, {"report", report}});
            for (const auto& line : read_jsonl(dir / "trace.jsonl")) merged_traces.push_back(line);
        } else if (fs::exists(dir / "_error.json")) {
            json err = json::parse(read_text_file(dir / "_error.json"));
            failures.push_back({{"artifact_id", page->id}, {"error", err.value("error", "")}});
        }
    }
    write_jsonl(config.out_dir / "reports.jsonl", merged_reports);
    write_jsonl(config.out_dir / "traces.jsonl", merged_traces);
    write_jsonl(config.out_dir / "failures.jsonl", failures);
    return outcomes;
}

// ---------------------------------------------------------------------------
// Repair batch
// ---------------------------------------------------------------------------

std::vector<PageOutcome> run_repair_batch(const RunConfig& config,
                                          const std::vector<HtmlArtifact>& pages,
                                          const std::vector<bench::BenchItem>& items) {
    config.check();
    if (config.out_dir.empty()) throw ConfigError("repair: --out is required");
    if (!config.mock_script_path.empty() || !config.provider_config_path.empty()) {
        // ok: repair needs a generation provider
    } else {
        throw ConfigError("repair requires --provider-config or --mock-script");
    }
    fs::create_directories(config.out_dir / "pages");
    const std::string digest = config.digest();

    std::map<std::string, bench::BenchItem> item_map;
    for (const auto& item : items) item_map[item.id] = item;

    auto client = make_model_client(config);
    if (!client) throw ConfigError("repair requires a model client");
    PageEvaluator evaluator(config, make_backend_factory(config), client, item_map);

    auto order = sorted_pages(pages);
    std::vector<PageOutcome> outcomes(order.size());

    run_pool(config.workers, order.size(), [&](std::size_t index) {
        const HtmlArtifact& page = *order[index];
        PageOutcome& outcome = outcomes[index];
        outcome.artifact_id = page.id;
        fs::path dir = config.out_dir / "pages" / page.id;
        fs::path marker = dir / "_done_repair.json";
        if (marker_matches(marker, digest)) {
            outcome.ok = true;
            outcome.skipped = true;
            return;
        }
        try {
            fs::create_directories(dir);
            repair::RepairTrace trace =
                repair::run_repair(page, config.repair_config, *client, evaluator);
            write_jsonl(dir / "repair_log.jsonl", trace.to_log_lines());
            write_text_file(dir / "best.html", trace.best_artifact.html);
            write_text_file(dir / "best_report.json",
                            score::score_report_to_json(trace.best_report).dump(2) + "\n");
            auto log = evaluator.take_call_log();
            for (const auto& rec : trace.call_log) log.push_back(rec);
            write_call_log(dir / "llm_log.jsonl", log);
            write_marker(marker, digest);
            outcome.ok = true;
        } catch (const Error& e) {
            evaluator.take_call_log();
            outcome.error = e.what();
            write_text_file(dir / "_error.json", json{{"error", e.what()}}.dump() + "\n");
        }
    });

    std::vector<json> merged_logs;
    std::vector<json> failures;
    for (const auto* page : order) {
        fs::path dir = config.out_dir / "pages" / page->id;
        if (fs::exists(dir / "_done_repair.json")) {
            for (const auto& line : read_jsonl(dir / "repair_log.jsonl"))
                merged_logs.push_back(line);
        } else if (fs::exists(dir / "_error.json")) {
            json err = json::parse(read_text_file(dir / "_error.json"));
            failures.push_back({{"artifact_id", page->id}, {"error", err.value("error", "")}});
        }
    }
    write_jsonl(config.out_dir / "repair_logs.jsonl", merged_logs);
    write_jsonl(config.out_dir / "repair_failures.jsonl", failures);
    return outcomes;
}

// ---------------------------------------------------------------------------
// Trace line format
// ---------------------------------------------------------------------------

std::vector<json> trace_to_lines(const ExperienceTrace& trace) {
    std::vector<json> lines;
    json meta;
    meta["kind"] = "trace_meta";
    meta["artifact_id"] = trace.artifact_id;
    meta["layers_run"] = trace.layers_run;
    json kfs = json::array();
    for (const auto& kf : trace.keyframes)
        kfs.push_back({{"frame_hash", kf.frame_hash}, {"annotation", kf.annotation}});
    meta["keyframes"] = kfs;
    meta["coverage_meta"] = trace.coverage_meta;
    meta["load_failed"] = trace.load_failed;
    lines.push_back(meta);
    for (const auto& rec : trace.records) {
        json line = to_json(rec);
        line["kind"] = "record";
        line["artifact_id"] = trace.artifact_id;
        lines.push_back(line);
    }
    return lines;
}

ExperienceTrace trace_from_lines(const std::vector<json>& lines) {
    ExperienceTrace trace;
    bool meta_seen = false;
    for (const auto& line : lines) {
        std::string kind = line.value("kind", "");
        if (kind == "trace_meta") {
            trace.artifact_id = line.at("artifact_id").get<std::string>();
            trace.layers_run = line.at("layers_run").get<std::vector<int>>();
            for (const auto& kf : line.at("keyframes"))
                trace.keyframes.push_back({kf.at("frame_hash").get<std::string>(),
                                           kf.at("annotation").get<std::string>()});
            trace.coverage_meta =
                line.at("coverage_meta").get<std::map<std::string, std::int64_t>>();
            trace.load_failed = line.at("load_failed").get<bool>();
            meta_seen = true;
        } else if (kind == "record") {
            trace.records.push_back(evidence_record_from_json(line));
        }
    }
    if (!meta_seen) throw ValidationError("", "trace", "trace lines missing trace_meta");
    return trace;
}

std::vector<HtmlArtifact> load_pages(const std::filesystem::path& pages_file) {
    std::vector<HtmlArtifact> pages;
    for (const auto& line : read_jsonl(pages_file)) {
        HtmlArtifact page = artifact_from_json(line);
        // Extraction stage: model outputs may arrive fenced or with leading
        // prose. Unextractable text passes through for the static pass to
        // judge as malformed.
        try {
            page.html = llm::extract_html(page.html).html;
        } catch (const ParseError&) {
        }
        pages.push_back(std::move(page));
    }
    return pages;
}

} // namespace htmlcure::pipeline
