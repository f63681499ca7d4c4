#pragma once
// End-to-end orchestration: per-page evaluation (extraction, static pass,
// protocol, frozen TCs, visual, aggregation), the repair batch, and the
// resumable worker pool behind the CLI commands.

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "htmlcure/backend.hpp"
#include "htmlcure/bench.hpp"
#include "htmlcure/funnel.hpp"
#include "htmlcure/model_client.hpp"
#include "htmlcure/repair.hpp"
#include "htmlcure/scorer.hpp"

namespace htmlcure::pipeline {

struct RunConfig {
    std::string backend = "synthetic"; // synthetic | devtools
    std::string mode = "full";         // full | fast (skips the visual phase)
    int workers = 1;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::filesystem::path provider_config_path;
    std::filesystem::path mock_script_path; // non-empty selects the mock provider
    std::string devtools_url;
    exec::ProtocolConfig protocol;
    repair::RepairConfig repair_config;
    funnel::GatePolicy gate_policy;

    void check() const;
    std::string digest() const; // resumability key
};

// Backends are created per call; sessions never cross workers.
using BackendFactory = std::function<std::unique_ptr<exec::BrowserBackend>()>;

BackendFactory make_backend_factory(const RunConfig& config);
std::shared_ptr<llm::ModelClient> make_model_client(const RunConfig& config);

// Full evaluation pipeline for one artifact: static pass -> protocol -> frozen TCs ->
// visual (full mode) -> aggregation. Pages that fail the static pass get an
// all-zero report without touching the browser.
class PageEvaluator final : public repair::Evaluator {
public:
    PageEvaluator(const RunConfig& config, BackendFactory backend_factory,
                  std::shared_ptr<llm::ModelClient> client,
                  std::map<std::string, bench::BenchItem> items_by_id);

    repair::Evaluation evaluate(const HtmlArtifact& artifact) override;

    // Call records accumulated by the most recent evaluate() on this thread.
    std::vector<llm::CallLogRecord> take_call_log();

private:
    const RunConfig& config_;
    BackendFactory backend_factory_;
    std::shared_ptr<llm::ModelClient> client_;
    std::map<std::string, bench::BenchItem> items_;
    std::mutex log_mutex_;
    std::map<std::thread::id, std::vector<llm::CallLogRecord>> call_logs_;
    std::map<std::string, int> eval_counts_; // per-artifact run ordinals
};

struct PageOutcome {
    std::string artifact_id;
    bool ok = false;
    bool skipped = false; // already complete for this config digest
    std::string error;
};

// Batch drivers. Both are resumable: a page directory holding a matching
// _done marker is skipped, and merged outputs are rebuilt from page
// directories in sorted id order either way.
std::vector<PageOutcome> run_evaluate_batch(const RunConfig& config,
                                            const std::vector<HtmlArtifact>& pages,
                                            const std::vector<bench::BenchItem>& items);

std::vector<PageOutcome> run_repair_batch(const RunConfig& config,
                                          const std::vector<HtmlArtifact>& pages,
                                          const std::vector<bench::BenchItem>& items);

// Line-delimited trace format: one meta line, then one line per record.
std::vector<json> trace_to_lines(const ExperienceTrace& trace);
ExperienceTrace trace_from_lines(const std::vector<json>& lines);

std::vector<HtmlArtifact> load_pages(const std::filesystem::path& pages_file);

// Stops dispatching new pages; in-flight pages finish and flush.
void request_drain();

} // namespace htmlcure::pipeline
