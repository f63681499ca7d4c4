#pragma once
// Provider-agnostic client for text and vision calls. Rendering, retries,
// response parsing, and audit logging live here; providers differ only in
// config plus a thin adapter. The scripted mock makes the whole pipeline
// network-free and deterministic.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "htmlcure/core.hpp"
#include "htmlcure/prompts.hpp"

namespace htmlcure::llm {

struct RenderError : Error {
    RenderError(std::string placeholder, const std::string& what)
        : Error(what), missing_placeholder(std::move(placeholder)) {}
    std::string missing_placeholder;
};

// Exact template body with substitutions, no other mutation. Every
// placeholder in the template must be bound; extra bindings are ignored.
std::string render(TemplateKey key, const std::map<std::string, std::string>& bindings);

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

struct Attachment {
    std::string id;         // frame hash or file reference
    std::string media_type; // e.g. "image/x-portable-graymap"
    std::string data;       // raw bytes; may be empty for reference-only
};

struct ProviderRequest {
    TemplateKey key = TemplateKey::generation;
    std::string prompt;
    std::vector<Attachment> attachments;
    std::string scope;  // artifact id owning this call sequence
    int ordinal = 0;    // per-scope, per-key call ordinal
};

struct ProviderResponse {
    std::string text;
    std::optional<std::int64_t> tokens;
};

// One attempt. Throws ProviderError / TimeoutError on failure.
class Provider {
public:
    virtual ~Provider() = default;
    virtual const std::string& provider_name() const = 0;
    virtual const std::string& model_name() const = 0;
    virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::int64_t backoff_ms = 200;
};

struct ProviderConfig {
    std::string endpoint;
    std::string model;
    std::string auth_token_env = "HTMLCURE_API_TOKEN"; // env var NAME only
    int max_output_tokens = 30000;
    double temperature = 0.0; // scorer/analyst calls require 0
    RetryPolicy retry;
    std::int64_t timeout_ms = 600000;
    int max_in_flight = 4;
};

ProviderConfig provider_config_from_json(const json& j);
ProviderConfig load_provider_config(const std::filesystem::path& path);

// Wall clock for the HTTP path, virtual clock for deterministic runs.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

std::shared_ptr<Clock> system_clock();
std::shared_ptr<Clock> virtual_clock(); // monotone counter, sleep advances it

// ---------------------------------------------------------------------------
// Scripted mock provider
// ---------------------------------------------------------------------------
// Script file: one JSON object per line.
//   {"key":"scorer","ordinal":0,"response":"..."}            inline text
//   {"key":"repair","ordinal":1,"response_ref":"blob.txt"}   file next to script
//   {"key":"analyst","default":true,"response":"..."}        per-key fallback
//   {"key":"repair","ordinal":0,"fail":"provider","fail_times":2,"response":"..."}
// Entries may carry "scope": "<artifact id>" to bind to one page; unscoped
// entries match any page. Ordinals count calls per (scope, key).

class MockProvider final : public Provider {
public:
    MockProvider();

    static std::shared_ptr<MockProvider> load(const std::filesystem::path& script_path);

    void add_entry(TemplateKey key, int ordinal, std::string response, std::string scope = "");
    void add_default(TemplateKey key, std::string response);
    void add_failing_entry(TemplateKey key, int ordinal, const std::string& fail_kind,
                           int fail_times, std::string response_after, std::string scope = "");

    const std::string& provider_name() const override;
    const std::string& model_name() const override;
    ProviderResponse complete(const ProviderRequest& request) override;

private:
    struct Entry {
        std::string scope;
        int ordinal = -1; // -1 = default
        std::string response;
        std::string fail_kind; // "" | "provider" | "timeout"
        int fail_times = 0;
        int failures_served = 0;
    };
    Entry* find(const ProviderRequest& request);

    std::mutex mutex_;
    std::map<std::string, std::vector<Entry>> entries_; // by template key name
};

// ---------------------------------------------------------------------------
// HTTP provider (chat-style JSON body)
// ---------------------------------------------------------------------------

class HttpProvider final : public Provider {
public:
    explicit HttpProvider(ProviderConfig config);
    const std::string& provider_name() const override;
    const std::string& model_name() const override;
    ProviderResponse complete(const ProviderRequest& request) override;

private:
    ProviderConfig config_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct CallLogRecord {
    std::string scope;
    std::string key;
    int ordinal = 0;
    int attempts = 0;
    bool ok = false;
    bool safety_retry = false;
    std::string provider;
    std::string model;
    std::string error;
    std::int64_t timestamp_ms = 0;
    std::optional<std::int64_t> tokens;
};

json to_json(const CallLogRecord& r);

class ModelClient {
public:
    // deterministic_log_time replaces wall-clock log timestamps with the
    // per-session call ordinal, keeping audit logs byte-stable across runs.
    ModelClient(std::shared_ptr<Provider> provider, ProviderConfig config,
                std::shared_ptr<Clock> clock, bool deterministic_log_time = false);

    // Per-artifact call scope: ordinal counters and the audit log are local
    // to the session, so worker interleaving cannot change any page's view.
    class Session {
    public:
        Session(ModelClient& client, std::string scope);

        // Renders nothing; callers pass the final prompt. Retries per policy;
        // generation calls retry once more with the safety suffix after a
        // refusal-classified response.
        std::string call(TemplateKey key, const std::string& prompt,
                         const std::vector<Attachment>& attachments = {});

        const std::vector<CallLogRecord>& log() const { return log_; }

    private:
        ModelClient& client_;
        std::string scope_;
        std::map<std::string, int> ordinals_;
        std::vector<CallLogRecord> log_;
    };

    Session session(const std::string& artifact_id) { return Session(*this, artifact_id); }

    const ProviderConfig& config() const { return config_; }
    Provider& provider() { return *provider_; }

private:
    friend class Session;
    void acquire_slot();
    void release_slot();

    std::shared_ptr<Provider> provider_;
    ProviderConfig config_;
    std::shared_ptr<Clock> clock_;
    bool deterministic_log_time_ = false;
    std::mutex slot_mutex_;
    std::condition_variable slot_cv_;
    int in_flight_ = 0;
};

// Response classified as a provider-safety refusal (no HTML, refusal phrasing).
bool looks_like_refusal(const std::string& response);

// ---------------------------------------------------------------------------
// Structured response parsing
// ---------------------------------------------------------------------------

struct AnalystRequirement {
    std::string requirement;
    std::string status; // done | broken | missing
    std::string evidence;
};

struct AnalystRecord {
    std::string page_type;
    std::string visual_state;
    std::vector<std::string> visual_elements;
    std::vector<std::string> template_like_signals;
    std::vector<std::string> distinctive_design_signals;
    std::string design_specificity;
    std::vector<std::string> working;
    std::vector<std::string> broken;
    std::string interaction_quality;
    std::string layout_notes;
    std::vector<AnalystRequirement> requirements;
    int summary_total = 0;
    int summary_done = 0;
    int summary_broken = 0;
    int summary_missing = 0;
    json raw;
};

struct ScorerDimension {
    double score = 0;
    std::string reason;
};

struct ScorerRecord {
    ScorerDimension rendering;
    ScorerDimension visual_design;
    ScorerDimension functionality;
    ScorerDimension interaction;
    ScorerDimension code_quality;
    double total_score = 0;
    std::vector<std::string> bugs;
    std::vector<std::string> missing_features;
    std::vector<std::string> highlights;
    std::vector<std::string> improvement_hints;
    std::string summary;
    json raw;
};

struct Patch {
    std::string old_str;
    std::string new_str;
};

struct ContrastiveRecord {
    std::vector<std::string> improved;
    std::vector<std::string> regressed;
    std::vector<std::string> unchanged_issues;
    std::string priority_fix;
    bool degraded = false;
};

struct VisualDiagnosisRecord {
    std::vector<std::string> issues;
    std::vector<std::string> suggestions;
    std::vector<std::string> css_focus_areas;
};

struct VisualVerificationRecord {
    bool improved = false;
    bool functional_regression = false;
    std::vector<std::string> improvements;
    std::vector<std::string> regressions;
};

// All parsers tolerate one fenced wrapper around the JSON object and throw
// ParseError (with a path) on schema mismatch or inconsistent counts.
AnalystRecord parse_analyst(const std::string& raw);
ScorerRecord parse_scorer(const std::string& raw);
std::vector<Patch> parse_patches(const std::string& raw);
ContrastiveRecord parse_contrastive(const std::string& raw);
VisualDiagnosisRecord parse_visual_diagnosis(const std::string& raw);
VisualVerificationRecord parse_visual_verification(const std::string& raw);

// Entry point for the optional agent test phase: renders the interaction
// tester prompt for a served page. The agent loop itself is not wired up;
// callers receive the prompt to drive their own browser agent.
std::string render_interaction_tester_prompt(const std::string& page_url,
                                             const std::string& query,
                                             const std::string& interaction_guide);

struct ExtractedHtml {
    std::string html;
    bool leading_prose_stripped = false;
};

// Strips one optional fenced wrapper, drops (and flags) leading prose before
// the document start, and rejects empty, truncated, or non-HTML outputs.
ExtractedHtml extract_html(const std::string& raw);

} // namespace htmlcure::llm
