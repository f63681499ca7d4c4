#include "htmlcure/model_client.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "htmlcure/jsonl.hpp"

namespace htmlcure::llm {

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

std::string render(TemplateKey key, const std::map<std::string, std::string>& bindings) {
    const PromptTemplate& tmpl = get_template(key);
    for (const auto& placeholder : tmpl.required_placeholders)
        if (!bindings.count(placeholder))
            throw RenderError(placeholder, "template '" + template_key_name(key) +
                                               "': unbound placeholder '" + placeholder + "'");
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string& body = tmpl.body;
    for (std::size_t i = 0; i < body.size();) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() &&
                   (std::islower(static_cast<unsigned char>(body[j])) ||
                    std::isdigit(static_cast<unsigned char>(body[j])) || body[j] == '_'))
                ++j;
            if (j < body.size() && body[j] == '}' && j > i + 1) {
                std::string name = body.substr(i + 1, j - i - 1);
                if (tmpl.required_placeholders.count(name)) {
                    out += bindings.at(name);
                    i = j + 1;
                    continue;
                }
            }
        }
        out += body[i++];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config and clocks
// ---------------------------------------------------------------------------

ProviderConfig provider_config_from_json(const json& j) {
    ProviderConfig c;
    c.endpoint = j.value("endpoint", "");
    c.model = j.value("model", "");
    c.auth_token_env = j.value("auth_token_env", c.auth_token_env);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.temperature = j.value("temperature", 0.0);
    if (j.contains("retry")) {
        c.retry.max_attempts = j.at("retry").value("max_attempts", c.retry.max_attempts);
        c.retry.backoff_ms = j.at("retry").value("backoff_ms", c.retry.backoff_ms);
    }
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    if (c.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (c.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    return c;
}

ProviderConfig load_provider_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("provider config " + path.string() + ": " + e.what());
    }
    return provider_config_from_json(j);
}

namespace {

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    }
    void sleep_ms(std::int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

class VirtualClock final : public Clock {
public:
    std::int64_t now_ms() override { return counter_.fetch_add(1) + 1; }
    void sleep_ms(std::int64_t ms) override { counter_ += ms; }

private:
    std::atomic<std::int64_t> counter_{0};
};

} // namespace

std::shared_ptr<Clock> system_clock() { return std::make_shared<SystemClock>(); }
std::shared_ptr<Clock> virtual_clock() { return std::make_shared<VirtualClock>(); }

// ---------------------------------------------------------------------------
// MockProvider
// ---------------------------------------------------------------------------

MockProvider::MockProvider() = default;

std::shared_ptr<MockProvider> MockProvider::load(const std::filesystem::path& script_path) {
    auto mock = std::make_shared<MockProvider>();
    for (const auto& record : read_jsonl(script_path)) {
        const std::string key_name = record.at("key").get<std::string>();
        template_key_from_name(key_name); // validate early
        Entry entry;
        entry.scope = record.value("scope", "");
        entry.ordinal = record.value("default", false) ? -1 : record.value("ordinal", -1);
        if (record.contains("response_ref")) {
            auto blob = script_path.parent_path() / record.at("response_ref").get<std::string>();
            entry.response = read_text_file(blob);
        } else {
            entry.response = record.value("response", "");
        }
        entry.fail_kind = record.value("fail", "");
        entry.fail_times = record.value("fail_times", entry.fail_kind.empty() ? 0 : 1 << 20);
        mock->entries_[key_name].push_back(std::move(entry));
    }
    return mock;
}

void MockProvider::add_entry(TemplateKey key, int ordinal, std::string response,
                             std::string scope) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[template_key_name(key)].push_back(
        {std::move(scope), ordinal, std::move(response), "", 0, 0});
}

void MockProvider::add_default(TemplateKey key, std::string response) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[template_key_name(key)].push_back({"", -1, std::move(response), "", 0, 0});
}

void MockProvider::add_failing_entry(TemplateKey key, int ordinal, const std::string& fail_kind,
                                     int fail_times, std::string response_after,
                                     std::string scope) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[template_key_name(key)].push_back(
        {std::move(scope), ordinal, std::move(response_after), fail_kind, fail_times, 0});
}

const std::string& MockProvider::provider_name() const {
    static const std::string n = "mock";
    return n;
}

const std::string& MockProvider::model_name() const {
    static const std::string n = "scripted";
    return n;
}

MockProvider::Entry* MockProvider::find(const ProviderRequest& request) {
    auto it = entries_.find(template_key_name(request.key));
    if (it == entries_.end()) return nullptr;
    // Scoped exact ordinal > unscoped exact ordinal > scoped default >
    // unscoped default.
    Entry* best = nullptr;
    int best_rank = 99;
    for (auto& entry : it->second) {
        if (!entry.scope.empty() && entry.scope != request.scope) continue;
        int rank;
        if (entry.ordinal == request.ordinal) rank = entry.scope.empty() ? 1 : 0;
        else if (entry.ordinal == -1) rank = entry.scope.empty() ? 3 : 2;
        else continue;
        if (rank < best_rank) {
            best = &entry;
            best_rank = rank;
        }
    }
    return best;
}

ProviderResponse MockProvider::complete(const ProviderRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    Entry* entry = find(request);
    if (!entry)
        throw ProviderError("mock script has no entry for key '" +
                            template_key_name(request.key) + "' ordinal " +
                            std::to_string(request.ordinal) + " scope '" + request.scope + "'");
    if (!entry->fail_kind.empty() && entry->failures_served < entry->fail_times) {
        ++entry->failures_served;
        if (entry->fail_kind == "timeout") throw TimeoutError("mock scripted timeout");
        throw ProviderError("mock scripted provider failure");
    }
    ProviderResponse resp;
    resp.text = entry->response;
    resp.tokens = static_cast<std::int64_t>(entry->response.size() / 4);
    return resp;
}

// ---------------------------------------------------------------------------
// HttpProvider
// ---------------------------------------------------------------------------

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("http provider requires an endpoint");
    name_ = "http:" + config_.endpoint;
}

const std::string& HttpProvider::provider_name() const { return name_; }
const std::string& HttpProvider::model_name() const { return config_.model; }

ProviderResponse HttpProvider::complete(const ProviderRequest& request) {
    // endpoint form: http(s)://host[:port][/path]
    std::string url = config_.endpoint;
    std::string path = "/v1/chat/completions";
    std::size_t scheme = url.find("://");
    if (scheme != std::string::npos) {
        std::size_t slash = url.find('/', scheme + 3);
        if (slash != std::string::npos) {
            path = url.substr(slash);
            url = url.substr(0, slash);
        }
    }

    httplib::Client client(url);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_ms / 1000),
                            static_cast<time_t>((config_.timeout_ms % 1000) * 1000));
    client.set_connection_timeout(10, 0);

    httplib::Headers headers;
    const char* token = config_.auth_token_env.empty()
                            ? nullptr
                            : std::getenv(config_.auth_token_env.c_str());
    if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);

    json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_output_tokens;
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const auto& att : request.attachments)
        content.push_back({{"type", "image"},
                           {"media_type", att.media_type},
                           {"id", att.id},
                           {"data", att.data}});
    body["messages"] = json::array({{{"role", "user"}, {"content", content}}});

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result) {
        if (result.error() == httplib::Error::ConnectionTimeout ||
            result.error() == httplib::Error::Read)
            throw TimeoutError("provider timed out: " + name_);
        throw ProviderError("provider connection failed: " + httplib::to_string(result.error()));
    }
    if (result->status != 200)
        throw ProviderError("provider returned HTTP " + std::to_string(result->status));

    json parsed;
    try {
        parsed = json::parse(result->body);
    } catch (const json::parse_error&) {
        throw ProviderError("provider returned non-JSON body");
    }
    ProviderResponse resp;
    if (parsed.contains("choices") && !parsed.at("choices").empty()) {
        const json& msg = parsed.at("choices").at(0).at("message");
        const json& content_field = msg.at("content");
        resp.text = content_field.is_string() ? content_field.get<std::string>()
                                              : content_field.dump();
    } else if (parsed.contains("content")) {
        const json& c = parsed.at("content");
        if (c.is_array() && !c.empty() && c.at(0).contains("text"))
            resp.text = c.at(0).at("text").get<std::string>();
        else
            resp.text = c.is_string() ? c.get<std::string>() : c.dump();
    } else {
        throw ProviderError("provider response missing content");
    }
    if (parsed.contains("usage") && parsed.at("usage").contains("output_tokens"))
        resp.tokens = parsed.at("usage").at("output_tokens").get<std::int64_t>();
    return resp;
}

// ---------------------------------------------------------------------------
// ModelClient
// ---------------------------------------------------------------------------

ModelClient::ModelClient(std::shared_ptr<Provider> provider, ProviderConfig config,
                         std::shared_ptr<Clock> clock, bool deterministic_log_time)
    : provider_(std::move(provider)),
      config_(std::move(config)),
      clock_(std::move(clock)),
      deterministic_log_time_(deterministic_log_time) {}

void ModelClient::acquire_slot() {
    std::unique_lock<std::mutex> lock(slot_mutex_);
    slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
}

void ModelClient::release_slot() {
    {
        std::lock_guard<std::mutex> lock(slot_mutex_);
        --in_flight_;
    }
    slot_cv_.notify_one();
}

ModelClient::Session::Session(ModelClient& client, std::string scope)
    : client_(client), scope_(std::move(scope)) {}

bool looks_like_refusal(const std::string& response) {
    if (response.find('<') != std::string::npos &&
        response.find("<html") != std::string::npos)
        return false;
    static const char* kMarkers[] = {"I cannot", "I can't",  "cannot assist",
                                     "can't help", "unable to help", "against policy",
                                     "I must decline", "refuse"};
    for (const char* marker : kMarkers)
        if (response.find(marker) != std::string::npos) return true;
    return false;
}

std::string ModelClient::Session::call(TemplateKey key, const std::string& prompt,
                                       const std::vector<Attachment>& attachments) {
    ProviderRequest request;
    request.key = key;
    request.prompt = prompt;
    request.attachments = attachments;
    request.scope = scope_;
    request.ordinal = ordinals_[template_key_name(key)]++;

    CallLogRecord rec;
    rec.scope = scope_;
    rec.key = template_key_name(key);
    rec.ordinal = request.ordinal;
    rec.provider = client_.provider_->provider_name();
    rec.model = client_.provider_->model_name();
    rec.timestamp_ms =
        client_.deterministic_log_time_ ? request.ordinal : client_.clock_->now_ms();

    const RetryPolicy& retry = client_.config_.retry;
    std::string last_error;
    for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        rec.attempts = attempt;
        try {
            client_.acquire_slot();
            ProviderResponse resp;
            try {
                resp = client_.provider_->complete(request);
            } catch (...) {
                client_.release_slot();
                throw;
            }
            client_.release_slot();

            if (key == TemplateKey::generation && !rec.safety_retry &&
                looks_like_refusal(resp.text)) {
                rec.safety_retry = true;
                request.prompt = prompt + "\n\n" + safety_retry_suffix();
                continue;
            }
            rec.ok = true;
            rec.tokens = resp.tokens;
            log_.push_back(rec);
            return resp.text;
        } catch (const TimeoutError& e) {
            last_error = e.what();
        } catch (const ProviderError& e) {
            last_error = e.what();
        }
        if (attempt < retry.max_attempts)
            client_.clock_->sleep_ms(retry.backoff_ms * attempt);
    }
    rec.ok = false;
    rec.error = last_error;
    log_.push_back(rec);
    throw ProviderError("call '" + template_key_name(key) + "' failed after " +
                        std::to_string(retry.max_attempts) + " attempts: " + last_error);
}

json to_json(const CallLogRecord& r) {
    json j;
    j["scope"] = r.scope;
    j["key"] = r.key;
    j["ordinal"] = r.ordinal;
    j["attempts"] = r.attempts;
    j["ok"] = r.ok;
    j["safety_retry"] = r.safety_retry;
    j["provider"] = r.provider;
    j["model"] = r.model;
    if (!r.error.empty()) j["error"] = r.error;
    j["timestamp_ms"] = r.timestamp_ms;
    if (r.tokens) j["tokens"] = *r.tokens;
    return j;
}

// ---------------------------------------------------------------------------
// Structured parsing
// ---------------------------------------------------------------------------

namespace {

std::string strip_one_fence(const std::string& raw) {
    std::string s = raw;
    auto trim = [](std::string& t) {
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(0, 1);
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    };
    trim(s);
    if (s.rfind("```", 0) == 0) {
        std::size_t nl = s.find('\n');
        std::size_t closing = s.rfind("```");
        if (nl != std::string::npos && closing != std::string::npos && closing > nl) {
            s = s.substr(nl + 1, closing - nl - 1);
            trim(s);
        }
    }
    return s;
}

json parse_json_object(const std::string& raw, const std::string& kind) {
    if (raw.empty()) throw ParseError(kind, kind + ": empty response");
    std::string body = strip_one_fence(raw);
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ParseError(kind, kind + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(kind, kind + ": expected a JSON object");
    return j;
}

std::vector<std::string> string_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, path + ": expected an array");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) throw ParseError(path, path + ": expected strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

const json& require(const json& j, const char* field, const std::string& kind) {
    if (!j.contains(field))
        throw ParseError(kind + "." + field, kind + ": missing field '" + field + "'");
    return j.at(field);
}

} // namespace

AnalystRecord parse_analyst(const std::string& raw) {
    json j = parse_json_object(raw, "analyst");
    AnalystRecord rec;
    rec.raw = j;
    rec.page_type = require(j, "page_type", "analyst").get<std::string>();
    rec.visual_state = require(j, "visual_state", "analyst").get<std::string>();
    rec.visual_elements = string_list(require(j, "visual_elements", "analyst"),
                                      "analyst.visual_elements");
    rec.template_like_signals = string_list(require(j, "template_like_signals", "analyst"),
                                            "analyst.template_like_signals");
    rec.distinctive_design_signals =
        string_list(require(j, "distinctive_design_signals", "analyst"),
                    "analyst.distinctive_design_signals");
    rec.design_specificity = require(j, "design_specificity", "analyst").get<std::string>();
    rec.working = string_list(require(j, "working", "analyst"), "analyst.working");
    rec.broken = string_list(require(j, "broken", "analyst"), "analyst.broken");
    rec.interaction_quality = require(j, "interaction_quality", "analyst").get<std::string>();
    rec.layout_notes = require(j, "layout_notes", "analyst").get<std::string>();

    int done = 0, broken = 0, missing = 0;
    for (const auto& r : require(j, "requirements", "analyst")) {
        AnalystRequirement req;
        req.requirement = require(r, "requirement", "analyst.requirements").get<std::string>();
        req.status = require(r, "status", "analyst.requirements").get<std::string>();
        req.evidence = r.value("evidence", "");
        if (req.status == "done") ++done;
        else if (req.status == "broken") ++broken;
        else if (req.status == "missing") ++missing;
        else
            throw ParseError("analyst.requirements.status",
                             "analyst: requirement status must be done, broken, or missing; got '" +
                                 req.status + "'");
        rec.requirements.push_back(std::move(req));
    }
    const json& summary = require(j, "summary", "analyst");
    rec.summary_total = require(summary, "total", "analyst.summary").get<int>();
    rec.summary_done = require(summary, "done", "analyst.summary").get<int>();
    rec.summary_broken = require(summary, "broken", "analyst.summary").get<int>();
    rec.summary_missing = require(summary, "missing", "analyst.summary").get<int>();
    if (rec.summary_total != static_cast<int>(rec.requirements.size()) ||
        rec.summary_done != done || rec.summary_broken != broken ||
        rec.summary_missing != missing)
        throw ParseError("analyst.summary",
                         "analyst: summary counts disagree with requirement statuses");
    return rec;
}

ScorerRecord parse_scorer(const std::string& raw) {
    json j = parse_json_object(raw, "scorer");
    ScorerRecord rec;
    rec.raw = j;
    auto dim = [&](const char* name) {
        const json& d = require(j, name, "scorer");
        ScorerDimension out;
        out.score = require(d, "score", std::string("scorer.") + name).get<double>();
        out.reason = d.value("reason", "");
        return out;
    };
    rec.rendering = dim("rendering");
    rec.visual_design = dim("visual_design");
    rec.functionality = dim("functionality");
    rec.interaction = dim("interaction");
    rec.code_quality = dim("code_quality");
    rec.total_score = require(j, "total_score", "scorer").get<double>();
    double sum = rec.rendering.score + rec.visual_design.score + rec.functionality.score +
                 rec.interaction.score + rec.code_quality.score;
    if (std::llround(sum * 100) != std::llround(rec.total_score * 100))
        throw ParseError("scorer.total_score",
                         "scorer: dimension scores do not sum to total_score");
    rec.bugs = string_list(require(j, "bugs", "scorer"), "scorer.bugs");
    rec.missing_features =
        string_list(require(j, "missing_features", "scorer"), "scorer.missing_features");
    rec.highlights = string_list(require(j, "highlights", "scorer"), "scorer.highlights");
    rec.improvement_hints =
        string_list(require(j, "improvement_hints", "scorer"), "scorer.improvement_hints");
    rec.summary = j.value("summary", "");
    return rec;
}

std::vector<Patch> parse_patches(const std::string& raw) {
    json j = parse_json_object(raw, "patches");
    const json& list = require(j, "patches", "patches");
    if (!list.is_array()) throw ParseError("patches", "patches: expected an array");
    std::vector<Patch> out;
    for (const auto& p : list) {
        Patch patch;
        patch.old_str = require(p, "old_str", "patches").get<std::string>();
        patch.new_str = require(p, "new_str", "patches").get<std::string>();
        if (patch.old_str.empty())
            throw ParseError("patches.old_str", "patches: old_str must be non-empty");
        out.push_back(std::move(patch));
    }
    if (out.empty()) throw ParseError("patches", "patches: empty patch list");
    return out;
}

ContrastiveRecord parse_contrastive(const std::string& raw) {
    json j = parse_json_object(raw, "contrastive");
    ContrastiveRecord rec;
    rec.improved = string_list(require(j, "improved", "contrastive"), "contrastive.improved");
    rec.regressed = string_list(require(j, "regressed", "contrastive"), "contrastive.regressed");
    rec.unchanged_issues = string_list(require(j, "unchanged_issues", "contrastive"),
                                       "contrastive.unchanged_issues");
    rec.priority_fix = require(j, "priority_fix", "contrastive").get<std::string>();
    return rec;
}

VisualDiagnosisRecord parse_visual_diagnosis(const std::string& raw) {
    json j = parse_json_object(raw, "visual_diag");
    VisualDiagnosisRecord rec;
    rec.issues = string_list(require(j, "issues", "visual_diag"), "visual_diag.issues");
    rec.suggestions =
        string_list(require(j, "suggestions", "visual_diag"), "visual_diag.suggestions");
    rec.css_focus_areas =
        string_list(require(j, "css_focus_areas", "visual_diag"), "visual_diag.css_focus_areas");
    return rec;
}

VisualVerificationRecord parse_visual_verification(const std::string& raw) {
    json j = parse_json_object(raw, "visual_verif");
    VisualVerificationRecord rec;
    rec.improved = require(j, "improved", "visual_verif").get<bool>();
    rec.functional_regression =
        require(j, "functional_regression", "visual_verif").get<bool>();
    rec.improvements =
        string_list(require(j, "improvements", "visual_verif"), "visual_verif.improvements");
    rec.regressions =
        string_list(require(j, "regressions", "visual_verif"), "visual_verif.regressions");
    return rec;
}

std::string render_interaction_tester_prompt(const std::string& page_url,
                                             const std::string& query,
                                             const std::string& interaction_guide) {
    return render(TemplateKey::tester, {{"page_url", page_url},
                                        {"query", query},
                                        {"interaction_guide", interaction_guide}});
}

// ---------------------------------------------------------------------------
// extract_html
// ---------------------------------------------------------------------------

ExtractedHtml extract_html(const std::string& raw) {
    if (raw.empty()) throw ParseError("html", "html extraction: empty response");
    std::string body = strip_one_fence(raw);
    if (body.empty()) throw ParseError("html", "html extraction: empty response");

    auto find_ci = [&](const char* needle) {
        std::string lower;
        lower.reserve(body.size());
        for (char c : body) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return lower.find(needle);
    };
    std::size_t doctype_pos = find_ci("<!doctype");
    std::size_t html_pos = find_ci("<html");
    std::size_t start = std::min(doctype_pos, html_pos);
    if (start == std::string::npos)
        throw ParseError("html", "html extraction: no HTML document in response");

    ExtractedHtml out;
    // Leading prose before the document start is dropped and flagged.
    std::string head = body.substr(0, start);
    out.leading_prose_stripped =
        head.find_first_not_of(" \t\r\n") != std::string::npos;
    out.html = body.substr(start);

    bool has_doctype = doctype_pos != std::string::npos;
    if (has_doctype || html_pos != std::string::npos) {
        std::string lower;
        for (char c : out.html)
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower.find("<html") != std::string::npos &&
            lower.find("</html>") == std::string::npos)
            throw ParseError("html", "html extraction: truncated document (unclosed </html>)");
    }
    return out;
}

} // namespace htmlcure::llm
