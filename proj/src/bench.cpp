#include "htmlcure/bench.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include "htmlcure/jsonl.hpp"

namespace htmlcure::bench {

namespace {

const std::array<std::string, 13> kStepKindNames = {
    "click",       "click_text",  "type_text",
    "hover",       "key_press",   "resize",
    "screenshot",  "screenshot_change_check", "eval_script",
    "assert_script", "assert_text", "visibility_check",
    "wait"};

constexpr std::int64_t kGlobalStepTimeoutMs = 10000;

} // namespace

const std::string& step_kind_name(StepKind k) { return kStepKindNames[static_cast<int>(k)]; }

std::optional<StepKind> step_kind_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kStepKindNames.size(); ++i)
        if (kStepKindNames[i] == name) return static_cast<StepKind>(i);
    return std::nullopt;
}

bool is_assertion_step(StepKind k) {
    return k == StepKind::assert_script || k == StepKind::assert_text ||
           k == StepKind::visibility_check || k == StepKind::screenshot_change_check;
}

// ---------------------------------------------------------------------------
// Step / item (de)serialization
// ---------------------------------------------------------------------------

json step_to_json(const Step& s) {
    json j;
    j["kind"] = step_kind_name(s.kind);
    switch (s.kind) {
        case StepKind::click:
        case StepKind::hover:
        case StepKind::visibility_check:
            j["target"] = s.target;
            break;
        case StepKind::click_text:
            j["text"] = s.text;
            break;
        case StepKind::type_text:
            j["target"] = s.target;
            j["text"] = s.text;
            break;
        case StepKind::key_press:
            j["key"] = s.key;
            break;
        case StepKind::resize:
            j["width"] = s.width;
            j["height"] = s.height;
            break;
        case StepKind::eval_script:
        case StepKind::assert_script:
            j["expression"] = s.expression;
            break;
        case StepKind::assert_text:
            if (!s.target.empty()) j["target"] = s.target;
            j["expected"] = s.expected;
            break;
        case StepKind::wait:
            j["ms"] = s.ms;
            break;
        case StepKind::screenshot:
        case StepKind::screenshot_change_check:
            break;
    }
    return j;
}

Step step_from_json(const json& j, const std::string& item_id) {
    if (!j.is_object() || !j.contains("kind"))
        throw ValidationError(item_id, "steps.kind", "item " + item_id + ": step missing kind");
    const std::string kind_name = j.at("kind").get<std::string>();
    auto kind = step_kind_from_name(kind_name);
    if (!kind)
        throw ValidationError(item_id, "steps.kind",
                              "item " + item_id + ": unknown step kind '" + kind_name + "'");
    Step s;
    s.kind = *kind;
    auto str_field = [&](const char* name, bool required) -> std::string {
        if (!j.contains(name)) {
            if (required)
                throw ValidationError(item_id, std::string("steps.") + name,
                                      "item " + item_id + ": step '" + kind_name +
                                          "' missing field '" + name + "'");
            return "";
        }
        return j.at(name).get<std::string>();
    };
    switch (s.kind) {
        case StepKind::click:
        case StepKind::hover:
        case StepKind::visibility_check:
            s.target = str_field("target", true);
            break;
        case StepKind::click_text:
            s.text = str_field("text", true);
            break;
        case StepKind::type_text:
            s.target = str_field("target", true);
            s.text = str_field("text", true);
            break;
        case StepKind::key_press:
            s.key = str_field("key", true);
            break;
        case StepKind::resize:
            if (!j.contains("width") || !j.contains("height"))
                throw ValidationError(item_id, "steps.resize",
                                      "item " + item_id + ": resize missing width/height");
            s.width = j.at("width").get<int>();
            s.height = j.at("height").get<int>();
            break;
        case StepKind::eval_script:
        case StepKind::assert_script:
            s.expression = str_field("expression", true);
            break;
        case StepKind::assert_text:
            s.target = str_field("target", false);
            s.expected = str_field("expected", true);
            break;
        case StepKind::wait:
            if (!j.contains("ms"))
                throw ValidationError(item_id, "steps.ms",
                                      "item " + item_id + ": wait missing ms");
            s.ms = j.at("ms").get<std::int64_t>();
            break;
        case StepKind::screenshot:
        case StepKind::screenshot_change_check:
            break;
    }
    return s;
}

json item_to_json(const BenchItem& item) {
    json j;
    j["id"] = item.id;
    j["category"] = family_name(item.category);
    j["sub_type"] = item.sub_type;
    j["difficulty"] = item.difficulty;
    j["prompt"] = item.prompt;
    j["has_interaction"] = item.has_interaction;
    json tcs = json::array();
    for (const auto& tc : item.test_cases) {
        json t;
        t["tc_id"] = tc.tc_id;
        // Weights serialize as decimals; rationals are reconstructed from the
        // shortest round-trip text on parse.
        double w = tc.weight.to_double();
        if (w == static_cast<double>(static_cast<std::int64_t>(w)))
            t["weight"] = static_cast<std::int64_t>(w);
        else
            t["weight"] = w;
        json steps = json::array();
        for (const auto& s : tc.steps) steps.push_back(step_to_json(s));
        t["steps"] = steps;
        tcs.push_back(t);
    }
    j["test_cases"] = tcs;
    return j;
}

BenchItem item_from_json(const json& j) {
    static const char* kRequired[] = {"id",     "category",        "sub_type",  "difficulty",
                                      "prompt", "has_interaction", "test_cases"};
    std::string id = j.contains("id") && j.at("id").is_string() ? j.at("id").get<std::string>()
                                                                : std::string("<unknown>");
    for (const char* field : kRequired)
        if (!j.contains(field))
            throw ValidationError(id, field, "item " + id + ": missing field '" + field + "'");
    BenchItem item;
    item.id = j.at("id").get<std::string>();
    try {
        item.category = family_from_name(j.at("category").get<std::string>());
    } catch (const DomainError& e) {
        throw ValidationError(item.id, "category", "item " + item.id + ": " + e.what());
    }
    item.sub_type = j.at("sub_type").get<std::string>();
    item.difficulty = j.at("difficulty").get<std::string>();
    if (item.difficulty != "easy" && item.difficulty != "medium" && item.difficulty != "hard")
        throw ValidationError(item.id, "difficulty",
                              "item " + item.id + ": bad difficulty '" + item.difficulty + "'");
    item.prompt = j.at("prompt").get<std::string>();
    item.has_interaction = j.at("has_interaction").get<bool>();
    for (const auto& t : j.at("test_cases")) {
        TestCase tc;
        if (!t.contains("tc_id") || !t.contains("weight") || !t.contains("steps"))
            throw ValidationError(item.id, "test_cases",
                                  "item " + item.id + ": test case missing tc_id/weight/steps");
        tc.tc_id = t.at("tc_id").get<std::string>();
        tc.weight = Rational::from_decimal(t.at("weight").dump());
        for (const auto& s : t.at("steps")) tc.steps.push_back(step_from_json(s, item.id));
        item.test_cases.push_back(std::move(tc));
    }
    return item;
}

// ---------------------------------------------------------------------------
// parse_release
// ---------------------------------------------------------------------------

std::vector<BenchItem> parse_release(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw ValidationError(dir.string(), "", "release directory not found: " + dir.string());

    std::vector<fs::path> item_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("items", 0) == 0 &&
            entry.path().extension() == ".jsonl")
            item_files.push_back(entry.path());
    }
    std::sort(item_files.begin(), item_files.end());
    if (item_files.empty())
        throw ValidationError(dir.string(), "", "no item files in release: " + dir.string());

    const fs::path pool_path = dir / "frozen_pool.txt";
    if (!fs::exists(pool_path))
        throw ValidationError(dir.string(), "frozen_pool.txt",
                              "missing frozen-pool selection file: " + pool_path.string());
    std::set<std::string> pool;
    {
        std::ifstream in(pool_path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) pool.insert(line);
        }
    }

    std::vector<BenchItem> items;
    std::set<std::string> seen_ids;
    for (const auto& file : item_files) {
        for (const auto& record : read_jsonl(file)) {
            BenchItem item = item_from_json(record);
            if (!seen_ids.insert(item.id).second)
                throw ValidationError(item.id, "id", "duplicate item id: " + item.id);
            std::vector<TestCase> scored;
            for (auto& tc : item.test_cases)
                if (pool.count(tc.tc_id)) scored.push_back(std::move(tc));
            item.test_cases = std::move(scored);
            items.push_back(std::move(item));
        }
    }
    return items;
}

// ---------------------------------------------------------------------------
// validate_item
// ---------------------------------------------------------------------------

namespace {

// Implementation-coupled assertion heuristic: a quoted selector literal
// (".btn-primary", "#panel"), a bare class-selector token, or a DOM query
// by class inside assertion text couples the check to one implementation.
bool assertion_is_implementation_coupled(const std::string& text) {
    if (text.find("querySelector") != std::string::npos ||
        text.find("getElementsByClassName") != std::string::npos)
        return true;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if (text[i] != '\'' && text[i] != '"') continue;
        char quote = text[i];
        std::size_t end = text.find(quote, i + 1);
        if (end == std::string::npos) break;
        std::string_view lit(text.data() + i + 1, end - i - 1);
        if (lit.size() >= 2 && (lit[0] == '.' || lit[0] == '#') &&
            (std::isalpha(static_cast<unsigned char>(lit[1])) || lit[1] == '_')) {
            bool selector_like = true;
            for (char c : lit.substr(1))
                if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
                    selector_like = false;
            if (selector_like) return true;
        }
        i = end;
    }
    return false;
}

} // namespace

ValidationReport validate_item(const BenchItem& item) {
    ValidationReport report;
    auto add = [&](const std::string& tc_id, std::string code, std::string message) {
        report.violations.push_back({item.id, tc_id, std::move(code), std::move(message)});
    };

    if (item.id.empty()) add("", "schema", "empty item id");
    if (item.prompt.empty()) add("", "schema", "empty prompt");
    if (item.test_cases.empty()) add("", "schema", "item has no scored test cases");

    for (const auto& tc : item.test_cases) {
        if (tc.steps.empty()) add(tc.tc_id, "empty_steps", "test case has no steps");
        if (!(tc.weight > Rational::integer(0)))
            add(tc.tc_id, "nonpositive_weight", "test case weight must be positive");

        bool has_assertion = false;
        for (const auto& s : tc.steps) {
            if (is_assertion_step(s.kind)) has_assertion = true;
            switch (s.kind) {
                case StepKind::resize:
                    if (s.width < 1 || s.height < 1)
                        add(tc.tc_id, "bad_resize", "resize dimensions must be >= 1");
                    break;
                case StepKind::wait:
                    if (s.ms <= 0) add(tc.tc_id, "bad_wait", "wait duration must be positive");
                    else if (s.ms > kGlobalStepTimeoutMs)
                        add(tc.tc_id, "bad_wait", "wait exceeds the global step timeout");
                    break;
                case StepKind::assert_script:
                    if (s.expression.empty())
                        add(tc.tc_id, "empty_assertion", "assert_script without expression");
                    else if (assertion_is_implementation_coupled(s.expression))
                        add(tc.tc_id, "implementation_coupled",
                            "assertion depends on class/id selector internals");
                    break;
                case StepKind::assert_text:
                    if (s.expected.empty())
                        add(tc.tc_id, "empty_assertion", "assert_text without expected text");
                    else if (assertion_is_implementation_coupled(s.expected))
                        add(tc.tc_id, "implementation_coupled",
                            "assertion depends on class/id selector internals");
                    break;
                case StepKind::click:
                case StepKind::hover:
                case StepKind::visibility_check:
                    if (s.target.empty()) add(tc.tc_id, "empty_target", "step without target");
                    break;
                default:
                    break;
            }
        }
        if (!tc.steps.empty() && !has_assertion)
            add(tc.tc_id, "no_assertion", "test case asserts nothing");
    }
    return report;
}

// ---------------------------------------------------------------------------
// audit_release
// ---------------------------------------------------------------------------

std::string normalize_prompt(const std::string& prompt) {
    std::string out;
    out.reserve(prompt.size());
    bool pending_space = false;
    for (unsigned char c : prompt) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
    while (!out.empty()) {
        char c = out.back();
        if (c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':') out.pop_back();
        else break;
    }
    return out;
}

AuditReport audit_release(const std::vector<BenchItem>& items,
                          const std::vector<std::string>& external_corpus) {
    AuditReport report;

    // Duplicate evidence: identical step lists across TCs of one item.
    for (const auto& item : items) {
        std::map<std::string, std::vector<std::string>> by_steps;
        for (const auto& tc : item.test_cases) {
            json steps = json::array();
            for (const auto& s : tc.steps) steps.push_back(step_to_json(s));
            by_steps[steps.dump()].push_back(tc.tc_id);
        }
        for (auto& [_, ids] : by_steps)
            if (ids.size() > 1) report.duplicate_evidence_groups.push_back(std::move(ids));
    }

    // Shallow visual: only screenshot/wait steps.
    for (const auto& item : items)
        for (const auto& tc : item.test_cases) {
            bool shallow = !tc.steps.empty();
            for (const auto& s : tc.steps)
                if (s.kind != StepKind::screenshot && s.kind != StepKind::wait) shallow = false;
            if (shallow) report.shallow_visual_tcs.push_back(tc.tc_id);
        }

    // Cross-template leftovers: same normalized prompt prefix in >= 2 families.
    constexpr std::size_t kPrefixLen = 40;
    std::map<std::string, std::vector<std::pair<Family, std::string>>> by_prefix;
    for (const auto& item : items) {
        std::string norm = normalize_prompt(item.prompt);
        if (norm.size() < kPrefixLen) continue;
        by_prefix[norm.substr(0, kPrefixLen)].emplace_back(item.category, item.id);
    }
    for (auto& [_, group] : by_prefix) {
        std::set<Family> families;
        for (const auto& [fam, id] : group) families.insert(fam);
        if (families.size() > 1) {
            std::vector<std::string> ids;
            for (const auto& [fam, id] : group) ids.push_back(id);
            report.cross_template_groups.push_back(std::move(ids));
        }
    }

    // Exact normalized prompt overlap with the external corpus.
    if (!external_corpus.empty()) {
        std::set<std::string> bench_prompts;
        for (const auto& item : items) bench_prompts.insert(normalize_prompt(item.prompt));
        for (const auto& record : external_corpus) {
            std::string norm = normalize_prompt(record);
            if (bench_prompts.count(norm)) {
                ++report.corpus_overlap_count;
                report.overlapping_prompts.push_back(norm);
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// release_stats
// ---------------------------------------------------------------------------

ReleaseStats release_stats(const std::vector<BenchItem>& items) {
    ReleaseStats stats;
    std::map<Family, std::set<std::string>> subtypes;
    std::set<std::string> all_subtypes;
    for (const auto& item : items) {
        auto& fam = stats.per_family[item.category];
        ++fam.items;
        fam.test_cases += static_cast<int>(item.test_cases.size());
        subtypes[item.category].insert(item.sub_type);
        all_subtypes.insert(item.sub_type);
        ++stats.total_items;
        stats.total_test_cases += static_cast<int>(item.test_cases.size());
        for (const auto& tc : item.test_cases)
            stats.total_steps += static_cast<int>(tc.steps.size());
        if (item.difficulty == "easy") ++stats.easy;
        else if (item.difficulty == "medium") ++stats.medium;
        else ++stats.hard;
        if (item.has_interaction) ++stats.interactive_items;
    }
    for (auto& [family, fam_stats] : stats.per_family)
        fam_stats.subtypes = static_cast<int>(subtypes[family].size());
    stats.total_subtypes = static_cast<int>(all_subtypes.size());
    return stats;
}

} // namespace htmlcure::bench
