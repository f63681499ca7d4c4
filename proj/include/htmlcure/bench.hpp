#pragma once
// Benchmark release handling: item and test-case schema, the frozen scored
// pool, the strict validator, and the release audit. Items are read-only
// after parse; validation of distinct items may run concurrently.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "htmlcure/core.hpp"
#include "htmlcure/points.hpp"

namespace htmlcure::bench {

// ---------------------------------------------------------------------------
// Step vocabulary (closed set)
// ---------------------------------------------------------------------------

enum class StepKind {
    click,
    click_text,
    type_text,
    hover,
    key_press,
    resize,
    screenshot,
    screenshot_change_check,
    eval_script,
    assert_script,
    assert_text,
    visibility_check,
    wait,
};

const std::string& step_kind_name(StepKind k);
std::optional<StepKind> step_kind_from_name(const std::string& name);
bool is_assertion_step(StepKind k);

struct Step {
    StepKind kind = StepKind::screenshot;
    // Kind-specific arguments, flattened:
    //   click/hover/visibility_check: target
    //   click_text: text
    //   type_text: target, text
    //   key_press: key
    //   resize: width, height
    //   eval_script/assert_script: expression
    //   assert_text: target (optional; page text when empty), expected
    //   wait: ms
    std::string target;
    std::string text;
    std::string key;
    std::string expression;
    std::string expected;
    int width = 0;
    int height = 0;
    std::int64_t ms = 0;

    bool operator==(const Step&) const = default;
};

struct TestCase {
    std::string tc_id;
    Rational weight = Rational::integer(1);
    std::vector<Step> steps;
    bool operator==(const TestCase&) const = default;
};

struct BenchItem {
    std::string id;
    Family category = Family::apps_tools;
    std::string sub_type;
    std::string difficulty; // easy | medium | hard
    std::string prompt;
    bool has_interaction = false;
    std::vector<TestCase> test_cases;
};

// ---------------------------------------------------------------------------
// Parse
// ---------------------------------------------------------------------------

// Reads every items*.jsonl file under `dir` plus the frozen-pool selection
// file (frozen_pool.txt, one tc_id per line). Each item's test_cases are
// restricted to the frozen scored pool. Unknown step kinds and schema
// violations raise ValidationError carrying item id and field path.
std::vector<BenchItem> parse_release(const std::filesystem::path& dir);

json step_to_json(const Step& s);
Step step_from_json(const json& j, const std::string& item_id);
json item_to_json(const BenchItem& item);
BenchItem item_from_json(const json& j);

// ---------------------------------------------------------------------------
// Validation (violations are data, not faults)
// ---------------------------------------------------------------------------

struct Violation {
    std::string item_id;
    std::string tc_id; // empty for item-level violations
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Schema errors, empty steps, non-positive weights, malformed step args,
// and implementation-coupled assertions (class/id selector literals inside
// assertion text).
ValidationReport validate_item(const BenchItem& item);

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

struct AuditReport {
    // tc_ids grouped by identical step list within one item.
    std::vector<std::vector<std::string>> duplicate_evidence_groups;
    // TCs whose only steps are screenshot/wait.
    std::vector<std::string> shallow_visual_tcs;
    // Item ids sharing a normalized prompt prefix across different families.
    std::vector<std::vector<std::string>> cross_template_groups;
    std::size_t corpus_overlap_count = 0;
    std::vector<std::string> overlapping_prompts;

    bool clean() const {
        return duplicate_evidence_groups.empty() && shallow_visual_tcs.empty() &&
               cross_template_groups.empty() && corpus_overlap_count == 0;
    }
};

// Lowercase, collapse whitespace runs, strip trailing punctuation. Applied
// byte-wise to ASCII; other UTF-8 sequences pass through unchanged.
std::string normalize_prompt(const std::string& prompt);

AuditReport audit_release(const std::vector<BenchItem>& items,
                          const std::vector<std::string>& external_corpus = {});

// ---------------------------------------------------------------------------
// Release statistics
// ---------------------------------------------------------------------------

struct FamilyStats {
    int items = 0;
    int test_cases = 0;
    int subtypes = 0;
};

struct ReleaseStats {
    std::map<Family, FamilyStats> per_family;
    int total_items = 0;
    int total_test_cases = 0;
    int total_subtypes = 0;
    int total_steps = 0;
    int easy = 0;
    int medium = 0;
    int hard = 0;
    int interactive_items = 0;
};

ReleaseStats release_stats(const std::vector<BenchItem>& items);

} // namespace htmlcure::bench
