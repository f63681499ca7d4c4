#pragma once
// Fixed prompt templates for the generation, evaluation, and repair agents.
// Bodies are frozen; braced fields are populated at runtime. Rendering
// substitutes only the declared placeholders, so literal braces in the JSON
// output contracts survive untouched.

#include <map>
#include <set>
#include <string>
#include <vector>

namespace htmlcure::llm {

enum class TemplateKey {
    generation,
    analyst,
    scorer,
    tester,
    repair,
    game_repair,
    contrastive,
    visual_diagnosis,
    visual_verification,
};

const std::string& template_key_name(TemplateKey key);
TemplateKey template_key_from_name(const std::string& name);
const std::vector<TemplateKey>& all_template_keys();

struct PromptTemplate {
    TemplateKey key = TemplateKey::generation;
    std::string body;
    std::set<std::string> required_placeholders;
};

const PromptTemplate& get_template(TemplateKey key);

// Appended once to the generation prompt after a provider-safety refusal.
const std::string& safety_retry_suffix();

// Placeholder tokens ({lowercase_identifier}) found in a template body.
std::set<std::string> scan_placeholders(const std::string& body);

} // namespace htmlcure::llm
