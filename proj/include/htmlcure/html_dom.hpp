#pragma once
// Minimal single-file HTML model. Enough structure for the deterministic
// backend and the static pass: element order, attributes, text, document
// hygiene facts. Not a browser-grade parser; pages are single-file by
// contract and external fetches are blocked anyway.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace htmlcure::dom {

struct Element {
    std::string tag;
    std::map<std::string, std::string> attrs;
    std::string text; // direct + descendant text, document order
    int index = 0;    // position in document order
    int depth = 0;

    std::string attr(const std::string& name) const {
        auto it = attrs.find(name);
        return it == attrs.end() ? "" : it->second;
    }
    bool has_attr(const std::string& name) const { return attrs.count(name) > 0; }
};

struct Document {
    bool parse_ok = false; // at least one element parsed
    bool has_doctype = false;
    std::string title;
    std::vector<Element> elements; // document order
    std::string body_text;
    std::size_t body_content_bytes = 0;
    int unclosed_tag_count = 0;
    bool html_closed = false;

    bool has_viewport_meta = false;
    bool has_style = false;  // <style>, style= attributes, or stylesheet link
    bool has_script = false;
    bool has_canvas = false;
    bool has_svg = false;
    bool has_raf = false; // requestAnimationFrame appears in script text
    std::vector<std::string> external_resources;
    std::vector<std::string> input_types;

    // Raw contents of <script type="text/x-synth-hooks">, used by the
    // synthetic backend's declared-behavior model; empty when absent.
    std::string hooks_source;
};

Document parse_document(const std::string& html);

// Selector forms: "#id", ".class", "text=visible text", plain tag name.
// Returns elements in document order.
std::vector<const Element*> select_all(const Document& doc, const std::string& selector);
const Element* select_first(const Document& doc, const std::string& selector);

bool is_interactive_tag(const Element& e);

} // namespace htmlcure::dom
