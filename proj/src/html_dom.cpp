#include "htmlcure/html_dom.hpp"

#include <algorithm>
#include <cctype>

namespace htmlcure::dom {

namespace {

bool is_void_tag(const std::string& tag) {
    static const char* kVoid[] = {"area", "base", "br",    "col",  "embed", "hr",    "img",
                                  "input", "link", "meta", "param", "source", "track", "wbr"};
    for (const char* v : kVoid)
        if (tag == v) return true;
    return false;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool ci_contains(const std::string& haystack, const std::string& needle) {
    return lower(haystack).find(lower(needle)) != std::string::npos;
}

struct Tag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    bool self_closing = false;
    std::size_t end = 0; // position just past '>'
};

// Parses the tag starting at src[pos] == '<'. Returns nullopt for stray '<'.
std::optional<Tag> parse_tag(const std::string& src, std::size_t pos) {
    Tag tag;
    std::size_t i = pos + 1;
    if (i >= src.size()) return std::nullopt;
    if (src[i] == '/') {
        tag.closing = true;
        ++i;
    }
    std::size_t name_start = i;
    while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '-'))
        ++i;
    if (i == name_start) return std::nullopt;
    tag.name = lower(src.substr(name_start, i - name_start));

    while (i < src.size() && src[i] != '>') {
        while (i < src.size() && std::isspace(static_cast<unsigned char>(src[i]))) ++i;
        if (i < src.size() && src[i] == '/') {
            tag.self_closing = true;
            ++i;
            continue;
        }
        if (i >= src.size() || src[i] == '>') break;
        std::size_t attr_start = i;
        while (i < src.size() && src[i] != '=' && src[i] != '>' && src[i] != '/' &&
               !std::isspace(static_cast<unsigned char>(src[i])))
            ++i;
        std::string attr_name = lower(src.substr(attr_start, i - attr_start));
        std::string attr_value;
        if (i < src.size() && src[i] == '=') {
            ++i;
            if (i < src.size() && (src[i] == '"' || src[i] == '\'')) {
                char quote = src[i++];
                std::size_t v_start = i;
                while (i < src.size() && src[i] != quote) ++i;
                attr_value = src.substr(v_start, i - v_start);
                if (i < src.size()) ++i;
            } else {
                std::size_t v_start = i;
                while (i < src.size() && src[i] != '>' &&
                       !std::isspace(static_cast<unsigned char>(src[i])))
                    ++i;
                attr_value = src.substr(v_start, i - v_start);
            }
        }
        if (!attr_name.empty()) tag.attrs[attr_name] = attr_value;
    }
    if (i >= src.size()) return std::nullopt; // tag never closed
    tag.end = i + 1;
    return tag;
}

void append_text(Document& doc, std::vector<int>& open_stack, const std::string& text) {
    std::string trimmed;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !trimmed.empty();
            continue;
        }
        if (pending_space) trimmed += ' ';
        pending_space = false;
        trimmed += static_cast<char>(c);
    }
    if (trimmed.empty()) return;
    for (int idx : open_stack) {
        auto& t = doc.elements[idx].text;
        if (!t.empty()) t += ' ';
        t += trimmed;
    }
    if (!doc.body_text.empty()) doc.body_text += ' ';
    doc.body_text += trimmed;
    doc.body_content_bytes += trimmed.size();
}

} // namespace

Document parse_document(const std::string& html) {
    Document doc;
    std::vector<int> open_stack;
    bool html_seen = false;
    std::size_t i = 0;

    while (i < html.size()) {
        if (html[i] != '<') {
            std::size_t next = html.find('<', i);
            if (next == std::string::npos) next = html.size();
            append_text(doc, open_stack, html.substr(i, next - i));
            i = next;
            continue;
        }
        if (html.compare(i, 4, "<!--") == 0) {
            std::size_t end = html.find("-->", i + 4);
            i = end == std::string::npos ? html.size() : end + 3;
            continue;
        }
        if (html.compare(i, 2, "<!") == 0) {
            std::size_t end = html.find('>', i);
            if (lower(html.substr(i, 9)) == "<!doctype") doc.has_doctype = true;
            i = end == std::string::npos ? html.size() : end + 1;
            continue;
        }
        auto tag = parse_tag(html, i);
        if (!tag) {
            append_text(doc, open_stack, "<");
            ++i;
            continue;
        }
        i = tag->end;

        if (tag->closing) {
            if (tag->name == "html") doc.html_closed = true;
            // Pop to the matching open tag; unmatched closes are ignored.
            for (int k = static_cast<int>(open_stack.size()) - 1; k >= 0; --k) {
                if (doc.elements[open_stack[k]].tag == tag->name) {
                    open_stack.resize(k);
                    break;
                }
            }
            continue;
        }

        if (tag->name == "html") html_seen = true;

        Element e;
        e.tag = tag->name;
        e.attrs = tag->attrs;
        e.index = static_cast<int>(doc.elements.size());
        e.depth = static_cast<int>(open_stack.size());
        doc.elements.push_back(e);
        int elem_idx = e.index;

        // Raw-text elements: consume to the closing tag.
        if (tag->name == "script" || tag->name == "style") {
            std::string close = "</" + tag->name;
            std::size_t end = lower(html).find(close, i);
            std::string raw = html.substr(i, (end == std::string::npos ? html.size() : end) - i);
            doc.elements[elem_idx].text = raw;
            if (end == std::string::npos) {
                i = html.size();
                ++doc.unclosed_tag_count;
            } else {
                std::size_t gt = html.find('>', end);
                i = gt == std::string::npos ? html.size() : gt + 1;
            }
            if (tag->name == "script") {
                std::string type = lower(doc.elements[elem_idx].attr("type"));
                if (type == "text/x-synth-hooks") {
                    doc.hooks_source = raw;
                } else {
                    doc.has_script = true;
                    if (raw.find("requestAnimationFrame") != std::string::npos)
                        doc.has_raf = true;
                }
            } else {
                doc.has_style = true;
            }
            continue;
        }

        if (!tag->self_closing && !is_void_tag(tag->name))
            open_stack.push_back(elem_idx);
    }

    doc.unclosed_tag_count += static_cast<int>(open_stack.size());

    for (const auto& e : doc.elements) {
        if (e.tag == "title") doc.title = e.text;
        if (e.tag == "meta" && lower(e.attr("name")) == "viewport") doc.has_viewport_meta = true;
        if (e.tag == "canvas") doc.has_canvas = true;
        if (e.tag == "svg") doc.has_svg = true;
        if (e.has_attr("style") && !e.attr("style").empty()) doc.has_style = true;
        if (e.tag == "link" && ci_contains(e.attr("rel"), "stylesheet")) {
            doc.has_style = true;
            std::string href = e.attr("href");
            if (href.rfind("http", 0) == 0 || href.rfind("//", 0) == 0)
                doc.external_resources.push_back(href);
        }
        if (e.tag == "script" || e.tag == "img" || e.tag == "iframe") {
            std::string src = e.attr("src");
            if (src.rfind("http", 0) == 0 || src.rfind("//", 0) == 0)
                doc.external_resources.push_back(src);
        }
        if (e.tag == "input") {
            std::string type = e.attr("type");
            doc.input_types.push_back(type.empty() ? "text" : lower(type));
        }
    }

    doc.parse_ok = html_seen || !doc.elements.empty();
    return doc;
}

std::vector<const Element*> select_all(const Document& doc, const std::string& selector) {
    std::vector<const Element*> out;
    if (selector.empty()) return out;
    if (selector[0] == '#') {
        std::string id = selector.substr(1);
        for (const auto& e : doc.elements)
            if (e.attr("id") == id) out.push_back(&e);
        return out;
    }
    if (selector[0] == '.') {
        std::string cls = selector.substr(1);
        for (const auto& e : doc.elements) {
            const std::string classes = " " + e.attr("class") + " ";
            if (classes.find(" " + cls + " ") != std::string::npos) out.push_back(&e);
        }
        return out;
    }
    if (selector.rfind("text=", 0) == 0) {
        std::string needle = selector.substr(5);
        for (const auto& e : doc.elements)
            if (!needle.empty() && e.text.find(needle) != std::string::npos &&
                is_interactive_tag(e))
                out.push_back(&e);
        return out;
    }
    for (const auto& e : doc.elements)
        if (e.tag == selector) out.push_back(&e);
    return out;
}

const Element* select_first(const Document& doc, const std::string& selector) {
    auto all = select_all(doc, selector);
    return all.empty() ? nullptr : all.front();
}

bool is_interactive_tag(const Element& e) {
    if (e.tag == "button" || e.tag == "select" || e.tag == "textarea") return true;
    if (e.tag == "a" && e.has_attr("href")) return true;
    if (e.tag == "input") {
        std::string type = e.attr("type");
        return type != "hidden";
    }
    return e.has_attr("tabindex") || e.has_attr("onclick") || e.has_attr("data-action");
}

} // namespace htmlcure::dom
