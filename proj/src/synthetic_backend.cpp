#include "htmlcure/synthetic_backend.hpp"

#include <algorithm>
#include <set>

#include "htmlcure/errors.hpp"
#include "htmlcure/sha256.hpp"

namespace htmlcure::exec {

namespace {

using nlohmann::json;

std::uint32_t fnv1a(const std::string& s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

struct Handler {
    std::string on;     // load | click | key | hover | input | tick
    std::string target; // selector, for element events
    std::string key;    // for key events
    json actions = json::array();
};

struct Hooks {
    std::map<std::string, json> state;
    std::vector<Handler> handlers;
    std::set<std::string> inert;
    bool no_keys = false;
};

Hooks parse_hooks(const std::string& source) {
    Hooks hooks;
    if (source.empty()) return hooks;
    json j;
    try {
        j = json::parse(source);
    } catch (const json::parse_error&) {
        return hooks; // malformed hook block behaves like no hooks
    }
    if (j.contains("state"))
        for (auto& [k, v] : j.at("state").items()) hooks.state[k] = v;
    if (j.contains("handlers"))
        for (const auto& h : j.at("handlers")) {
            Handler handler;
            handler.on = h.value("on", "");
            handler.target = h.value("target", "");
            handler.key = h.value("key", "");
            if (h.contains("do")) handler.actions = h.at("do");
            hooks.handlers.push_back(std::move(handler));
        }
    if (j.contains("inert"))
        for (const auto& s : j.at("inert")) hooks.inert.insert(s.get<std::string>());
    hooks.no_keys = j.value("no_keys", false);
    return hooks;
}

bool paintable_tag(const std::string& tag) {
    static const std::set<std::string> kSkip = {"html", "head", "body",  "meta", "title",
                                                "style", "script", "link", "br"};
    return kSkip.count(tag) == 0;
}

// "width: 640px" -> 640
std::optional<int> declared_width_px(const dom::Element& e) {
    std::string style = e.attr("style");
    std::size_t pos = style.find("width");
    if (pos == std::string::npos) return std::nullopt;
    pos = style.find(':', pos);
    if (pos == std::string::npos) return std::nullopt;
    ++pos;
    while (pos < style.size() && style[pos] == ' ') ++pos;
    int value = 0;
    bool any = false;
    while (pos < style.size() && style[pos] >= '0' && style[pos] <= '9') {
        value = value * 10 + (style[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any || style.compare(pos, 2, "px") != 0) return std::nullopt;
    return value;
}

bool style_hidden(const dom::Element& e) {
    const std::string style = e.attr("style");
    return style.find("display:none") != std::string::npos ||
           style.find("display: none") != std::string::npos;
}

class SyntheticSession final : public PageSession, private expr::Context {
public:
    explicit SyntheticSession(const std::string& html)
        : doc_(dom::parse_document(html)), hooks_(parse_hooks(doc_.hooks_source)) {
        state_ = hooks_.state;
        title_ = doc_.title;
        viewport_ = {1280, 800};
        load_ok_ = doc_.parse_ok && !doc_.elements.empty();
        if (load_ok_) {
            clock_ms_ += 30; // parse + first layout
            fire_event("load", "", "");
        }
    }

    bool load_ok() const override { return load_ok_; }

    void set_viewport(Viewport vp) override {
        viewport_ = vp;
        scroll_row_ = 0;
        clock_ms_ += 8;
    }
    Viewport viewport() const override { return viewport_; }

    Frame capture_frame() override {
        clock_ms_ += 5;
        return rasterize();
    }

    ActionResult click(const std::string& selector) override {
        return pointer_event("click", selector);
    }

    ActionResult click_text(const std::string& text) override {
        const dom::Element* e = resolve("text=" + text);
        if (!e) return not_found("text=" + text);
        return pointer_event("click", element_address(*e));
    }

    ActionResult hover(const std::string& selector) override {
        return pointer_event("hover", selector);
    }

    ActionResult type_text(const std::string& selector, const std::string& text) override {
        const dom::Element* e = resolve(selector);
        if (!e) return not_found(selector);
        ActionResult r;
        r.latency_ms = 16;
        bool changed = value_overrides_[e->index] != text;
        value_overrides_[e->index] = text;
        auto fired = fire_event("input", element_address(*e), "");
        r.state_changed = changed || fired.mutated;
        r.latency_ms += fired.delay_ms;
        clock_ms_ += r.latency_ms;
        return r;
    }

    ActionResult key_press(const std::string& key) override {
        ActionResult r;
        r.latency_ms = 16;
        if (!hooks_.no_keys) {
            auto fired = fire_event("key", "", key);
            r.state_changed = fired.mutated;
            r.latency_ms += fired.delay_ms;
        }
        clock_ms_ += r.latency_ms;
        return r;
    }

    ActionResult scroll_below_fold() override {
        ActionResult r;
        r.latency_ms = 16;
        int content = content_rows();
        int vp_rows = viewport_.height / kCellPx;
        if (content > vp_rows) {
            scroll_row_ = vp_rows;
            r.state_changed = true;
        }
        clock_ms_ += r.latency_ms;
        return r;
    }

    void wait(std::int64_t ms) override {
        // Tick handlers run at 5 Hz of virtual time.
        std::int64_t remaining = ms;
        while (remaining >= 200) {
            fire_event("tick", "", "");
            remaining -= 200;
        }
        clock_ms_ += ms;
    }

    EvalOutcomeValue eval(const std::string& expression) override {
        clock_ms_ += 2;
        EvalOutcomeValue out;
        try {
            out.value = expr::evaluate(expression, *this);
            out.ok = true;
        } catch (const expr::EvalError& e) {
            out.error = e.what();
        }
        return out;
    }

    bool element_exists(const std::string& selector) override { return resolve(selector) != nullptr; }

    bool element_visible(const std::string& selector) override {
        const dom::Element* e = resolve(selector);
        return e && visible(*e);
    }

    std::string element_text(const std::string& selector) override {
        const dom::Element* e = resolve(selector);
        return e ? effective_text(*e) : "";
    }

    std::string page_text() override {
        // Parsed text plus live text the parser never saw: overrides set by
        // handlers and data-bind mirrors of page state.
        std::string out = doc_.body_text;
        for (const auto& e : doc_.elements) {
            if (!paintable_tag(e.tag) || !visible(e)) continue;
            auto it = text_overrides_.find(e.index);
            if (it != text_overrides_.end()) {
                out += ' ';
                out += it->second;
                continue;
            }
            if (!e.attr("data-bind").empty()) {
                out += ' ';
                out += effective_text(e);
            }
        }
        return out;
    }

    std::string page_title() override { return title_; }

    std::string dom_digest() override {
        std::string repr;
        for (const auto& e : doc_.elements) {
            if (!paintable_tag(e.tag)) continue;
            repr += e.tag + "|" + e.attr("id") + "|" + effective_text(e) + "|" +
                    (visible(e) ? "1" : "0") + "|" + value_of(e) + ";";
        }
        repr += "::";
        for (const auto& [k, v] : state_) repr += k + "=" + v.dump() + ";";
        return Sha256::short_hex(repr);
    }

    std::vector<std::string> take_console_errors() override {
        auto out = std::move(console_errors_);
        console_errors_.clear();
        return out;
    }

    std::vector<std::string> take_exceptions() override {
        auto out = std::move(exceptions_);
        exceptions_.clear();
        return out;
    }

    std::vector<ControlRef> visible_controls(int limit) override {
        std::vector<ControlRef> out;
        for (const auto& e : doc_.elements) {
            if (!paintable_tag(e.tag) || !dom::is_interactive_tag(e) || !visible(e)) continue;
            ControlRef ref;
            ref.selector = element_address(e);
            ref.description = e.tag + (e.text.empty() ? "" : " '" + e.text + "'");
            out.push_back(std::move(ref));
            if (static_cast<int>(out.size()) >= limit) break;
        }
        return out;
    }

    bool has_horizontal_overflow() override {
        int vp_cols = viewport_.width / kCellPx;
        for (const auto& e : doc_.elements) {
            if (!paintable_tag(e.tag) || !visible(e)) continue;
            if (auto width = declared_width_px(e))
                if ((*width + kCellPx - 1) / kCellPx > vp_cols) return true;
        }
        return false;
    }

    bool keyboard_bindings_declared() override {
        if (hooks_.no_keys) return true;
        for (const auto& h : hooks_.handlers)
            if (h.on == "key") return true;
        return false;
    }

    bool animation_declared() override {
        if (doc_.has_raf) return true;
        for (const auto& h : hooks_.handlers)
            if (h.on == "tick") return true;
        return false;
    }

    bool canvas_present() override { return doc_.has_canvas; }

    std::int64_t elapsed_ms() const override { return clock_ms_; }

private:
    struct FireResult {
        bool fired = false;
        bool mutated = false;
        std::int64_t delay_ms = 0;
    };

    ActionResult not_found(const std::string& selector) {
        ActionResult r;
        r.ok = false;
        r.target_found = false;
        r.error = "target not found: " + selector;
        clock_ms_ += 16;
        return r;
    }

    ActionResult pointer_event(const std::string& event, const std::string& selector) {
        const dom::Element* e = resolve(selector);
        if (!e) return not_found(selector);
        ActionResult r;
        r.latency_ms = 16;
        std::string address = element_address(*e);
        if (!hooks_.inert.count(address) && !hooks_.inert.count(selector)) {
            auto fired = fire_event(event, address, "");
            // Handlers may be registered against the selector form used by
            // the test (e.g. "button:1") rather than the canonical address.
            if (!fired.fired && selector != address) fired = fire_event(event, selector, "");
            r.state_changed = fired.mutated;
            r.latency_ms += fired.delay_ms;
        }
        clock_ms_ += r.latency_ms;
        return r;
    }

    // Selector grammar of the DOM module plus "tag:nth" probe addresses.
    const dom::Element* resolve(const std::string& selector) {
        std::size_t colon = selector.find(':');
        if (colon != std::string::npos && selector.rfind("text=", 0) != 0 && colon > 0 &&
            selector[0] != '#' && selector[0] != '.') {
            std::string tag = selector.substr(0, colon);
            int nth = std::atoi(selector.c_str() + colon + 1);
            auto all = dom::select_all(doc_, tag);
            if (nth >= 0 && nth < static_cast<int>(all.size())) return all[nth];
            return nullptr;
        }
        return dom::select_first(doc_, selector);
    }

    std::string element_address(const dom::Element& e) {
        std::string id = e.attr("id");
        if (!id.empty()) return "#" + id;
        int nth = 0;
        for (const auto& other : doc_.elements) {
            if (other.index == e.index) break;
            if (other.tag == e.tag) ++nth;
        }
        return e.tag + ":" + std::to_string(nth);
    }

    FireResult fire_event(const std::string& event, const std::string& address,
                          const std::string& key) {
        FireResult result;
        for (const auto& h : hooks_.handlers) {
            if (h.on != event) continue;
            if (event == "key" && !h.key.empty() && h.key != key) continue;
            if ((event == "click" || event == "hover" || event == "input") && h.target != address)
                continue;
            result.fired = true;
            for (const auto& action : h.actions) apply_action(action, result);
        }
        return result;
    }

    void apply_action(const json& action, FireResult& result) {
        if (action.contains("set")) {
            const std::string var = action.at("set").get<std::string>();
            json to = action.value("to", json(true));
            if (state_[var] != to) {
                state_[var] = to;
                result.mutated = true;
            }
        } else if (action.contains("inc")) {
            const std::string var = action.at("inc").get<std::string>();
            double by = action.value("by", 1.0);
            double cur = state_.count(var) && state_[var].is_number()
                             ? state_[var].get<double>()
                             : 0.0;
            state_[var] = cur + by;
            result.mutated = true;
        } else if (action.contains("text")) {
            const dom::Element* e = resolve(action.at("text").get<std::string>());
            if (e) {
                std::string value = action.value("value", "");
                if (text_overrides_[e->index] != value) {
                    text_overrides_[e->index] = value;
                    result.mutated = true;
                }
            }
        } else if (action.contains("show") || action.contains("hide")) {
            bool show = action.contains("show");
            const dom::Element* e =
                resolve(action.at(show ? "show" : "hide").get<std::string>());
            if (e) {
                auto it = visibility_overrides_.find(e->index);
                if (it == visibility_overrides_.end() || it->second != show) {
                    visibility_overrides_[e->index] = show;
                    result.mutated = true;
                }
            }
        } else if (action.contains("title")) {
            std::string value = action.at("title").get<std::string>();
            if (title_ != value) {
                title_ = value;
                result.mutated = true;
            }
        } else if (action.contains("throw")) {
            exceptions_.push_back(action.at("throw").get<std::string>());
        } else if (action.contains("console_error")) {
            console_errors_.push_back(action.at("console_error").get<std::string>());
        } else if (action.contains("delay_ms")) {
            result.delay_ms += action.at("delay_ms").get<std::int64_t>();
        }
    }

    bool visible(const dom::Element& e) const {
        auto it = visibility_overrides_.find(e.index);
        if (it != visibility_overrides_.end()) return it->second;
        return !style_hidden(e);
    }

    std::string effective_text(const dom::Element& e) const {
        auto it = text_overrides_.find(e.index);
        if (it != text_overrides_.end()) return it->second;
        std::string bind = e.attr("data-bind");
        if (!bind.empty()) {
            auto st = state_.find(bind);
            if (st != state_.end())
                return st->second.is_string() ? st->second.get<std::string>() : st->second.dump();
        }
        return e.text;
    }

    std::string value_of(const dom::Element& e) const {
        auto it = value_overrides_.find(e.index);
        if (it != value_overrides_.end()) return it->second;
        return e.attr("value");
    }

    int content_rows() const {
        int rows = 0;
        for (const auto& e : doc_.elements)
            if (paintable_tag(e.tag) && visible(e)) rows += element_rows(e);
        return rows;
    }

    int element_rows(const dom::Element& e) const {
        if (e.tag == "h1" || e.tag == "h2") return 2;
        if (e.tag == "canvas" || e.tag == "svg" || e.tag == "img") {
            int h = std::atoi(e.attr("height").c_str());
            return std::max(1, h > 0 ? h / kCellPx : 4);
        }
        int cols = std::max(1, viewport_.width / kCellPx);
        int text_rows = static_cast<int>(effective_text(e).size()) / (cols * 4);
        return 1 + std::min(text_rows, 6);
    }

    Frame rasterize() {
        Frame f;
        f.viewport = viewport_;
        f.cols = std::max(1, viewport_.width / kCellPx);
        f.rows = std::max(1, viewport_.height / kCellPx);
        f.raster.assign(static_cast<std::size_t>(f.cols) * f.rows, 0);

        int row = 0;
        for (const auto& e : doc_.elements) {
            if (!paintable_tag(e.tag) || !visible(e)) continue;
            int height = element_rows(e);
            int width_cells = f.cols;
            if (auto w = declared_width_px(e))
                width_cells = std::max(1, (*w + kCellPx - 1) / kCellPx);
            std::uint8_t token = static_cast<std::uint8_t>(
                (fnv1a(e.tag + "#" + e.attr("id") + "|" + effective_text(e) + "|" + value_of(e)) %
                 251) +
                1);
            for (int r = 0; r < height; ++r) {
                int screen_row = row + r - scroll_row_;
                if (screen_row < 0 || screen_row >= f.rows) continue;
                for (int c = 0; c < std::min(width_cells, f.cols); ++c)
                    f.raster[static_cast<std::size_t>(screen_row) * f.cols + c] = token;
            }
            row += height;
        }

        std::string encoded;
        encoded.reserve(f.raster.size() + 16);
        encoded += std::to_string(f.cols) + "x" + std::to_string(f.rows) + ":";
        encoded.append(reinterpret_cast<const char*>(f.raster.data()), f.raster.size());
        f.hash = Sha256::short_hex(encoded);
        return f;
    }

    // expr::Context
    std::optional<expr::Value> state_var(const std::string& name) const override {
        auto it = state_.find(name);
        if (it == state_.end()) return std::nullopt;
        const json& v = it->second;
        if (v.is_boolean()) return expr::Value(v.get<bool>());
        if (v.is_number()) return expr::Value(v.get<double>());
        if (v.is_string()) return expr::Value(v.get<std::string>());
        return expr::Value(v.dump());
    }
    std::string document_title() const override { return title_; }
    std::string element_text(const std::string& selector) const override {
        const dom::Element* e = dom::select_first(doc_, selector);
        return e ? effective_text(*e) : "";
    }
    std::string element_value(const std::string& selector) const override {
        const dom::Element* e = dom::select_first(doc_, selector);
        return e ? value_of(*e) : "";
    }
    bool element_visible(const std::string& selector) const override {
        const dom::Element* e = dom::select_first(doc_, selector);
        return e && visible(*e);
    }
    bool element_exists(const std::string& selector) const override {
        return dom::select_first(doc_, selector) != nullptr;
    }
    int element_count(const std::string& selector) const override {
        return static_cast<int>(dom::select_all(doc_, selector).size());
    }
    bool body_text_contains(const std::string& needle) const override {
        if (doc_.body_text.find(needle) != std::string::npos) return true;
        for (const auto& [idx, text] : text_overrides_)
            if (text.find(needle) != std::string::npos) return true;
        return false;
    }

    dom::Document doc_;
    Hooks hooks_;
    std::map<std::string, json> state_;
    std::map<int, std::string> text_overrides_;
    std::map<int, std::string> value_overrides_;
    std::map<int, bool> visibility_overrides_;
    std::string title_;
    Viewport viewport_;
    int scroll_row_ = 0;
    bool load_ok_ = false;
    std::int64_t clock_ms_ = 0;
    std::vector<std::string> console_errors_;
    std::vector<std::string> exceptions_;
};

} // namespace

std::unique_ptr<PageSession> SyntheticBackend::open(const std::string& html) {
    return std::make_unique<SyntheticSession>(html);
}

} // namespace htmlcure::exec
