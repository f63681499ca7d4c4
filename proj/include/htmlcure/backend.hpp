#pragma once
// Backend seam between the experience protocol and a browser. Two
// implementations: the deterministic synthetic backend (tests, fixtures,
// CI) and the DevTools wire-protocol client (real headless browser).
//
// Sessions are single-artifact and strictly sequential; the worker pool
// owns checkout. Given identical document text and step sequence, the
// synthetic backend returns byte-identical evidence.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "htmlcure/core.hpp"
#include "htmlcure/expr.hpp"

namespace htmlcure::exec {

struct BackendCapabilities {
    bool supports_screenshots = false;
    bool supports_script_eval = false;
    bool supports_input = false;
};

struct Frame {
    std::string hash;          // digest of raster bytes at canonical encoding
    std::vector<std::uint8_t> raster; // grid cells, row-major
    int cols = 0;
    int rows = 0;
    Viewport viewport;
};

struct ActionResult {
    bool ok = true;            // false only for faults (target not found)
    bool target_found = true;
    bool state_changed = false;
    std::int64_t latency_ms = 0;
    std::string error;
};

struct EvalOutcomeValue {
    bool ok = false;
    expr::Value value = false;
    std::string error;
};

struct ControlRef {
    std::string selector;    // stable probe address
    std::string description; // tag + visible text
};

class PageSession {
public:
    virtual ~PageSession() = default;

    virtual bool load_ok() const = 0;
    virtual void set_viewport(Viewport vp) = 0;
    virtual Viewport viewport() const = 0;

    virtual Frame capture_frame() = 0;

    virtual ActionResult click(const std::string& selector) = 0;
    virtual ActionResult click_text(const std::string& text) = 0;
    virtual ActionResult hover(const std::string& selector) = 0;
    virtual ActionResult type_text(const std::string& selector, const std::string& text) = 0;
    virtual ActionResult key_press(const std::string& key) = 0;
    virtual ActionResult scroll_below_fold() = 0;
    virtual void wait(std::int64_t ms) = 0;

    virtual EvalOutcomeValue eval(const std::string& expression) = 0;
    virtual bool element_exists(const std::string& selector) = 0;
    virtual bool element_visible(const std::string& selector) = 0;
    virtual std::string element_text(const std::string& selector) = 0;
    virtual std::string page_text() = 0;
    virtual std::string page_title() = 0;

    virtual std::string dom_digest() = 0;
    // Drained per call; the executor attaches them to the current step.
    virtual std::vector<std::string> take_console_errors() = 0;
    virtual std::vector<std::string> take_exceptions() = 0;

    // First visible interactive elements in DOM order.
    virtual std::vector<ControlRef> visible_controls(int limit) = 0;
    virtual bool has_horizontal_overflow() = 0;
    virtual bool keyboard_bindings_declared() = 0;
    virtual bool animation_declared() = 0;
    virtual bool canvas_present() = 0;

    // Milliseconds consumed so far. The synthetic backend runs a virtual
    // clock; the real backend reports wall time.
    virtual std::int64_t elapsed_ms() const = 0;
};

class BrowserBackend {
public:
    virtual ~BrowserBackend() = default;
    virtual const std::string& name() const = 0;
    virtual BackendCapabilities capabilities() const = 0;
    // Opens a session on the given document text. Throws TransportError on
    // connection-level failure; an unloadable page still yields a session
    // with load_ok() == false.
    virtual std::unique_ptr<PageSession> open(const std::string& html) = 0;
};

} // namespace htmlcure::exec
