#include "htmlcure/devtools.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "htmlcure/sha256.hpp"

namespace htmlcure::exec::ws {

// ---------------------------------------------------------------------------
// Frame codec
// ---------------------------------------------------------------------------

std::string encode_frame(const WsFrame& frame, bool mask, std::uint32_t masking_key) {
    std::string out;
    out += static_cast<char>((frame.fin ? 0x80 : 0x00) | (frame.opcode & 0x0f));
    std::size_t len = frame.payload.size();
    std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    if (len < 126) {
        out += static_cast<char>(mask_bit | static_cast<std::uint8_t>(len));
    } else if (len <= 0xffff) {
        out += static_cast<char>(mask_bit | 126);
        out += static_cast<char>((len >> 8) & 0xff);
        out += static_cast<char>(len & 0xff);
    } else {
        out += static_cast<char>(mask_bit | 127);
        for (int shift = 56; shift >= 0; shift -= 8)
            out += static_cast<char>((static_cast<std::uint64_t>(len) >> shift) & 0xff);
    }
    if (!mask) {
        out += frame.payload;
        return out;
    }
    std::uint8_t key[4] = {static_cast<std::uint8_t>(masking_key >> 24),
                           static_cast<std::uint8_t>(masking_key >> 16),
                           static_cast<std::uint8_t>(masking_key >> 8),
                           static_cast<std::uint8_t>(masking_key)};
    out.append(reinterpret_cast<const char*>(key), 4);
    for (std::size_t i = 0; i < len; ++i)
        out += static_cast<char>(frame.payload[i] ^ key[i % 4]);
    return out;
}

std::optional<WsFrame> decode_frame(const std::string& buffer, std::size_t& consumed) {
    consumed = 0;
    if (buffer.size() < 2) return std::nullopt;
    WsFrame frame;
    std::uint8_t b0 = static_cast<std::uint8_t>(buffer[0]);
    std::uint8_t b1 = static_cast<std::uint8_t>(buffer[1]);
    frame.fin = (b0 & 0x80) != 0;
    frame.opcode = b0 & 0x0f;
    bool masked = (b1 & 0x80) != 0;
    std::uint64_t len = b1 & 0x7f;
    std::size_t pos = 2;
    if (len == 126) {
        if (buffer.size() < 4) return std::nullopt;
        len = (static_cast<std::uint8_t>(buffer[2]) << 8) | static_cast<std::uint8_t>(buffer[3]);
        pos = 4;
    } else if (len == 127) {
        if (buffer.size() < 10) return std::nullopt;
        len = 0;
        for (int i = 0; i < 8; ++i)
            len = (len << 8) | static_cast<std::uint8_t>(buffer[2 + i]);
        pos = 10;
    }
    std::uint8_t key[4] = {0, 0, 0, 0};
    if (masked) {
        if (buffer.size() < pos + 4) return std::nullopt;
        for (int i = 0; i < 4; ++i) key[i] = static_cast<std::uint8_t>(buffer[pos + i]);
        pos += 4;
    }
    if (buffer.size() < pos + len) return std::nullopt;
    frame.payload.resize(len);
    for (std::uint64_t i = 0; i < len; ++i) {
        char c = buffer[pos + i];
        frame.payload[i] = masked ? static_cast<char>(c ^ key[i % 4]) : c;
    }
    consumed = pos + len;
    return frame;
}

// ---------------------------------------------------------------------------
// Handshake
// ---------------------------------------------------------------------------

namespace {

std::string base64_encode(const std::string& input) {
    static const char* chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    int val = 0;
    int bits = -6;
    for (unsigned char c : input) {
        val = (val << 8) + c;
        bits += 8;
        while (bits >= 0) {
            out += chars[(val >> bits) & 0x3f];
            bits -= 6;
        }
    }
    if (bits > -6) out += chars[((val << 8) >> (bits + 8)) & 0x3f];
    while (out.size() % 4) out += '=';
    return out;
}

constexpr const char* kWsGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

} // namespace

std::string handshake_request(const std::string& host, const std::string& path,
                              const std::string& key_b64) {
    std::string req;
    req += "GET " + (path.empty() ? "/" : path) + " HTTP/1.1\r\n";
    req += "Host: " + host + "\r\n";
    req += "Upgrade: websocket\r\n";
    req += "Connection: Upgrade\r\n";
    req += "Sec-WebSocket-Key: " + key_b64 + "\r\n";
    req += "Sec-WebSocket-Version: 13\r\n\r\n";
    return req;
}

std::string handshake_accept_value(const std::string& key_b64) {
    Sha1 h;
    h.update(key_b64 + kWsGuid);
    return base64_encode(h.finish());
}

// ---------------------------------------------------------------------------
// WsConnection
// ---------------------------------------------------------------------------

WsConnection::~WsConnection() { close(); }

void WsConnection::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void WsConnection::connect(const std::string& url, int timeout_ms) {
    if (url.rfind("ws://", 0) != 0)
        throw TransportError("unsupported websocket url (expected ws://): " + url);
    std::string rest = url.substr(5);
    std::string path = "/";
    std::size_t slash = rest.find('/');
    if (slash != std::string::npos) {
        path = rest.substr(slash);
        rest = rest.substr(0, slash);
    }
    std::string host = rest;
    std::string port = "80";
    std::size_t colon = rest.rfind(':');
    if (colon != std::string::npos) {
        host = rest.substr(0, colon);
        port = rest.substr(colon + 1);
    }

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    if (getaddrinfo(host.c_str(), port.c_str(), &hints, &result) != 0 || !result)
        throw TransportError("cannot resolve " + host + ":" + port);
    int fd = ::socket(result->ai_family, result->ai_socktype, result->ai_protocol);
    if (fd < 0) {
        freeaddrinfo(result);
        throw TransportError("cannot create socket");
    }
    if (::connect(fd, result->ai_addr, result->ai_addrlen) != 0) {
        freeaddrinfo(result);
        ::close(fd);
        throw TransportError("cannot connect to " + host + ":" + port);
    }
    freeaddrinfo(result);
    fd_ = fd;

    std::string key = base64_encode("htmlcure-ws-01");
    send_raw(handshake_request(host + ":" + port, path, key));

    // Read until the end of the HTTP response headers.
    std::string response;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (response.find("\r\n\r\n") == std::string::npos) {
        if (std::chrono::steady_clock::now() > deadline) {
            close();
            throw TransportError("websocket handshake timed out");
        }
        char buf[1024];
        ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) {
            close();
            throw TransportError("websocket handshake failed (connection closed)");
        }
        response.append(buf, static_cast<std::size_t>(n));
    }
    if (response.find(" 101 ") == std::string::npos) {
        close();
        throw TransportError("websocket upgrade rejected");
    }
    std::string expected = "Sec-WebSocket-Accept: " + handshake_accept_value(key);
    if (response.find(expected) == std::string::npos &&
        response.find(handshake_accept_value(key)) == std::string::npos) {
        close();
        throw TransportError("websocket accept key mismatch");
    }
    std::size_t header_end = response.find("\r\n\r\n") + 4;
    rx_buffer_ = response.substr(header_end);
}

void WsConnection::send_raw(const std::string& bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, 0);
        if (n <= 0) throw TransportError("websocket send failed");
        sent += static_cast<std::size_t>(n);
    }
}

void WsConnection::send_text(const std::string& payload) {
    if (fd_ < 0) throw TransportError("websocket not connected");
    WsFrame frame;
    frame.opcode = 0x1;
    frame.payload = payload;
    mask_counter_ = mask_counter_ * 1664525u + 1013904223u;
    send_raw(encode_frame(frame, true, mask_counter_));
}

std::optional<std::string> WsConnection::recv_text(int timeout_ms) {
    if (fd_ < 0) throw TransportError("websocket not connected");
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    std::string message; // reassembles fragmented text
    for (;;) {
        std::size_t consumed = 0;
        auto frame = decode_frame(rx_buffer_, consumed);
        if (frame) {
            rx_buffer_.erase(0, consumed);
            if (frame->opcode == 0x9) { // ping -> pong
                WsFrame pong;
                pong.opcode = 0xA;
                pong.payload = frame->payload;
                mask_counter_ = mask_counter_ * 1664525u + 1013904223u;
                send_raw(encode_frame(pong, true, mask_counter_));
                continue;
            }
            if (frame->opcode == 0x8) {
                close();
                throw TransportError("websocket closed by peer");
            }
            if (frame->opcode == 0x1 || frame->opcode == 0x0) {
                message += frame->payload;
                if (frame->fin) return message;
                continue;
            }
            continue; // ignore binary/pong
        }
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return std::nullopt;
        int wait_ms = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, std::max(1, wait_ms));
        if (rc < 0) throw TransportError("websocket poll failed");
        if (rc == 0) return std::nullopt;
        char buf[4096];
        ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) {
            close();
            throw TransportError("websocket connection lost");
        }
        rx_buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

} // namespace htmlcure::exec::ws

// ---------------------------------------------------------------------------
// DevtoolsClient
// ---------------------------------------------------------------------------

namespace htmlcure::exec {

DevtoolsClient::DevtoolsClient(DevtoolsConfig config) : config_(std::move(config)) {}

void DevtoolsClient::connect() { conn_.connect(config_.websocket_url); }

bool DevtoolsClient::connected() const { return conn_.connected(); }

void DevtoolsClient::pump(int timeout_ms) {
    auto text = conn_.recv_text(timeout_ms);
    if (!text) return;
    json msg;
    try {
        msg = json::parse(*text);
    } catch (const json::parse_error&) {
        return; // non-JSON frames are ignored
    }
    if (msg.contains("id") && !msg.at("id").is_null()) {
        responses_[msg.at("id").get<int>()] = msg;
    } else if (msg.contains("method")) {
        std::string session = msg.value("sessionId", "");
        events_.emplace_back(session + "|" + msg.at("method").get<std::string>(), msg);
    }
}

json DevtoolsClient::command(const std::string& method, json params,
                             const std::string& session_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    int id = next_id_++;
    json req;
    req["id"] = id;
    req["method"] = method;
    req["params"] = std::move(params);
    if (!session_id.empty()) req["sessionId"] = session_id;
    conn_.send_text(req.dump());

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(config_.command_timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        auto it = responses_.find(id);
        if (it != responses_.end()) {
            json response = std::move(it->second);
            responses_.erase(it);
            if (response.contains("error"))
                throw TransportError("devtools error on " + method + ": " +
                                     response.at("error").dump());
            return response.value("result", json::object());
        }
        pump(50);
    }
    throw TimeoutError("devtools command timed out: " + method);
}

std::vector<std::pair<std::string, json>> DevtoolsClient::take_events(
    const std::string& session_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::pair<std::string, json>> out;
    std::vector<std::pair<std::string, json>> keep;
    for (auto& [key, payload] : events_) {
        std::string session = key.substr(0, key.find('|'));
        if (session == session_id || session.empty())
            out.emplace_back(key.substr(key.find('|') + 1), payload);
        else
            keep.emplace_back(key, payload);
    }
    events_ = std::move(keep);
    return out;
}

// ---------------------------------------------------------------------------
// DevtoolsSession
// ---------------------------------------------------------------------------

namespace {

std::string selector_to_js(const std::string& selector) {
    // Mirrors the synthetic selector grammar: #id, .class, text=..., tag,
    // tag:nth.
    json sel = selector;
    std::string s = sel.dump();
    return "(function(){var s=" + s + ";"
           "if(s.startsWith('text=')){var t=s.slice(5);"
           " var els=document.querySelectorAll('button,a,input,select,textarea,[onclick]');"
           " for(var e of els){if((e.innerText||e.value||'').includes(t))return e;}return null;}"
           "var m=s.match(/^([a-z0-9-]+):(\\d+)$/);"
           "if(m){var all=document.getElementsByTagName(m[1]);return all[parseInt(m[2])]||null;}"
           "return document.querySelector(s);})()";
}

class DevtoolsSession final : public PageSession {
public:
    DevtoolsSession(const DevtoolsConfig& config, const std::string& html)
        : config_(config), client_(config) {
        start_ = std::chrono::steady_clock::now();
        try {
            client_.connect();
            json target = client_.command("Target.createTarget", {{"url", "about:blank"}});
            target_id_ = target.at("targetId").get<std::string>();
            json attach = client_.command(
                "Target.attachToTarget", {{"targetId", target_id_}, {"flatten", true}});
            session_id_ = attach.at("sessionId").get<std::string>();
            client_.command("Page.enable", json::object(), session_id_);
            client_.command("Runtime.enable", json::object(), session_id_);
            viewport_ = config_.default_viewport.empty() ? Viewport{1280, 800}
                                                         : config_.default_viewport.front();
            apply_viewport();
            json tree = client_.command("Page.getFrameTree", json::object(), session_id_);
            std::string frame_id = tree.at("frameTree").at("frame").at("id").get<std::string>();
            client_.command("Page.setDocumentContent",
                            {{"frameId", frame_id}, {"html", html}}, session_id_);
            load_ok_ = true;
        } catch (const TransportError&) {
            throw; // connection-level failure is a transport fault
        } catch (const TimeoutError&) {
            load_ok_ = false;
        }
    }

    ~DevtoolsSession() override {
        try {
            if (!target_id_.empty())
                client_.command("Target.closeTarget", {{"targetId", target_id_}});
        } catch (...) {
        }
    }

    bool load_ok() const override { return load_ok_; }

    void set_viewport(Viewport vp) override {
        viewport_ = vp;
        apply_viewport();
    }
    Viewport viewport() const override { return viewport_; }

    Frame capture_frame() override {
        json shot = client_.command("Page.captureScreenshot", {{"format", "png"}}, session_id_);
        std::string data = shot.value("data", "");
        Frame f;
        f.viewport = viewport_;
        // Encoded screenshot bytes stand in for the raster; deltas are
        // byte-change ratios of the canonical encoding.
        f.raster.assign(data.begin(), data.end());
        f.cols = viewport_.width;
        f.rows = viewport_.height;
        f.hash = Sha256::short_hex(data);
        return f;
    }

    ActionResult click(const std::string& selector) override {
        return run_action(selector, ".click()");
    }

    ActionResult click_text(const std::string& text) override {
        return run_action("text=" + text, ".click()");
    }

    ActionResult hover(const std::string& selector) override {
        return run_action(selector,
                          ".dispatchEvent(new MouseEvent('mouseover',{bubbles:true}))");
    }

    ActionResult type_text(const std::string& selector, const std::string& text) override {
        json t = text;
        return run_action(selector, ".value=" + t.dump() +
                                        ",el.dispatchEvent(new Event('input',{bubbles:true}))");
    }

    ActionResult key_press(const std::string& key) override {
        ActionResult r;
        auto t0 = std::chrono::steady_clock::now();
        std::string digest_before = dom_digest();
        try {
            client_.command("Input.dispatchKeyEvent",
                            {{"type", "keyDown"}, {"key", key}}, session_id_);
            client_.command("Input.dispatchKeyEvent", {{"type", "keyUp"}, {"key", key}},
                            session_id_);
        } catch (const TimeoutError&) {
            r.latency_ms = config_.command_timeout_ms + 1;
            return r;
        }
        r.latency_ms = elapsed_since(t0);
        r.state_changed = dom_digest() != digest_before;
        return r;
    }

    ActionResult scroll_below_fold() override {
        ActionResult r;
        auto t0 = std::chrono::steady_clock::now();
        json result = eval_json("(function(){var b=document.body.scrollHeight>window.innerHeight;"
                                "window.scrollTo(0,window.innerHeight);return b;})()");
        r.state_changed = result.value("value", false);
        r.latency_ms = elapsed_since(t0);
        return r;
    }

    void wait(std::int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }

    EvalOutcomeValue eval(const std::string& expression) override {
        EvalOutcomeValue out;
        try {
            json result = eval_json(expression);
            out.ok = true;
            if (result.contains("value")) {
                const json& v = result.at("value");
                if (v.is_boolean()) out.value = v.get<bool>();
                else if (v.is_number()) out.value = v.get<double>();
                else if (v.is_string()) out.value = v.get<std::string>();
                else out.value = v.dump();
            }
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    }

    bool element_exists(const std::string& selector) override {
        json r = eval_json(selector_to_js(selector) + "!==null");
        return r.value("value", false);
    }

    bool element_visible(const std::string& selector) override {
        json r = eval_json("(function(){var el=" + selector_to_js(selector) +
                           ";if(!el)return false;var s=getComputedStyle(el);"
                           "return s.display!=='none'&&s.visibility!=='hidden';})()");
        return r.value("value", false);
    }

    std::string element_text(const std::string& selector) override {
        json r = eval_json("(function(){var el=" + selector_to_js(selector) +
                           ";return el?(el.innerText||''):'';})()");
        return r.value("value", "");
    }

    std::string page_text() override {
        json r = eval_json("document.body?document.body.innerText:''");
        return r.value("value", "");
    }

    std::string page_title() override {
        json r = eval_json("document.title");
        return r.value("value", "");
    }

    std::string dom_digest() override {
        json r = eval_json(
            "document.documentElement.outerHTML.length+':'+document.title+':'+"
            "(document.body?document.body.childElementCount:0)");
        return Sha256::short_hex(r.value("value", ""));
    }

    std::vector<std::string> take_console_errors() override { return drain_events(false); }
    std::vector<std::string> take_exceptions() override { return drain_events(true); }

    std::vector<ControlRef> visible_controls(int limit) override {
        json r = eval_json(
            "(function(){var out=[];var els=document.querySelectorAll("
            "'button,a[href],input,select,textarea,[onclick],[tabindex]');"
            "for(var i=0;i<els.length&&out.length<" +
            std::to_string(limit) +
            ";i++){var e=els[i];var s=getComputedStyle(e);"
            "if(s.display==='none')continue;"
            "out.push(e.id?('#'+e.id):(e.tagName.toLowerCase()+':'+i));}"
            "return JSON.stringify(out);})()");
        std::vector<ControlRef> controls;
        try {
            json list = json::parse(r.value("value", "[]"));
            for (const auto& sel : list) controls.push_back({sel.get<std::string>(), ""});
        } catch (const json::parse_error&) {
        }
        return controls;
    }

    bool has_horizontal_overflow() override {
        json r = eval_json(
            "document.documentElement.scrollWidth>window.innerWidth+1");
        return r.value("value", false);
    }

    bool keyboard_bindings_declared() override {
        json r = eval_json(
            "document.documentElement.outerHTML.indexOf('keydown')>=0||"
            "document.documentElement.outerHTML.indexOf('keyup')>=0");
        return r.value("value", false);
    }

    bool animation_declared() override {
        json r = eval_json(
            "document.documentElement.outerHTML.indexOf('requestAnimationFrame')>=0");
        return r.value("value", false);
    }

    bool canvas_present() override {
        json r = eval_json("document.querySelector('canvas')!==null");
        return r.value("value", false);
    }

    std::int64_t elapsed_ms() const override { return elapsed_since(start_); }

private:
    json eval_json(const std::string& expression) {
        json result = client_.command(
            "Runtime.evaluate",
            {{"expression", expression}, {"returnByValue", true}}, session_id_);
        if (result.contains("exceptionDetails"))
            throw TransportError("script exception: " +
                                 result.at("exceptionDetails").value("text", "unknown"));
        return result.value("result", json::object());
    }

    ActionResult run_action(const std::string& selector, const std::string& action_suffix) {
        ActionResult r;
        auto t0 = std::chrono::steady_clock::now();
        std::string digest_before = dom_digest();
        json result;
        try {
            result = eval_json("(function(){var el=" + selector_to_js(selector) +
                               ";if(!el)return false;el" + action_suffix + ";return true;})()");
        } catch (const TimeoutError&) {
            r.latency_ms = config_.command_timeout_ms + 1;
            return r;
        } catch (const TransportError&) {
            r.ok = false;
            r.error = "action failed";
            r.latency_ms = elapsed_since(t0);
            return r;
        }
        r.target_found = result.value("value", false);
        r.ok = r.target_found;
        if (!r.target_found) r.error = "target not found: " + selector;
        r.latency_ms = elapsed_since(t0);
        r.state_changed = r.target_found && dom_digest() != digest_before;
        return r;
    }

    std::vector<std::string> drain_events(bool exceptions) {
        std::vector<std::string> out;
        for (auto& [method, payload] : client_.take_events(session_id_)) {
            if (exceptions && method == "Runtime.exceptionThrown") {
                out.push_back(payload.value("params", json::object())
                                  .value("exceptionDetails", json::object())
                                  .value("text", "exception"));
            } else if (!exceptions && method == "Runtime.consoleAPICalled") {
                const json& params = payload.value("params", json::object());
                if (params.value("type", "") == "error") {
                    std::string text;
                    for (const auto& arg : params.value("args", json::array()))
                        if (arg.contains("value") && arg.at("value").is_string())
                            text += arg.at("value").get<std::string>();
                    out.push_back(text.empty() ? "console error" : text);
                }
            } else {
                pending_.emplace_back(method, payload); // unrelated events kept
            }
        }
        return out;
    }

    void apply_viewport() {
        client_.command("Emulation.setDeviceMetricsOverride",
                        {{"width", viewport_.width},
                         {"height", viewport_.height},
                         {"deviceScaleFactor", 1},
                         {"mobile", viewport_.width < 700}},
                        session_id_);
    }

    static std::int64_t elapsed_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    }

    DevtoolsConfig config_;
    DevtoolsClient client_;
    std::string target_id_;
    std::string session_id_;
    Viewport viewport_{1280, 800};
    bool load_ok_ = false;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::pair<std::string, json>> pending_;
};

} // namespace

std::unique_ptr<PageSession> DevtoolsBackend::open(const std::string& html) {
    return std::make_unique<DevtoolsSession>(config_, html);
}

} // namespace htmlcure::exec
