#pragma once
// DevTools wire-protocol backend: a WebSocket client speaking the JSON-RPC
// command/event protocol of a headless browser's remote debugging port.
// Configuration comes from the CLI (--devtools-url / HTMLCURE_BROWSER_WS).
//
// The frame codec and handshake are exposed so protocol-level tests can run
// against an in-process fake endpoint without a browser install.

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "htmlcure/backend.hpp"
#include "htmlcure/errors.hpp"

namespace htmlcure::exec::ws {

// RFC 6455 framing. Client frames are masked, server frames are not.
struct WsFrame {
    std::uint8_t opcode = 0x1; // 1 text, 8 close, 9 ping, 10 pong
    bool fin = true;
    std::string payload;
};

std::string encode_frame(const WsFrame& frame, bool mask, std::uint32_t masking_key = 0);
// Decodes one frame from buffer if complete; consumed reports bytes used.
std::optional<WsFrame> decode_frame(const std::string& buffer, std::size_t& consumed);

std::string handshake_request(const std::string& host, const std::string& path,
                              const std::string& key_b64);
std::string handshake_accept_value(const std::string& key_b64);

// Blocking WebSocket connection over a TCP socket.
class WsConnection {
public:
    WsConnection() = default;
    ~WsConnection();
    WsConnection(const WsConnection&) = delete;
    WsConnection& operator=(const WsConnection&) = delete;

    // url: ws://host:port/path — throws TransportError on failure.
    void connect(const std::string& url, int timeout_ms = 10000);
    void close();
    bool connected() const { return fd_ >= 0; }

    void send_text(const std::string& payload);
    // Next text frame; ping frames are answered transparently.
    // Returns nullopt on timeout.
    std::optional<std::string> recv_text(int timeout_ms);

private:
    void send_raw(const std::string& bytes);
    int fd_ = -1;
    std::string rx_buffer_;
    std::uint32_t mask_counter_ = 0x9d2c5680;
};

} // namespace htmlcure::exec::ws

namespace htmlcure::exec {

struct DevtoolsConfig {
    std::string websocket_url;        // browser-level ws endpoint
    int command_timeout_ms = 10000;
    std::vector<Viewport> default_viewport = {{1280, 800}};
};

// JSON-RPC layer: correlates command ids, buffers events.
class DevtoolsClient {
public:
    explicit DevtoolsClient(DevtoolsConfig config);

    void connect();
    bool connected() const;

    // Sends {id, method, params[, sessionId]} and waits for the matching
    // response. Protocol errors surface as TransportError.
    json command(const std::string& method, json params = json::object(),
                 const std::string& session_id = "");

    // Drains buffered events for a session (method, params pairs).
    std::vector<std::pair<std::string, json>> take_events(const std::string& session_id);

    const DevtoolsConfig& config() const { return config_; }

private:
    void pump(int timeout_ms); // reads frames, files responses/events
    DevtoolsConfig config_;
    ws::WsConnection conn_;
    int next_id_ = 1;
    std::map<int, json> responses_;
    std::vector<std::pair<std::string, json>> events_; // (sessionId|"", payload)
    std::mutex mutex_;
};

// PageSession over one DevTools target/session.
class DevtoolsBackend final : public BrowserBackend {
public:
    explicit DevtoolsBackend(DevtoolsConfig config) : config_(std::move(config)) {}
    const std::string& name() const override {
        static const std::string n = "devtools";
        return n;
    }
    BackendCapabilities capabilities() const override { return {true, true, true}; }
    std::unique_ptr<PageSession> open(const std::string& html) override;

private:
    DevtoolsConfig config_;
};

} // namespace htmlcure::exec
