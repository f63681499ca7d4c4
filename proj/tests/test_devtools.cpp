#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <thread>

#include "htmlcure/devtools.hpp"

using namespace htmlcure;
using namespace htmlcure::exec;

// ---------------------------------------------------------------------------
// Frame codec
// ---------------------------------------------------------------------------

TEST_CASE("websocket frames round-trip at every length class") {
    for (std::size_t len : {std::size_t{0}, std::size_t{1}, std::size_t{125}, std::size_t{126},
                            std::size_t{65535}, std::size_t{70000}}) {
        ws::WsFrame frame;
        frame.opcode = 0x1;
        frame.payload = std::string(len, 'x');
        for (std::size_t i = 0; i < len; ++i) frame.payload[i] = static_cast<char>('a' + i % 26);

        for (bool masked : {false, true}) {
            std::string encoded = ws::encode_frame(frame, masked, 0xdeadbeef);
            std::size_t consumed = 0;
            auto decoded = ws::decode_frame(encoded, consumed);
            REQUIRE(decoded.has_value());
            CHECK(consumed == encoded.size());
            CHECK(decoded->opcode == 0x1);
            CHECK(decoded->fin);
            CHECK(decoded->payload == frame.payload);
        }
    }
}

TEST_CASE("decode reports incomplete frames without consuming") {
    ws::WsFrame frame;
    frame.payload = "hello world";
    std::string encoded = ws::encode_frame(frame, true, 0x12345678);
    for (std::size_t cut = 0; cut < encoded.size(); ++cut) {
        std::size_t consumed = 999;
        auto decoded = ws::decode_frame(encoded.substr(0, cut), consumed);
        CHECK_FALSE(decoded.has_value());
    }
}

TEST_CASE("handshake accept value matches the RFC example") {
    CHECK(ws::handshake_accept_value("dGhlIHNhbXBsZSBub25jZQ==") ==
          "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

// ---------------------------------------------------------------------------
// Loopback protocol test (no browser install required)
// ---------------------------------------------------------------------------

namespace {

// Minimal in-process endpoint speaking enough of the wire protocol to
// exercise command correlation and event delivery.
class FakeEndpoint {
public:
    FakeEndpoint() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(listen_fd_ >= 0);
        int yes = 1;
        setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        REQUIRE(::listen(listen_fd_, 1) == 0);
        socklen_t len = sizeof(addr);
        REQUIRE(getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
        port_ = ntohs(addr.sin_port);
        server_ = std::thread([this] { serve(); });
    }

    ~FakeEndpoint() {
        if (server_.joinable()) server_.join();
        if (listen_fd_ >= 0) ::close(listen_fd_);
    }

    std::string url() const { return "ws://127.0.0.1:" + std::to_string(port_) + "/devtools"; }

private:
    void send_frame(int fd, const std::string& payload) {
        ws::WsFrame frame;
        frame.opcode = 0x1;
        frame.payload = payload;
        std::string bytes = ws::encode_frame(frame, false);
        ::send(fd, bytes.data(), bytes.size(), 0);
    }

    void serve() {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) return;

        // HTTP upgrade.
        std::string request;
        char buf[2048];
        while (request.find("\r\n\r\n") == std::string::npos) {
            ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
            if (n <= 0) return;
            request.append(buf, static_cast<std::size_t>(n));
        }
        std::string key;
        std::size_t key_pos = request.find("Sec-WebSocket-Key: ");
        if (key_pos != std::string::npos) {
            std::size_t end = request.find("\r\n", key_pos);
            key = request.substr(key_pos + 19, end - key_pos - 19);
        }
        std::string response = "HTTP/1.1 101 Switching Protocols\r\n"
                               "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                               "Sec-WebSocket-Accept: " +
                               ws::handshake_accept_value(key) + "\r\n\r\n";
        ::send(fd, response.data(), response.size(), 0);

        // Serve three commands, pushing an event between the second and third.
        std::string rx;
        int commands = 0;
        while (commands < 3) {
            std::size_t consumed = 0;
            auto frame = ws::decode_frame(rx, consumed);
            if (!frame) {
                ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
                if (n <= 0) break;
                rx.append(buf, static_cast<std::size_t>(n));
                continue;
            }
            rx.erase(0, consumed);
            if (frame->opcode != 0x1) continue;
            json msg = json::parse(frame->payload);
            ++commands;
            json reply;
            reply["id"] = msg.at("id");
            const std::string method = msg.at("method").get<std::string>();
            if (method == "Target.createTarget") {
                reply["result"] = {{"targetId", "target-1"}};
            } else if (method == "Target.attachToTarget") {
                reply["result"] = {{"sessionId", "session-1"}};
                send_frame(fd, reply.dump());
                json event;
                event["method"] = "Runtime.consoleAPICalled";
                event["sessionId"] = "session-1";
                event["params"] = {{"type", "error"},
                                   {"args", json::array({{{"value", "boom"}}})}};
                send_frame(fd, event.dump());
                continue;
            } else if (method == "Runtime.evaluate") {
                reply["result"] = {{"result", {{"type", "number"}, {"value", 7}}}};
            } else {
                reply["error"] = {{"message", "unknown method"}};
            }
            send_frame(fd, reply.dump());
        }
        ::close(fd);
    }

    int listen_fd_ = -1;
    int port_ = 0;
    std::thread server_;
};

} // namespace

TEST_CASE("devtools client correlates commands and buffers events") {
    FakeEndpoint endpoint;
    DevtoolsConfig config;
    config.websocket_url = endpoint.url();
    config.command_timeout_ms = 3000;
    DevtoolsClient client(config);
    client.connect();

    json created = client.command("Target.createTarget", {{"url", "about:blank"}});
    CHECK(created.at("targetId") == "target-1");

    json attached =
        client.command("Target.attachToTarget", {{"targetId", "target-1"}, {"flatten", true}});
    CHECK(attached.at("sessionId") == "session-1");

    json eval = client.command("Runtime.evaluate", {{"expression", "3+4"}}, "session-1");
    CHECK(eval.at("result").at("value") == 7);

    auto events = client.take_events("session-1");
    REQUIRE(events.size() == 1);
    CHECK(events[0].first == "Runtime.consoleAPICalled");
    CHECK(events[0].second.at("params").at("type") == "error");
}

namespace {

// Speaks the full open/act/close sequence of a page session so the backend
// layer above the client can run without a browser.
class FakeBrowser {
public:
    FakeBrowser() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(listen_fd_ >= 0);
        int yes = 1;
        setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        REQUIRE(::listen(listen_fd_, 1) == 0);
        socklen_t len = sizeof(addr);
        REQUIRE(getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
        port_ = ntohs(addr.sin_port);
        server_ = std::thread([this] { serve(); });
    }

    ~FakeBrowser() {
        if (server_.joinable()) server_.join();
        if (listen_fd_ >= 0) ::close(listen_fd_);
    }

    std::string url() const { return "ws://127.0.0.1:" + std::to_string(port_) + "/browser"; }
    std::string document;
    std::atomic<int> clicks{0};

private:
    void send_frame(int fd, const std::string& payload) {
        ws::WsFrame frame;
        frame.opcode = 0x1;
        frame.payload = payload;
        std::string bytes = ws::encode_frame(frame, false);
        ::send(fd, bytes.data(), bytes.size(), 0);
    }

    json evaluate(const std::string& expr) {
        json result;
        if (expr.find("outerHTML.length") != std::string::npos) {
            // The DOM digest input changes once a click lands.
            result["value"] = std::to_string(1000 + clicks.load()) + ":Fake Page:3";
            result["type"] = "string";
        } else if (expr.find(".click()") != std::string::npos) {
            ++clicks;
            result["value"] = expr.find("\"#missing\"") == std::string::npos;
            result["type"] = "boolean";
        } else if (expr.find("document.title") != std::string::npos) {
            result["value"] = "Fake Page";
        } else if (expr == "6*7") {
            result["value"] = 42;
        } else {
            result["value"] = true;
        }
        return result;
    }

    void serve() {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) return;
        std::string request;
        char buf[4096];
        while (request.find("\r\n\r\n") == std::string::npos) {
            ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
            if (n <= 0) return;
            request.append(buf, static_cast<std::size_t>(n));
        }
        std::string key;
        std::size_t key_pos = request.find("Sec-WebSocket-Key: ");
        if (key_pos != std::string::npos) {
            std::size_t end = request.find("\r\n", key_pos);
            key = request.substr(key_pos + 19, end - key_pos - 19);
        }
        std::string response = "HTTP/1.1 101 Switching Protocols\r\n"
                               "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                               "Sec-WebSocket-Accept: " +
                               ws::handshake_accept_value(key) + "\r\n\r\n";
        ::send(fd, response.data(), response.size(), 0);

        std::string rx;
        bool closed = false;
        while (!closed) {
            std::size_t consumed = 0;
            auto frame = ws::decode_frame(rx, consumed);
            if (!frame) {
                ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
                if (n <= 0) break;
                rx.append(buf, static_cast<std::size_t>(n));
                continue;
            }
            rx.erase(0, consumed);
            if (frame->opcode == 0x8) break;
            if (frame->opcode != 0x1) continue;
            json msg = json::parse(frame->payload, nullptr, false);
            if (msg.is_discarded() || !msg.contains("method")) continue;
            const std::string method = msg.at("method").get<std::string>();
            json reply;
            reply["id"] = msg.at("id");
            if (method == "Target.createTarget") {
                reply["result"] = {{"targetId", "t1"}};
            } else if (method == "Target.attachToTarget") {
                reply["result"] = {{"sessionId", "s1"}};
            } else if (method == "Page.getFrameTree") {
                reply["result"] = {{"frameTree", {{"frame", {{"id", "f1"}}}}}};
            } else if (method == "Page.setDocumentContent") {
                document = msg.at("params").at("html").get<std::string>();
                reply["result"] = json::object();
            } else if (method == "Runtime.evaluate") {
                reply["result"] = {
                    {"result", evaluate(msg.at("params").at("expression").get<std::string>())}};
            } else if (method == "Page.captureScreenshot") {
                reply["result"] = {{"data", "UE5HZmFrZWJ5dGVz" + std::to_string(clicks.load())}};
            } else if (method == "Target.closeTarget") {
                reply["result"] = {{"success", true}};
                closed = true;
            } else {
                reply["result"] = json::object(); // Page.enable, Runtime.enable, Emulation.*
            }
            send_frame(fd, reply.dump());
        }
        ::close(fd);
    }

    int listen_fd_ = -1;
    int port_ = 0;
    std::thread server_;
};

} // namespace

TEST_CASE("a full page session runs against the wire protocol") {
    FakeBrowser browser;
    DevtoolsConfig config;
    config.websocket_url = browser.url();
    config.command_timeout_ms = 3000;
    DevtoolsBackend backend(config);
    {
        auto session = backend.open("<html><body><button id=\"go\">Go</button></body></html>");
        REQUIRE(session->load_ok());
        CHECK(browser.document.find("button") != std::string::npos);
        CHECK(session->page_title() == "Fake Page");

        Frame before = session->capture_frame();
        CHECK(!before.hash.empty());

        ActionResult click = session->click("#go");
        CHECK(click.target_found);
        CHECK(click.state_changed); // digest moved with the click counter

        Frame after = session->capture_frame();
        CHECK(after.hash != before.hash);

        EvalOutcomeValue eval = session->eval("6*7");
        REQUIRE(eval.ok);
        CHECK(std::get<double>(eval.value) == 42.0);
    } // destructor closes the target, letting the fake browser exit
}

TEST_CASE("protocol errors surface as transport errors") {
    FakeEndpoint endpoint;
    DevtoolsConfig config;
    config.websocket_url = endpoint.url();
    config.command_timeout_ms = 3000;
    DevtoolsClient client(config);
    client.connect();
    client.command("Target.createTarget", {{"url", "about:blank"}});
    client.command("Target.attachToTarget", {{"targetId", "target-1"}});
    CHECK_THROWS_AS(client.command("No.SuchMethod"), TransportError);
}

TEST_CASE("connecting to a dead endpoint is a transport error") {
    DevtoolsConfig config;
    config.websocket_url = "ws://127.0.0.1:1/devtools"; // reserved port, nothing listens
    DevtoolsClient client(config);
    CHECK_THROWS_AS(client.connect(), TransportError);
}
