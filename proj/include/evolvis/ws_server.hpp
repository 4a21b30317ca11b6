#pragma once

#include "evolvis/api_service.hpp"

#include <json.hpp>

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace evolvis {

/// WebSocket transport for ApiService: one JSON-RPC message per text frame,
/// notifications pushed on the same connection.
class WsServer {
public:
    WsServer(ApiService& service, const std::string& address, unsigned short port);
    ~WsServer();

    WsServer(const WsServer&) = delete;
    WsServer& operator=(const WsServer&) = delete;

    /// The bound port (useful when constructed with port 0).
    unsigned short port() const;

    /// Runs the event loop on `threads` background threads.
    void start(int threads = 1);
    /// Runs the event loop on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Minimal blocking client, used by tests and the CLI.
class WsClient {
public:
    WsClient(const std::string& host, unsigned short port);
    ~WsClient();

    WsClient(const WsClient&) = delete;
    WsClient& operator=(const WsClient&) = delete;

    /// Sends a request and waits for the response with the same id.
    /// Throws std::runtime_error on timeout or a closed connection.
    nlohmann::json call(const std::string& method, nlohmann::json params,
                        std::chrono::milliseconds timeout = std::chrono::seconds(10));
    void sendText(const std::string& text);
    /// Next message that is not a response to call(); includes raw responses to sendText().
    std::optional<nlohmann::json> nextMessage(std::chrono::milliseconds timeout);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace evolvis
