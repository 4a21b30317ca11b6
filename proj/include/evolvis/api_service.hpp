#pragma once

#include "evolvis/metavis.hpp"
#include "evolvis/param_manager.hpp"
#include "evolvis/scheduler.hpp"
#include "evolvis/toolchain.hpp"

#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace evolvis {

/// JSON-RPC error codes of the service.
namespace rpc {
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kInternalError = -32603;
inline constexpr int kUnknownToolchain = -32001;
inline constexpr int kUnknownSession = -32002;
inline constexpr int kUnknownRevision = -32003;
inline constexpr int kTypeMismatch = -32004;
inline constexpr int kUnknownImage = -32005;
inline constexpr int kUnknownGroup = -32006;
}  // namespace rpc

class RpcError : public std::runtime_error {
public:
    RpcError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

struct ServiceConfig {
    SchedulerConfig scheduler;
    /// Each session persists its revisions under storeRoot/<store name>.
    std::optional<std::filesystem::path> storeRoot;
    /// Simulated clock: time moves only through advanceTime() and jobs run on
    /// the caller's thread. Session ids become deterministic ("s1", "s2", ...).
    bool simulated = false;
    int defaultWidth = 256;
    int defaultHeight = 256;
};

using ClientId = std::uint64_t;
using NotificationSink = std::function<void(const nlohmann::json&)>;

/// Sessions, revision trees and the JSON-RPC method table. Transport-agnostic:
/// a transport registers a client with a notification sink and feeds it
/// request text.
class ApiService {
public:
    ApiService(ToolchainRegistry toolchains, ServiceConfig config);
    ~ApiService();

    ApiService(const ApiService&) = delete;
    ApiService& operator=(const ApiService&) = delete;

    ClientId connect(NotificationSink sink);
    void disconnect(ClientId client);

    /// Handles one JSON-RPC message (single or batch). Returns the response
    /// text, or nothing when the message held only notifications.
    std::optional<std::string> handleText(const std::string& text, ClientId client);
    std::optional<nlohmann::json> handle(const nlohmann::json& message, ClientId client);

    /// Starts the debounce timer and worker threads (threaded mode only).
    void start();
    void stop();

    // Simulated mode.
    Millis now() const;
    /// Moves the clock forward, enqueuing debounced compiles at their exact
    /// deadlines and executing every runnable job as it becomes due.
    void advanceTime(Millis delta);
    /// Executes queued jobs in priority order until the queue is empty.
    void runPending();

    const Scheduler& scheduler() const { return scheduler_; }
    Scheduler& scheduler() { return scheduler_; }

private:
    struct Session;
    using Handler = nlohmann::json (ApiService::*)(const nlohmann::json&, ClientId);

    nlohmann::json dispatch(const nlohmann::json& request, ClientId client);

    nlohmann::json sessionOpen(const nlohmann::json& params, ClientId client);
    nlohmann::json sessionResume(const nlohmann::json& params, ClientId client);
    nlohmann::json sourceUpdate(const nlohmann::json& params, ClientId client);
    nlohmann::json stateCheckout(const nlohmann::json& params, ClientId client);
    nlohmann::json viewTree(const nlohmann::json& params, ClientId client);
    nlohmann::json viewExpand(const nlohmann::json& params, ClientId client);
    nlohmann::json diffGet(const nlohmann::json& params, ClientId client);
    nlohmann::json paramsSet(const nlohmann::json& params, ClientId client);
    nlohmann::json paramsGet(const nlohmann::json& params, ClientId client);
    nlohmann::json imageGet(const nlohmann::json& params, ClientId client);
    nlohmann::json toolchainsList(const nlohmann::json& params, ClientId client);

    std::shared_ptr<Session> findSession(const nlohmann::json& params) const;
    std::string newSessionId();

    void execute(const Job& job);
    void executeCompile(const Job& job);
    void executeRender(const Job& job);
    ArtifactHandle artifactFor(Session& session, const RevisionId& id);
    void ensureBranchImages(Session& session);
    nlohmann::json treePayload(Session& session);
    ScopeNode scopeTreeOf(Session& session, const RevisionId& id);

    void notify(const Session& session, const std::string& method, nlohmann::json params);

    void timerLoop(std::stop_token stop);

    ToolchainRegistry toolchains_;
    ServiceConfig config_;
    Scheduler scheduler_;
    ArtifactCache artifacts_;

    mutable std::mutex sessionsMutex_;
    std::map<SessionId, std::shared_ptr<Session>> sessions_;
    std::uint64_t sessionCounter_ = 0;

    mutable std::mutex clientsMutex_;
    std::map<ClientId, NotificationSink> clients_;
    ClientId nextClient_ = 1;

    std::map<std::string, Handler> methods_;

    // Clock
    std::chrono::steady_clock::time_point epoch_;
    std::atomic<std::int64_t> simulatedNow_{0};

    // Threaded mode
    std::mutex timerMutex_;
    std::condition_variable_any timerCv_;
    bool timerWake_ = false;
    std::vector<std::jthread> workers_;
};

}  // namespace evolvis
