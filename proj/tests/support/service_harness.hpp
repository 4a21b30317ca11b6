#pragma once

#include "evolvis/api_service.hpp"
#include "evolvis/hash.hpp"
#include "evolvis/image_lab.hpp"

#include <stdexcept>

namespace testing {

/// Simulated-clock service with one client whose notifications are captured.
class ServiceHarness {
public:
    static evolvis::ServiceConfig simulatedConfig(std::optional<std::filesystem::path> storeRoot = {}) {
        evolvis::ServiceConfig c;
        c.simulated = true;
        c.storeRoot = std::move(storeRoot);
        return c;
    }

    explicit ServiceHarness(evolvis::ServiceConfig config = simulatedConfig(),
                            evolvis::ToolchainRegistry toolchains = evolvis::ToolchainRegistry::withBuiltins())
        : service(std::move(toolchains), std::move(config)) {
        client = service.connect([this](const nlohmann::json& m) { notes.push_back(m); });
    }

    nlohmann::json request(const std::string& method, nlohmann::json params) {
        auto r = service.handle({{"jsonrpc", "2.0"}, {"id", ++nextId}, {"method", method}, {"params", std::move(params)}},
                                client);
        if (!r) throw std::logic_error("no response to " + method);
        return *r;
    }

    nlohmann::json call(const std::string& method, nlohmann::json params) {
        auto r = request(method, std::move(params));
        if (r.contains("error")) throw std::runtime_error(method + ": " + r["error"].dump());
        return r["result"];
    }

    int errorCode(const std::string& method, nlohmann::json params) {
        auto r = request(method, std::move(params));
        return r.contains("error") ? r["error"]["code"].get<int>() : 0;
    }

    std::string open(int size = 16, std::optional<std::string> store = {}) {
        nlohmann::json p = {{"toolchainId", "minivis"}, {"width", size}, {"height", size}};
        if (store) p["store"] = *store;
        sessionId = call("session.open", p)["sessionId"];
        service.runPending();
        return sessionId;
    }

    /// Sends an edit and lets the debounce expire.
    void update(const std::string& source) {
        call("source.update", {{"sessionId", sessionId}, {"files", {{"main.mv", source}}}});
        service.advanceTime(service.scheduler().config().debounce);
    }

    /// Commits `source` and returns the new revision id.
    std::string commit(const std::string& source) {
        auto before = notes.size();
        update(source);
        for (auto i = before; i < notes.size(); ++i) {
            if (notes[i]["method"] == "compile.succeeded") return notes[i]["params"]["revisionId"];
        }
        throw std::runtime_error("compile did not succeed");
    }

    std::vector<nlohmann::json> take(const std::string& method) {
        std::vector<nlohmann::json> out;
        for (const auto& n : notes)
            if (n["method"] == method) out.push_back(n["params"]);
        return out;
    }

    std::vector<std::string> methods() const {
        std::vector<std::string> out;
        for (const auto& n : notes) out.push_back(n["method"]);
        return out;
    }

    evolvis::Image image(const std::string& ref) {
        auto png = evolvis::base64Decode(call("image.get", {{"sessionId", sessionId}, {"ref", ref}})["png"].get<std::string>());
        return evolvis::decodePNG(*png);
    }

    nlohmann::json tree() { return call("view.tree", {{"sessionId", sessionId}}); }

    evolvis::ApiService service;
    evolvis::ClientId client = 0;
    std::vector<nlohmann::json> notes;
    std::string sessionId;
    int nextId = 0;
};

}  // namespace testing
