#include "evolvis/api_service.hpp"

#include "evolvis/diff_engine.hpp"
#include "evolvis/hash.hpp"
#include "evolvis/image_lab.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <random>
#include <regex>
#include <set>

namespace evolvis {

using nlohmann::json;

struct ApiService::Session {
    struct Rendered {
        std::uint64_t generation = 0;
        std::string png;
        Image image;
    };

    SessionId id;
    std::shared_ptr<const ToolchainAdapter> toolchain;
    int width = 256;
    int height = 256;
    std::unique_ptr<RevisionStore> store;

    std::mutex mutex;
    std::optional<RevisionId> current;
    std::optional<RevisionId> head;
    ParameterSet active;
    ExpandState expanded;
    std::map<RevisionId, std::vector<ParameterDecl>> decls;
    std::map<RevisionId, ScopeNode> scopes;
    std::map<RevisionId, Rendered> images;
    std::map<std::string, std::string> variancePng;

    std::mutex subscribersMutex;
    std::set<ClientId> subscribers;
};

namespace {

json errorObject(int code, const std::string& message) { return {{"code", code}, {"message", message}}; }

json errorResponse(const json& id, int code, const std::string& message) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", errorObject(code, message)}};
}

const json& require(const json& params, const char* key) {
    auto it = params.find(key);
    if (it == params.end()) throw RpcError(rpc::kInvalidParams, fmt::format("missing parameter '{}'", key));
    return *it;
}

std::string requireString(const json& params, const char* key) {
    const auto& v = require(params, key);
    if (!v.is_string()) throw RpcError(rpc::kInvalidParams, fmt::format("parameter '{}' must be a string", key));
    return v.get<std::string>();
}

RevisionId requireRevision(const json& params, const char* key) {
    auto parsed = RevisionId::parse(requireString(params, key));
    if (!parsed) throw RpcError(rpc::kUnknownRevision, fmt::format("'{}' is not a revision id", key));
    return *parsed;
}

int optionalDimension(const json& params, const char* key, int fallback) {
    auto it = params.find(key);
    if (it == params.end() || it->is_null()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() <= 0 || it->get<long long>() > 8192)
        throw RpcError(rpc::kInvalidParams, fmt::format("'{}' must be an integer in [1, 8192]", key));
    return it->get<int>();
}

RevisionId artifactKey(const std::string& toolchainId, const RevisionId& id) {
    return RevisionId(sha256(toolchainId + ":" + id.hex()));
}

std::optional<RevisionId> subtreeHead(const RevisionStore& store, const RevisionId& root) {
    std::optional<RevisionId> best;
    std::uint64_t bestSeq = 0;
    std::vector<RevisionId> stack{root};
    while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        auto rev = store.get(id);
        if (!best || rev->seq > bestSeq) {
            best = id;
            bestSeq = rev->seq;
        }
        for (const auto& c : store.children(id)) stack.push_back(c);
    }
    return best;
}

Diagnostic scopeDiagnostic(const UnbalancedScope& e) {
    return {e.file(), e.line(), e.col(), e.what(), "UnbalancedScope"};
}

json diagnosticsJson(const std::vector<Diagnostic>& diags) {
    json out = json::array();
    for (const auto& d : diags) out.push_back(toJson(d));
    return out;
}

}  // namespace

ApiService::ApiService(ToolchainRegistry toolchains, ServiceConfig config)
    : toolchains_(std::move(toolchains)),
      config_(std::move(config)),
      scheduler_(config_.scheduler),
      artifacts_(config_.scheduler.artifactCacheSize),
      epoch_(std::chrono::steady_clock::now()) {
    methods_ = {
        {"session.open", &ApiService::sessionOpen},
        {"session.resume", &ApiService::sessionResume},
        {"source.update", &ApiService::sourceUpdate},
        {"state.checkout", &ApiService::stateCheckout},
        {"view.tree", &ApiService::viewTree},
        {"view.expand", &ApiService::viewExpand},
        {"diff.get", &ApiService::diffGet},
        {"params.set", &ApiService::paramsSet},
        {"params.get", &ApiService::paramsGet},
        {"image.get", &ApiService::imageGet},
        {"toolchains.list", &ApiService::toolchainsList},
    };
}

ApiService::~ApiService() { stop(); }

ClientId ApiService::connect(NotificationSink sink) {
    std::lock_guard lock(clientsMutex_);
    auto id = nextClient_++;
    clients_.emplace(id, std::move(sink));
    return id;
}

void ApiService::disconnect(ClientId client) {
    {
        std::lock_guard lock(clientsMutex_);
        clients_.erase(client);
    }
    std::vector<std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(sessionsMutex_);
        for (auto& [_, s] : sessions_) sessions.push_back(s);
    }
    for (auto& s : sessions) {
        std::lock_guard lock(s->subscribersMutex);
        s->subscribers.erase(client);
    }
}

std::optional<std::string> ApiService::handleText(const std::string& text, ClientId client) {
    json message;
    try {
        message = json::parse(text);
    } catch (const json::parse_error& e) {
        return errorResponse(nullptr, rpc::kParseError, "parse error").dump();
    }
    auto response = handle(message, client);
    if (!response) return std::nullopt;
    return response->dump();
}

std::optional<json> ApiService::handle(const json& message, ClientId client) {
    if (message.is_array()) {
        if (message.empty()) return errorResponse(nullptr, rpc::kInvalidRequest, "empty batch");
        json responses = json::array();
        for (const auto& item : message) {
            auto r = handle(item.is_array() ? json(nullptr) : item, client);
            if (r) responses.push_back(std::move(*r));
        }
        if (responses.empty()) return std::nullopt;
        return responses;
    }

    if (!message.is_object()) return errorResponse(nullptr, rpc::kInvalidRequest, "request must be an object");
    auto idIt = message.find("id");
    const bool isNotification = idIt == message.end();
    json id = isNotification ? json(nullptr) : *idIt;
    if (!isNotification && !(id.is_string() || id.is_number() || id.is_null()))
        return errorResponse(nullptr, rpc::kInvalidRequest, "invalid id");
    auto versionIt = message.find("jsonrpc");
    auto methodIt = message.find("method");
    if (versionIt == message.end() || *versionIt != "2.0" || methodIt == message.end() || !methodIt->is_string())
        return errorResponse(id, rpc::kInvalidRequest, "invalid request");
    if (auto p = message.find("params"); p != message.end() && !p->is_object() && !p->is_array())
        return errorResponse(id, rpc::kInvalidRequest, "params must be structured");

    json response;
    try {
        response = {{"jsonrpc", "2.0"}, {"id", id}, {"result", dispatch(message, client)}};
    } catch (const RpcError& e) {
        response = errorResponse(id, e.code(), e.what());
    } catch (const StoreError& e) {
        int code = e.code() == StoreError::Code::UnknownRevision || e.code() == StoreError::Code::UnknownParent
                       ? rpc::kUnknownRevision
                       : e.code() == StoreError::Code::InvalidPath ? rpc::kInvalidParams : rpc::kInternalError;
        response = errorResponse(id, code, e.what());
    } catch (const ParamError& e) {
        response = errorResponse(id, e.code() == ParamError::Code::TypeMismatch ? rpc::kTypeMismatch : rpc::kInvalidParams,
                                 e.what());
    } catch (const json::exception& e) {
        response = errorResponse(id, rpc::kInvalidParams, e.what());
    } catch (const std::exception& e) {
        spdlog::error("{} failed: {}", methodIt->get<std::string>(), e.what());
        response = errorResponse(id, rpc::kInternalError, e.what());
    }
    if (isNotification) return std::nullopt;
    return response;
}

json ApiService::dispatch(const json& request, ClientId client) {
    static const std::map<std::string, std::vector<const char*>> positional = {
        {"session.open", {"toolchainId", "width", "height", "store"}},
        {"session.resume", {"sessionId"}},
        {"source.update", {"sessionId", "files"}},
        {"state.checkout", {"sessionId", "revisionId"}},
        {"view.tree", {"sessionId"}},
        {"view.expand", {"sessionId", "groupId", "expanded"}},
        {"diff.get", {"sessionId", "fromRev", "toRev", "direction"}},
        {"params.set", {"sessionId", "values"}},
        {"params.get", {"sessionId"}},
        {"image.get", {"sessionId", "ref"}},
        {"toolchains.list", {}},
    };

    const auto method = request.at("method").get<std::string>();
    auto it = methods_.find(method);
    if (it == methods_.end()) throw RpcError(rpc::kMethodNotFound, "method not found: " + method);

    json params = json::object();
    if (auto p = request.find("params"); p != request.end()) {
        if (p->is_object()) {
            params = *p;
        } else {
            const auto& names = positional.at(method);
            if (p->size() > names.size()) throw RpcError(rpc::kInvalidParams, "too many positional parameters");
            for (std::size_t i = 0; i < p->size(); ++i) params[names[i]] = (*p)[i];
        }
    }
    return (this->*(it->second))(params, client);
}

std::shared_ptr<ApiService::Session> ApiService::findSession(const json& params) const {
    auto id = requireString(params, "sessionId");
    std::lock_guard lock(sessionsMutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw RpcError(rpc::kUnknownSession, "unknown session: " + id);
    return it->second;
}

std::string ApiService::newSessionId() {
    if (config_.simulated) return fmt::format("s{}", ++sessionCounter_);
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    return toHex(rng()) + toHex(rng());
}

json ApiService::sessionOpen(const json& params, ClientId client) {
    auto toolchainId = requireString(params, "toolchainId");
    auto toolchain = toolchains_.find(toolchainId);
    if (!toolchain) throw RpcError(rpc::kUnknownToolchain, "unknown toolchain: " + toolchainId);

    auto session = std::make_shared<Session>();
    session->toolchain = toolchain;
    session->width = optionalDimension(params, "width", config_.defaultWidth);
    session->height = optionalDimension(params, "height", config_.defaultHeight);

    std::optional<std::string> storeName;
    if (auto s = params.find("store"); s != params.end() && !s->is_null()) {
        if (!s->is_string() || !std::regex_match(s->get<std::string>(), std::regex("[A-Za-z0-9_-]{1,64}")))
            throw RpcError(rpc::kInvalidParams, "store must match [A-Za-z0-9_-]{1,64}");
        if (!config_.storeRoot) throw RpcError(rpc::kInvalidParams, "server has no store directory");
        storeName = s->get<std::string>();
    }

    {
        std::lock_guard lock(sessionsMutex_);
        do {
            session->id = newSessionId();
        } while (sessions_.count(session->id));
    }
    if (config_.storeRoot)
        session->store = RevisionStore::openOrCreate(*config_.storeRoot / storeName.value_or(session->id));
    else
        session->store = std::make_unique<RevisionStore>();

    session->current = session->head = session->store->latest();
    session->subscribers.insert(client);
    {
        std::lock_guard lock(sessionsMutex_);
        sessions_.emplace(session->id, session);
    }
    spdlog::info("session {} opened with toolchain {} ({} revisions)", session->id, toolchainId,
                 session->store->size());
    ensureBranchImages(*session);

    json result = {{"sessionId", session->id}, {"width", session->width}, {"height", session->height}};
    result["current"] = session->current ? json(session->current->hex()) : json(nullptr);
    return result;
}

json ApiService::sessionResume(const json& params, ClientId client) {
    auto session = findSession(params);
    {
        std::lock_guard lock(session->subscribersMutex);
        session->subscribers.insert(client);
    }
    std::lock_guard lock(session->mutex);
    return {{"sessionId", session->id},
            {"toolchainId", session->toolchain->id()},
            {"width", session->width},
            {"height", session->height},
            {"current", session->current ? json(session->current->hex()) : json(nullptr)},
            {"head", session->head ? json(session->head->hex()) : json(nullptr)},
            {"generation", session->active.generation}};
}

json ApiService::sourceUpdate(const json& params, ClientId) {
    auto session = findSession(params);
    const auto& files = require(params, "files");
    if (!files.is_object()) throw RpcError(rpc::kInvalidParams, "files must be an object of path to text");
    SourceState source;
    source.toolchainId = session->toolchain->id();
    for (const auto& [path, text] : files.items()) {
        if (!text.is_string()) throw RpcError(rpc::kInvalidParams, "file contents must be strings");
        source.files.emplace(path, text.get<std::string>());
    }
    validateSourceState(source);

    scheduler_.onEditEvent(session->id, std::move(source), now());
    {
        std::lock_guard lock(timerMutex_);
        timerWake_ = true;
    }
    timerCv_.notify_all();
    return {{"ok", true}};
}

json ApiService::stateCheckout(const json& params, ClientId) {
    auto session = findSession(params);
    auto id = requireRevision(params, "revisionId");
    SourceState source;
    {
        std::lock_guard lock(session->mutex);
        if (!session->store->contains(id)) throw RpcError(rpc::kUnknownRevision, "unknown revision: " + id.hex());
        source = session->store->checkout(id);
        session->current = id;
        auto branch = session->store->branchPath(*session->head);
        if (std::find(branch.begin(), branch.end(), id) == branch.end())
            session->head = subtreeHead(*session->store, id);
    }
    ensureBranchImages(*session);
    return {{"revisionId", id.hex()}, {"toolchainId", source.toolchainId}, {"files", source.files}};
}

ScopeNode ApiService::scopeTreeOf(Session& session, const RevisionId& id) {
    auto it = session.scopes.find(id);
    if (it != session.scopes.end()) return it->second;
    auto tree = buildScopeTree(session.store->checkout(id).files, session.toolchain->scopeProfile());
    session.scopes.emplace(id, tree);
    return tree;
}

json ApiService::treePayload(Session& session) {
    auto infos = revisionInfos(*session.store);
    auto tree = compressTree(infos, session.expanded);
    std::optional<BranchView> view;
    if (session.head && session.current) {
        view = branchView(infos, tree, *session.head, *session.current, session.active.generation,
                          [&](const RevisionId& id) { return scopeTreeOf(session, id); });
    }
    auto payload = toJson(tree, view);
    // Parent edges let a client draw the uncompressed tree as well.
    auto& revisions = payload["revisions"] = json::array();
    for (const auto& info : infos) {
        revisions.push_back({{"id", info.id.hex()},
                             {"parent", info.parent ? json(info.parent->hex()) : json(nullptr)},
                             {"seq", info.seq},
                             {"group", tree.groupOf.at(info.id)}});
    }
    return payload;
}

json ApiService::viewTree(const json& params, ClientId) {
    auto session = findSession(params);
    std::lock_guard lock(session->mutex);
    return treePayload(*session);
}

json ApiService::viewExpand(const json& params, ClientId) {
    auto session = findSession(params);
    const auto& g = require(params, "groupId");
    if (!g.is_number_integer()) throw RpcError(rpc::kInvalidParams, "groupId must be an integer");
    const auto& e = require(params, "expanded");
    if (!e.is_boolean()) throw RpcError(rpc::kInvalidParams, "expanded must be a boolean");
    const auto groupId = g.get<long long>();
    const bool expanded = e.get<bool>();

    std::lock_guard lock(session->mutex);
    auto tree = compressTree(revisionInfos(*session->store), session->expanded);
    if (groupId < 0 || groupId >= static_cast<long long>(tree.groups.size()))
        throw RpcError(rpc::kUnknownGroup, fmt::format("unknown group: {}", groupId));
    const auto& group = tree.groups[groupId];
    if (group.members.size() >= 2) {
        if (expanded)
            session->expanded.insert(group.id);
        else
            session->expanded.erase(group.id);
    }
    return {{"ok", true}, {"groupId", group.id}, {"collapsed", group.members.size() >= 2 && !expanded}};
}

json ApiService::diffGet(const json& params, ClientId) {
    auto session = findSession(params);
    auto from = requireRevision(params, "fromRev");
    auto to = requireRevision(params, "toRev");
    std::string direction = "forward";
    if (auto d = params.find("direction"); d != params.end() && !d->is_null()) {
        if (!d->is_string() || (*d != "forward" && *d != "backward"))
            throw RpcError(rpc::kInvalidParams, "direction must be \"forward\" or \"backward\"");
        direction = d->get<std::string>();
    }
    for (const auto& id : {from, to})
        if (!session->store->contains(id)) throw RpcError(rpc::kUnknownRevision, "unknown revision: " + id.hex());
    auto a = session->store->checkout(from);
    auto b = session->store->checkout(to);
    auto diffs = direction == "forward" ? revisionDiff(a, b) : revisionDiff(b, a);
    json out = json::array();
    for (const auto& fd : diffs) out.push_back(toJson(fd));
    return out;
}

json ApiService::paramsSet(const json& params, ClientId) {
    auto session = findSession(params);
    const auto& valuesJson = require(params, "values");
    if (!valuesJson.is_object()) throw RpcError(rpc::kInvalidParams, "values must be an object");
    auto values = paramValuesFromJson(valuesJson);

    std::lock_guard lock(session->mutex);
    std::vector<RevisionId> branch;
    if (session->head) branch = session->store->branchPath(*session->head);
    for (const auto& id : branch) {
        auto declsIt = session->decls.find(id);
        if (declsIt == session->decls.end())
            declsIt = session->decls.emplace(id, extractParams(session->store->checkout(id), *session->toolchain)).first;
        for (const auto& decl : declsIt->second) {
            auto v = values.find(decl.name);
            if (v != values.end() && typeOf(v->second) != decl.type)
                throw RpcError(rpc::kTypeMismatch, fmt::format("parameter '{}' is declared as {}", decl.name,
                                                               decl.type == ParamType::Float ? "float" : "vec3"));
        }
    }

    for (auto& [name, value] : values) session->active.values[name] = value;
    ++session->active.generation;
    session->variancePng.clear();

    if (session->current) {
        std::vector<RevisionId> rest;
        for (const auto& id : branch)
            if (id != *session->current) rest.push_back(id);
        scheduler_.scheduleBranchRefresh(session->id, rest, session->active, now());
        scheduler_.enqueueRender(session->id, *session->current, session->active, now());
    } else {
        scheduler_.queue().dropRendersBefore(session->id, session->active.generation);
    }
    return {{"ok", true}, {"generation", session->active.generation}};
}

json ApiService::paramsGet(const json& params, ClientId) {
    auto session = findSession(params);
    std::lock_guard lock(session->mutex);
    json declared = json::array();
    if (session->current) {
        auto it = session->decls.find(*session->current);
        if (it == session->decls.end())
            it = session->decls
                     .emplace(*session->current,
                              extractParams(session->store->checkout(*session->current), *session->toolchain))
                     .first;
        for (const auto& d : it->second) declared.push_back(toJson(d));
    }
    return {{"generation", session->active.generation}, {"values", toJson(session->active.values)},
            {"declared", declared}};
}

json ApiService::imageGet(const json& params, ClientId) {
    auto session = findSession(params);
    auto ref = requireString(params, "ref");
    static const std::regex resultRef("([0-9a-f]{64}):([0-9]+)");
    static const std::regex groupRef("g([0-9]+):([0-9]+)");
    std::smatch m;
    auto unknown = [&] { return RpcError(rpc::kUnknownImage, "unknown image: " + ref); };

    std::lock_guard lock(session->mutex);
    if (std::regex_match(ref, m, resultRef)) {
        auto id = *RevisionId::parse(m[1].str());
        auto gen = std::stoull(m[2].str());
        auto it = session->images.find(id);
        if (it == session->images.end() || it->second.generation != gen) throw unknown();
        return {{"ref", ref}, {"png", base64Encode(it->second.png)}};
    }
    if (!std::regex_match(ref, m, groupRef)) throw unknown();

    if (auto cached = session->variancePng.find(ref); cached != session->variancePng.end())
        return {{"ref", ref}, {"png", base64Encode(cached->second)}};

    auto groupId = std::stoull(m[1].str());
    auto gen = std::stoull(m[2].str());
    if (!session->head) throw unknown();
    auto tree = compressTree(revisionInfos(*session->store), session->expanded);
    if (groupId >= tree.groups.size()) throw unknown();
    auto branch = session->store->branchPath(*session->head);
    std::set<RevisionId> onBranch(branch.begin(), branch.end());
    std::vector<Image> stack;
    for (const auto& member : tree.groups[groupId].members) {
        if (!onBranch.count(member)) continue;
        auto it = session->images.find(member);
        if (it == session->images.end() || it->second.generation != gen) throw unknown();
        stack.push_back(it->second.image);
    }
    if (stack.size() < 2) throw unknown();
    auto png = encodePNG(varianceImage(stack));
    session->variancePng[ref] = png;
    return {{"ref", ref}, {"png", base64Encode(png)}};
}

json ApiService::toolchainsList(const json&, ClientId) { return toolchains_.ids(); }

void ApiService::ensureBranchImages(Session& session) {
    std::vector<RevisionId> missing;
    std::optional<RevisionId> current;
    ParameterSet active;
    {
        std::lock_guard lock(session.mutex);
        if (!session.head) return;
        for (const auto& id : session.store->branchPath(*session.head)) {
            auto it = session.images.find(id);
            if (it == session.images.end() || it->second.generation != session.active.generation) {
                if (id == *session.current)
                    current = id;
                else
                    missing.push_back(id);
            }
        }
        active = session.active;
    }
    for (const auto& id : missing) scheduler_.enqueueRender(session.id, id, active, now());
    if (current) scheduler_.enqueueRender(session.id, *current, active, now());
}

void ApiService::notify(const Session& session, const std::string& method, json params) {
    auto& s = const_cast<Session&>(session);
    std::vector<NotificationSink> sinks;
    {
        std::lock_guard lock(s.subscribersMutex);
        std::lock_guard clientsLock(clientsMutex_);
        for (auto c : s.subscribers)
            if (auto it = clients_.find(c); it != clients_.end()) sinks.push_back(it->second);
    }
    json message = {{"jsonrpc", "2.0"}, {"method", method}, {"params", std::move(params)}};
    for (auto& sink : sinks) sink(message);
}

void ApiService::execute(const Job& job) {
    try {
        if (job.kind == Job::Kind::Compile)
            executeCompile(job);
        else
            executeRender(job);
    } catch (const std::exception& e) {
        spdlog::error("job {} for session {} failed: {}", job.seq, job.session, e.what());
    }
}

void ApiService::executeCompile(const Job& job) {
    std::shared_ptr<Session> session;
    {
        std::lock_guard lock(sessionsMutex_);
        auto it = sessions_.find(job.session);
        if (it == sessions_.end()) return;
        session = it->second;
    }
    const auto& source = std::get<CompileRequest>(job.payload).source;

    std::optional<RevisionId> unchanged;
    {
        std::lock_guard lock(session->mutex);
        if (session->current && session->store->checkout(*session->current).files == source.files)
            unchanged = session->current;
    }
    if (unchanged) {
        scheduler_.markCompileSucceeded(session->id, job.seq);
        notify(*session, "compile.succeeded",
               {{"sessionId", session->id}, {"revisionId", unchanged->hex()}, {"unchanged", true},
                {"diagnostics", json::array()}});
        return;
    }

    auto fail = [&](const std::vector<Diagnostic>& diags) {
        spdlog::debug("compile failed for session {} ({} diagnostics)", session->id, diags.size());
        notify(*session, "compile.failed", {{"sessionId", session->id}, {"diagnostics", diagnosticsJson(diags)}});
    };

    CompileResult result;
    try {
        result = session->toolchain->compile(source);
    } catch (const ToolchainError& e) {
        return fail({{"", 0, 0, e.what(), e.code() == ToolchainError::Code::Timeout ? "Timeout" : "ToolchainError"}});
    }
    if (!result.ok) return fail(result.diagnostics);

    ScopeNode sst;
    std::vector<ParameterDecl> decls;
    try {
        sst = buildScopeTree(source.files, session->toolchain->scopeProfile());
        decls = extractParams(source, *session->toolchain);
    } catch (const UnbalancedScope& e) {
        return fail({scopeDiagnostic(e)});
    } catch (const ParamError& e) {
        return fail({{"", 0, 0, e.what(), "DuplicateParameter"}});
    }

    RevisionId id;
    std::optional<RevisionId> parent;
    ParameterSet active;
    {
        std::lock_guard lock(session->mutex);
        parent = session->current;
        id = session->store->commit(parent, source, scopeHash(sst));
        session->current = session->head = id;
        session->scopes[id] = std::move(sst);
        session->decls[id] = std::move(decls);
        active = session->active;
    }
    artifacts_.put(artifactKey(session->toolchain->id(), id), result.artifact);
    scheduler_.markCompileSucceeded(session->id, job.seq);

    notify(*session, "compile.succeeded",
           {{"sessionId", session->id},
            {"revisionId", id.hex()},
            {"parent", parent ? json(parent->hex()) : json(nullptr)},
            {"sstHash", toHex(session->store->get(id)->sstHash)},
            {"unchanged", false},
            {"diagnostics", diagnosticsJson(result.diagnostics)}});
    notify(*session, "tree.changed", {{"sessionId", session->id}, {"head", id.hex()}, {"current", id.hex()}});
    scheduler_.enqueueRender(session->id, id, active, now());
}

ArtifactHandle ApiService::artifactFor(Session& session, const RevisionId& id) {
    auto key = artifactKey(session.toolchain->id(), id);
    if (auto a = artifacts_.get(key)) return a;
    auto result = session.toolchain->compile(session.store->checkout(id));
    if (!result.ok) throw std::runtime_error("stored revision no longer compiles: " + id.hex());
    artifacts_.put(key, result.artifact);
    return result.artifact;
}

void ApiService::executeRender(const Job& job) {
    std::shared_ptr<Session> session;
    {
        std::lock_guard lock(sessionsMutex_);
        auto it = sessions_.find(job.session);
        if (it == sessions_.end()) return;
        session = it->second;
    }
    const auto& request = std::get<RenderRequest>(job.payload);
    const auto& id = request.revision;

    std::vector<ParameterDecl> decls;
    {
        std::lock_guard lock(session->mutex);
        if (request.params.generation < session->active.generation) return;
        auto it = session->decls.find(id);
        if (it == session->decls.end())
            it = session->decls.emplace(id, extractParams(session->store->checkout(id), *session->toolchain)).first;
        decls = it->second;
    }

    // Values whose type disagrees with this revision's declaration are ignored.
    ParameterSet usable = request.params;
    for (const auto& d : decls) {
        auto v = usable.values.find(d.name);
        if (v != usable.values.end() && typeOf(v->second) != d.type) usable.values.erase(v);
    }
    auto effective = effectiveParams(decls, usable);

    Image image;
    try {
        image = session->toolchain->run(*artifactFor(*session, id), effective, session->width, session->height);
    } catch (const ToolchainError& e) {
        spdlog::warn("render of {} failed: {}", id.hex(), e.what());
        return;
    }
    auto png = encodePNG(image);

    {
        std::lock_guard lock(session->mutex);
        auto& slot = session->images[id];
        if (!slot.png.empty() && slot.generation > request.params.generation) return;
        slot = {request.params.generation, std::move(png), std::move(image)};
        std::erase_if(session->variancePng, [&](const auto& kv) {
            return !kv.first.ends_with(fmt::format(":{}", request.params.generation));
        });
    }
    notify(*session, "image.ready",
           {{"sessionId", session->id},
            {"revisionId", id.hex()},
            {"generation", request.params.generation},
            {"ref", resultImageRef(id, request.params.generation)}});
}

Millis ApiService::now() const {
    if (config_.simulated) return Millis(simulatedNow_.load());
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - epoch_);
}

void ApiService::advanceTime(Millis delta) {
    const auto target = Millis(simulatedNow_.load()) + delta;
    while (auto deadline = scheduler_.nextDeadline()) {
        if (*deadline > target) break;
        simulatedNow_ = std::max(simulatedNow_.load(), deadline->count());
        scheduler_.advanceTo(now());
        runPending();
    }
    simulatedNow_ = target.count();
    runPending();
}

void ApiService::runPending() {
    while (auto job = scheduler_.tryNext()) execute(*job);
}

void ApiService::timerLoop(std::stop_token stop) {
    std::unique_lock lock(timerMutex_);
    while (!stop.stop_requested()) {
        auto deadline = scheduler_.nextDeadline();
        auto wake = [this] { return timerWake_; };
        if (deadline)
            timerCv_.wait_until(lock, stop, epoch_ + *deadline, wake);
        else
            timerCv_.wait(lock, stop, wake);
        timerWake_ = false;
        lock.unlock();
        scheduler_.advanceTo(now());
        lock.lock();
    }
}

void ApiService::start() {
    if (config_.simulated || !workers_.empty()) return;
    workers_.emplace_back([this](std::stop_token st) { timerLoop(st); });
    workers_.emplace_back([this](std::stop_token st) {
        while (auto job = scheduler_.queue().waitCompile(st)) execute(*job);
    });
    for (int i = 0; i < std::max(1, config_.scheduler.renderWorkers); ++i) {
        workers_.emplace_back([this](std::stop_token st) {
            while (auto job = scheduler_.queue().waitRender(st)) execute(*job);
        });
    }
}

void ApiService::stop() {
    for (auto& w : workers_) w.request_stop();
    scheduler_.queue().notifyAll();
    timerCv_.notify_all();
    workers_.clear();
}

}  // namespace evolvis
