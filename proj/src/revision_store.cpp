#include "evolvis/revision_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

namespace evolvis {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<RevisionId> RevisionId::parse(std::string_view hex) {
    Digest d{};
    if (!fromHex(hex, d)) return std::nullopt;
    return RevisionId(d);
}

void validateSourceState(const SourceState& source) {
    if (source.files.empty()) {
        throw StoreError(StoreError::Code::InvalidPath, "source state has no files");
    }
    for (const auto& [path, content] : source.files) {
        if (path.empty() || path.front() == '/' || path.find('\\') != std::string::npos) {
            throw StoreError(StoreError::Code::InvalidPath, "invalid path '" + path + "'");
        }
        std::size_t start = 0;
        while (start <= path.size()) {
            auto end = path.find('/', start);
            if (end == std::string::npos) end = path.size();
            auto segment = std::string_view(path).substr(start, end - start);
            if (segment.empty() || segment == "..") {
                throw StoreError(StoreError::Code::InvalidPath, "invalid path '" + path + "'");
            }
            start = end + 1;
        }
    }
}

RevisionId computeRevisionId(const std::optional<RevisionId>& parent, const SourceState& source) {
    Sha256 h;
    h.update(parent ? parent->hex() : std::string(64, '0'));
    for (const auto& [path, content] : source.files) {
        h.updateU64BigEndian(path.size());
        h.update(path);
        h.updateU64BigEndian(content.size());
        h.update(content);
    }
    return RevisionId(h.finish());
}

namespace {

std::int64_t systemMillis() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

fs::path blobPath(const fs::path& dir, const std::string& hex) {
    return dir / "objects" / hex.substr(0, 2) / hex.substr(2);
}

std::string writeBlob(const fs::path& dir, const std::string& content) {
    auto hex = toHex(sha256(content));
    auto path = blobPath(dir, hex);
    if (fs::exists(path)) return hex;
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("cannot write blob " + tmp.string());
    }
    fs::rename(tmp, path);
    return hex;
}

std::string logLine(const Revision& rev, const fs::path& dir) {
    json files = json::array();
    for (const auto& [path, content] : rev.source.files) {
        files.push_back({{"path", path}, {"blob", writeBlob(dir, content)}});
    }
    json line = {
        {"id", rev.id.hex()},
        {"parent", rev.parent ? json(rev.parent->hex()) : json(nullptr)},
        {"seq", rev.seq},
        {"createdAt", rev.createdAt},
        {"sstHash", toHex(rev.sstHash)},
        {"toolchainId", rev.source.toolchainId},
        {"files", std::move(files)},
    };
    return line.dump();
}

[[noreturn]] void corrupt(const std::string& what) {
    throw StoreError(StoreError::Code::CorruptStore, "corrupt store: " + what);
}

std::string readBlob(const fs::path& dir, const std::string& hex) {
    if (hex.size() != 64) corrupt("bad blob name '" + hex + "'");
    std::ifstream in(blobPath(dir, hex), std::ios::binary);
    if (!in) corrupt("missing blob " + hex);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto content = ss.str();
    if (toHex(sha256(content)) != hex) corrupt("hash mismatch for blob " + hex);
    return content;
}

}  // namespace

RevisionStore::RevisionStore() : RevisionStore(systemMillis) {}

RevisionStore::RevisionStore(WallClock clock) : clock_(std::move(clock)) {}

const RevisionStore::Node& RevisionStore::nodeOrThrow(const RevisionId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw StoreError(StoreError::Code::UnknownRevision, "unknown revision " + id.hex());
    }
    return it->second;
}

void RevisionStore::insertLocked(std::shared_ptr<const Revision> revision) {
    if (revision->parent) nodes_.at(*revision->parent).children.push_back(revision->id);
    nextSeq_ = std::max(nextSeq_, revision->seq + 1);
    nodes_.emplace(revision->id, Node{revision, {}});
    ordered_.push_back(std::move(revision));
}

void RevisionStore::appendToDisk(const Revision& revision) const {
    const auto& dir = *attached_;
    auto line = logLine(revision, dir);
    std::ofstream log(dir / "revisions.log", std::ios::app | std::ios::binary);
    log << line << '\n';
    log.flush();
    if (!log) throw std::runtime_error("cannot append to " + (dir / "revisions.log").string());
}

RevisionId RevisionStore::commit(const std::optional<RevisionId>& parent, const SourceState& source,
                                 std::uint64_t sstHash) {
    validateSourceState(source);
    auto id = computeRevisionId(parent, source);

    std::unique_lock lock(mutex_);
    if (parent && !nodes_.contains(*parent)) {
        throw StoreError(StoreError::Code::UnknownParent, "unknown parent " + parent->hex());
    }
    if (nodes_.contains(id)) return id;

    auto rev = std::make_shared<Revision>();
    rev->id = id;
    rev->parent = parent;
    rev->source = source;
    rev->seq = nextSeq_;
    rev->createdAt = clock_();
    rev->sstHash = sstHash;
    if (attached_) appendToDisk(*rev);
    insertLocked(std::move(rev));
    return id;
}

SourceState RevisionStore::checkout(const RevisionId& id) const {
    std::shared_lock lock(mutex_);
    return nodeOrThrow(id).revision->source;
}

std::shared_ptr<const Revision> RevisionStore::get(const RevisionId& id) const {
    std::shared_lock lock(mutex_);
    return nodeOrThrow(id).revision;
}

bool RevisionStore::contains(const RevisionId& id) const {
    std::shared_lock lock(mutex_);
    return nodes_.contains(id);
}

std::optional<RevisionId> RevisionStore::parent(const RevisionId& id) const {
    std::shared_lock lock(mutex_);
    return nodeOrThrow(id).revision->parent;
}

std::vector<RevisionId> RevisionStore::children(const RevisionId& id) const {
    std::shared_lock lock(mutex_);
    // Children are appended in commit order, which is seq order.
    return nodeOrThrow(id).children;
}

std::vector<RevisionId> RevisionStore::branchPath(const RevisionId& head) const {
    std::shared_lock lock(mutex_);
    std::vector<RevisionId> path;
    const Node* node = &nodeOrThrow(head);
    while (true) {
        path.push_back(node->revision->id);
        if (!node->revision->parent) break;
        node = &nodes_.at(*node->revision->parent);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<std::shared_ptr<const Revision>> RevisionStore::all() const {
    std::shared_lock lock(mutex_);
    return ordered_;
}

std::optional<RevisionId> RevisionStore::latest() const {
    std::shared_lock lock(mutex_);
    if (ordered_.empty()) return std::nullopt;
    return ordered_.back()->id;
}

std::size_t RevisionStore::size() const {
    std::shared_lock lock(mutex_);
    return ordered_.size();
}

void RevisionStore::persist(const fs::path& dir) const {
    std::shared_lock lock(mutex_);
    fs::create_directories(dir / "objects");
    auto tmp = dir / "revisions.log.tmp";
    {
        std::ofstream log(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& rev : ordered_) log << logLine(*rev, dir) << '\n';
        if (!log) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir / "revisions.log");
}

std::unique_ptr<RevisionStore> RevisionStore::load(const fs::path& dir) {
    auto store = std::make_unique<RevisionStore>();
    auto logPath = dir / "revisions.log";
    if (!fs::exists(logPath)) {
        if (fs::is_directory(dir)) return store;
        throw std::runtime_error("store directory " + dir.string() + " does not exist");
    }
    std::ifstream in(logPath, std::ios::binary);
    std::string line;
    std::size_t lineNo = 0;
    std::uint64_t lastSeq = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        auto where = "revisions.log:" + std::to_string(lineNo);
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) corrupt(where + ": malformed record");
        try {
            auto rev = std::make_shared<Revision>();
            auto id = RevisionId::parse(obj.at("id").get<std::string>());
            if (!id) corrupt(where + ": bad id");
            rev->id = *id;
            if (!obj.at("parent").is_null()) {
                auto p = RevisionId::parse(obj.at("parent").get<std::string>());
                if (!p) corrupt(where + ": bad parent");
                if (!store->nodes_.contains(*p)) corrupt(where + ": parent precedes no record");
                rev->parent = *p;
            }
            rev->seq = obj.at("seq").get<std::uint64_t>();
            if (rev->seq <= lastSeq) corrupt(where + ": seq not increasing");
            lastSeq = rev->seq;
            rev->createdAt = obj.at("createdAt").get<std::int64_t>();
            auto sst = u64FromHex(obj.at("sstHash").get<std::string>());
            if (!sst) corrupt(where + ": bad sstHash");
            rev->sstHash = *sst;
            rev->source.toolchainId = obj.value("toolchainId", "");
            for (const auto& f : obj.at("files")) {
                rev->source.files.emplace(f.at("path").get<std::string>(),
                                          readBlob(dir, f.at("blob").get<std::string>()));
            }
            if (computeRevisionId(rev->parent, rev->source) != rev->id) corrupt(where + ": id mismatch");
            if (store->nodes_.contains(rev->id)) corrupt(where + ": duplicate id");
            store->insertLocked(std::move(rev));
        } catch (const json::exception& e) {
            corrupt(where + ": " + e.what());
        }
    }
    return store;
}

std::unique_ptr<RevisionStore> RevisionStore::openOrCreate(const fs::path& dir) {
    fs::create_directories(dir / "objects");
    auto store = load(dir);
    store->attached_ = dir;
    return store;
}

}  // namespace evolvis
