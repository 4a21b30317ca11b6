#pragma once

#include "evolvis/hash.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace evolvis {

/// Snapshot of every source file of a program, keyed by relative '/'-separated path.
struct SourceState {
    std::map<std::string, std::string> files;
    std::string toolchainId;

    bool operator==(const SourceState&) const = default;
};

class RevisionId {
public:
    RevisionId() = default;
    explicit RevisionId(const Digest& digest) : digest_(digest) {}

    static std::optional<RevisionId> parse(std::string_view hex);

    std::string hex() const { return toHex(digest_); }
    const Digest& bytes() const { return digest_; }

    auto operator<=>(const RevisionId&) const = default;

private:
    Digest digest_{};
};

struct RevisionIdHash {
    std::size_t operator()(const RevisionId& id) const noexcept {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | id.bytes()[i];
        return h;
    }
};

struct Revision {
    RevisionId id;
    std::optional<RevisionId> parent;
    SourceState source;
    std::uint64_t seq = 0;
    std::int64_t createdAt = 0;  // milliseconds since the Unix epoch
    std::uint64_t sstHash = 0;
};

class StoreError : public std::runtime_error {
public:
    enum class Code { UnknownParent, UnknownRevision, InvalidPath, CorruptStore };

    StoreError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Throws StoreError(InvalidPath) for an empty file set, absolute paths, '\\'
/// separators, empty segments or ".." segments.
void validateSourceState(const SourceState& source);

/// SHA-256 over parent hex (or 64 zeros) followed by, per file in path order,
/// the 8-byte big-endian path length, path, content length and content.
RevisionId computeRevisionId(const std::optional<RevisionId>& parent, const SourceState& source);

/// Content-addressed revision tree. Commits are serialised through one writer;
/// readers receive immutable snapshots and may run on any thread.
///
/// On-disk layout (when attached to a directory):
///   objects/<first2>/<rest62>   file contents addressed by their SHA-256
///   revisions.log               one JSON object per commit, append-only
class RevisionStore {
public:
    using WallClock = std::function<std::int64_t()>;

    RevisionStore();
    explicit RevisionStore(WallClock clock);

    RevisionStore(const RevisionStore&) = delete;
    RevisionStore& operator=(const RevisionStore&) = delete;

    /// Reads a persisted store, verifying every blob and revision id.
    static std::unique_ptr<RevisionStore> load(const std::filesystem::path& dir);

    /// Loads `dir` when it already holds a store, otherwise creates it; later
    /// commits are appended to it.
    static std::unique_ptr<RevisionStore> openOrCreate(const std::filesystem::path& dir);

    /// Writes a full snapshot of the store to `dir`.
    void persist(const std::filesystem::path& dir) const;

    RevisionId commit(const std::optional<RevisionId>& parent, const SourceState& source, std::uint64_t sstHash);

    SourceState checkout(const RevisionId& id) const;
    std::shared_ptr<const Revision> get(const RevisionId& id) const;
    bool contains(const RevisionId& id) const;

    std::optional<RevisionId> parent(const RevisionId& id) const;
    std::vector<RevisionId> children(const RevisionId& id) const;
    std::vector<RevisionId> branchPath(const RevisionId& head) const;

    /// Every revision in commit order.
    std::vector<std::shared_ptr<const Revision>> all() const;
    std::optional<RevisionId> latest() const;
    std::size_t size() const;

private:
    struct Node {
        std::shared_ptr<const Revision> revision;
        std::vector<RevisionId> children;
    };

    const Node& nodeOrThrow(const RevisionId& id) const;
    void insertLocked(std::shared_ptr<const Revision> revision);
    void appendToDisk(const Revision& revision) const;

    WallClock clock_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<RevisionId, Node, RevisionIdHash> nodes_;
    std::vector<std::shared_ptr<const Revision>> ordered_;
    std::uint64_t nextSeq_ = 1;
    std::optional<std::filesystem::path> attached_;
};

}  // namespace evolvis
