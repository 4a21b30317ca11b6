#pragma once

#include "evolvis/parameters.hpp"
#include "evolvis/revision_store.hpp"
#include "evolvis/toolchain.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace evolvis {

using SessionId = std::string;

/// Milliseconds on the scheduler's clock (simulated or steady).
using Millis = std::chrono::milliseconds;

struct SchedulerConfig {
    Millis debounce{1500};
    int renderWorkers = 2;
    std::size_t artifactCacheSize = 64;

    static SchedulerConfig fromJson(const nlohmann::json& j);
};

struct CompileRequest {
    SourceState source;
};

struct RenderRequest {
    RevisionId revision;
    ParameterSet params;
};

struct Job {
    enum class Kind { Compile, Render };

    Kind kind = Kind::Compile;
    std::uint64_t seq = 0;
    SessionId session;
    Millis enqueuedAt{0};
    std::variant<CompileRequest, RenderRequest> payload;

    std::uint64_t paramGen() const;
};

class QueueEmpty : public std::runtime_error {
public:
    QueueEmpty() : std::runtime_error("job queue is empty") {}
};

/// Why a job left the queue without being dequeued.
enum class DropReason { StaleCompile, SupersededRender };

/// Two-class priority queue: compiles before renders, newest first within a
/// class. Internally synchronised; blocking waits honour a stop_token.
class JobQueue {
public:
    using DropListener = std::function<void(const Job&, DropReason)>;

    struct Stats {
        std::uint64_t enqueued = 0;
        std::uint64_t dequeued = 0;
        std::uint64_t dropped = 0;
    };

    void setDropListener(DropListener listener);

    /// Assigns the next global seq and enqueues.
    std::uint64_t push(Job job);

    Job next();
    std::optional<Job> tryNext();

    /// Blocks until a compile job is queued.
    std::optional<Job> waitCompile(std::stop_token stop);
    /// Blocks until a render job is queued and no compile is waiting.
    std::optional<Job> waitRender(std::stop_token stop);

    /// Drops this session's queued compiles older than `seq`.
    void markCompileSucceeded(const SessionId& session, std::uint64_t seq);
    /// Drops this session's queued renders whose parameter generation is below `generation`.
    void dropRendersBefore(const SessionId& session, std::uint64_t generation);

    std::size_t size() const;
    std::size_t count(Job::Kind kind) const;
    std::vector<Job> snapshot() const;
    Stats stats() const;

    /// Wakes blocked waiters so they can observe their stop tokens.
    void notifyAll();

private:
    std::optional<Job> popLocked(std::optional<Job::Kind> only);
    void report(const std::vector<Job>& dropped, DropReason reason);

    mutable std::mutex mutex_;
    std::condition_variable_any cv_;
    std::vector<Job> compiles_;  // ascending seq
    std::vector<Job> renders_;   // ascending seq
    std::uint64_t nextSeq_ = 1;
    Stats stats_;
    DropListener dropListener_;
};

/// Collapses bursts of edit events per session: a compile is enqueued once
/// `debounce` has elapsed after the last edit with no newer one.
class Debouncer {
public:
    explicit Debouncer(Millis debounce) : debounce_(debounce) {}

    void onEdit(const SessionId& session, SourceState source, Millis now);
    /// Removes and returns the edits that are due at `now`, oldest deadline first.
    std::vector<std::pair<SessionId, CompileRequest>> takeDue(Millis now);
    std::optional<Millis> nextDeadline() const;
    bool pending(const SessionId& session) const;
    Millis debounce() const { return debounce_; }

private:
    struct Pending {
        Millis deadline;
        SourceState source;
    };

    Millis debounce_;
    std::map<SessionId, Pending> pending_;
};

/// Glues debouncing and the job queue under one clock. In simulated mode
/// the owner advances time explicitly and drains jobs on its own thread.
class Scheduler {
public:
    explicit Scheduler(SchedulerConfig config);

    const SchedulerConfig& config() const { return config_; }
    JobQueue& queue() { return queue_; }

    void onEditEvent(const SessionId& session, SourceState source, Millis now);
    /// Enqueues compiles whose debounce expired at or before `now`; returns them.
    std::vector<Job> advanceTo(Millis now);
    std::optional<Millis> nextDeadline() const;

    Job next() { return queue_.next(); }
    std::optional<Job> tryNext() { return queue_.tryNext(); }

    void markCompileSucceeded(const SessionId& session, std::uint64_t seq) {
        queue_.markCompileSucceeded(session, seq);
    }

    /// Removes this session's renders of older generations, then enqueues one
    /// render per revision root→head so that the head is dequeued first.
    void scheduleBranchRefresh(const SessionId& session, const std::vector<RevisionId>& branch,
                               const ParameterSet& params, Millis now);

    std::uint64_t enqueueRender(const SessionId& session, const RevisionId& revision, const ParameterSet& params,
                                Millis now);

private:
    SchedulerConfig config_;
    mutable std::mutex debounceMutex_;
    Debouncer debouncer_;
    JobQueue queue_;
};

/// LRU map from revision to compiled artifact.
class ArtifactCache {
public:
    explicit ArtifactCache(std::size_t capacity) : capacity_(capacity) {}

    ArtifactHandle get(const RevisionId& id);
    void put(const RevisionId& id, ArtifactHandle artifact);
    void erase(const RevisionId& id);
    bool contains(const RevisionId& id) const;
    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }

private:
    using Entry = std::pair<RevisionId, ArtifactHandle>;

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<Entry> lru_;  // most recent first
    std::unordered_map<RevisionId, std::list<Entry>::iterator, RevisionIdHash> index_;
};

}  // namespace evolvis
