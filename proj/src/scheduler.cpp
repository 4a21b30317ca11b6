#include "evolvis/scheduler.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace evolvis {

SchedulerConfig SchedulerConfig::fromJson(const nlohmann::json& j) {
    SchedulerConfig c;
    c.debounce = Millis(j.value("debounceMs", static_cast<std::int64_t>(c.debounce.count())));
    c.renderWorkers = j.value("renderWorkers", c.renderWorkers);
    c.artifactCacheSize = j.value("artifactCacheSize", c.artifactCacheSize);
    if (c.debounce.count() < 0 || c.renderWorkers < 1 || c.artifactCacheSize < 1) {
        throw std::invalid_argument("scheduler config: debounceMs >= 0, renderWorkers >= 1, artifactCacheSize >= 1");
    }
    return c;
}

std::uint64_t Job::paramGen() const {
    if (const auto* r = std::get_if<RenderRequest>(&payload)) return r->params.generation;
    return 0;
}

// ---------------------------------------------------------------------------

void JobQueue::setDropListener(DropListener listener) {
    std::lock_guard lock(mutex_);
    dropListener_ = std::move(listener);
}

std::uint64_t JobQueue::push(Job job) {
    std::uint64_t seq;
    {
        std::lock_guard lock(mutex_);
        seq = nextSeq_++;
        job.seq = seq;
        ++stats_.enqueued;
        (job.kind == Job::Kind::Compile ? compiles_ : renders_).push_back(std::move(job));
    }
    cv_.notify_all();
    return seq;
}

std::optional<Job> JobQueue::popLocked(std::optional<Job::Kind> only) {
    auto take = [&](std::vector<Job>& v) {
        Job j = std::move(v.back());
        v.pop_back();
        ++stats_.dequeued;
        return j;
    };
    if (only != Job::Kind::Render && !compiles_.empty()) return take(compiles_);
    if (only != Job::Kind::Compile && compiles_.empty() && !renders_.empty()) return take(renders_);
    return std::nullopt;
}

Job JobQueue::next() {
    auto j = tryNext();
    if (!j) throw QueueEmpty();
    return std::move(*j);
}

std::optional<Job> JobQueue::tryNext() {
    std::optional<Job> j;
    {
        std::lock_guard lock(mutex_);
        j = popLocked(std::nullopt);
    }
    // Render waiters may proceed once the last compile is gone.
    if (j && j->kind == Job::Kind::Compile) cv_.notify_all();
    return j;
}

std::optional<Job> JobQueue::waitCompile(std::stop_token stop) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, stop, [&] { return !compiles_.empty(); });
    auto j = popLocked(Job::Kind::Compile);
    lock.unlock();
    if (j) cv_.notify_all();
    return j;
}

std::optional<Job> JobQueue::waitRender(std::stop_token stop) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, stop, [&] { return compiles_.empty() && !renders_.empty(); });
    return popLocked(Job::Kind::Render);
}

void JobQueue::report(const std::vector<Job>& dropped, DropReason reason) {
    DropListener listener;
    {
        std::lock_guard lock(mutex_);
        listener = dropListener_;
    }
    if (!listener) return;
    for (const auto& j : dropped) listener(j, reason);
}

namespace {

template <typename Pred>
std::vector<Job> extract(std::vector<Job>& jobs, Pred pred) {
    std::vector<Job> removed;
    auto keep = std::stable_partition(jobs.begin(), jobs.end(), [&](const Job& j) { return !pred(j); });
    std::move(keep, jobs.end(), std::back_inserter(removed));
    jobs.erase(keep, jobs.end());
    return removed;
}

}  // namespace

void JobQueue::markCompileSucceeded(const SessionId& session, std::uint64_t seq) {
    std::vector<Job> dropped;
    {
        std::lock_guard lock(mutex_);
        dropped = extract(compiles_, [&](const Job& j) { return j.session == session && j.seq < seq; });
        stats_.dropped += dropped.size();
    }
    if (!dropped.empty()) spdlog::debug("dropped {} stale compile(s) for session {}", dropped.size(), session);
    report(dropped, DropReason::StaleCompile);
    cv_.notify_all();
}

void JobQueue::dropRendersBefore(const SessionId& session, std::uint64_t generation) {
    std::vector<Job> dropped;
    {
        std::lock_guard lock(mutex_);
        dropped = extract(renders_, [&](const Job& j) { return j.session == session && j.paramGen() < generation; });
        stats_.dropped += dropped.size();
    }
    report(dropped, DropReason::SupersededRender);
}

std::size_t JobQueue::size() const {
    std::lock_guard lock(mutex_);
    return compiles_.size() + renders_.size();
}

std::size_t JobQueue::count(Job::Kind kind) const {
    std::lock_guard lock(mutex_);
    return kind == Job::Kind::Compile ? compiles_.size() : renders_.size();
}

std::vector<Job> JobQueue::snapshot() const {
    std::lock_guard lock(mutex_);
    std::vector<Job> out(compiles_);
    out.insert(out.end(), renders_.begin(), renders_.end());
    return out;
}

JobQueue::Stats JobQueue::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void JobQueue::notifyAll() { cv_.notify_all(); }

// ---------------------------------------------------------------------------

void Debouncer::onEdit(const SessionId& session, SourceState source, Millis now) {
    pending_[session] = Pending{now + debounce_, std::move(source)};
}

std::vector<std::pair<SessionId, CompileRequest>> Debouncer::takeDue(Millis now) {
    std::vector<std::pair<Millis, SessionId>> due;
    for (const auto& [session, p] : pending_) {
        if (p.deadline <= now) due.emplace_back(p.deadline, session);
    }
    std::sort(due.begin(), due.end());
    std::vector<std::pair<SessionId, CompileRequest>> out;
    for (const auto& [deadline, session] : due) {
        auto it = pending_.find(session);
        out.emplace_back(session, CompileRequest{std::move(it->second.source)});
        pending_.erase(it);
    }
    return out;
}

std::optional<Millis> Debouncer::nextDeadline() const {
    std::optional<Millis> best;
    for (const auto& [_, p] : pending_) {
        if (!best || p.deadline < *best) best = p.deadline;
    }
    return best;
}

bool Debouncer::pending(const SessionId& session) const { return pending_.contains(session); }

// ---------------------------------------------------------------------------

Scheduler::Scheduler(SchedulerConfig config) : config_(config), debouncer_(config.debounce) {}

void Scheduler::onEditEvent(const SessionId& session, SourceState source, Millis now) {
    std::lock_guard lock(debounceMutex_);
    debouncer_.onEdit(session, std::move(source), now);
}

std::vector<Job> Scheduler::advanceTo(Millis now) {
    std::vector<std::pair<SessionId, CompileRequest>> due;
    {
        std::lock_guard lock(debounceMutex_);
        due = debouncer_.takeDue(now);
    }
    std::vector<Job> enqueued;
    for (auto& [session, request] : due) {
        Job job{Job::Kind::Compile, 0, session, now, std::move(request)};
        job.seq = queue_.push(job);
        enqueued.push_back(std::move(job));
    }
    return enqueued;
}

std::optional<Millis> Scheduler::nextDeadline() const {
    std::lock_guard lock(debounceMutex_);
    return debouncer_.nextDeadline();
}

void Scheduler::scheduleBranchRefresh(const SessionId& session, const std::vector<RevisionId>& branch,
                                      const ParameterSet& params, Millis now) {
    queue_.dropRendersBefore(session, params.generation);
    for (const auto& rev : branch) enqueueRender(session, rev, params, now);
}

std::uint64_t Scheduler::enqueueRender(const SessionId& session, const RevisionId& revision,
                                       const ParameterSet& params, Millis now) {
    return queue_.push(Job{Job::Kind::Render, 0, session, now, RenderRequest{revision, params}});
}

// ---------------------------------------------------------------------------

ArtifactHandle ArtifactCache::get(const RevisionId& id) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(id);
    if (it == index_.end()) return nullptr;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
}

void ArtifactCache::put(const RevisionId& id, ArtifactHandle artifact) {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(id); it != index_.end()) {
        it->second->second = std::move(artifact);
        lru_.splice(lru_.begin(), lru_, it->second);
        return;
    }
    lru_.emplace_front(id, std::move(artifact));
    index_[id] = lru_.begin();
    while (lru_.size() > capacity_) {
        index_.erase(lru_.back().first);
        lru_.pop_back();
    }
}

void ArtifactCache::erase(const RevisionId& id) {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(id); it != index_.end()) {
        lru_.erase(it->second);
        index_.erase(it);
    }
}

bool ArtifactCache::contains(const RevisionId& id) const {
    std::lock_guard lock(mutex_);
    return index_.contains(id);
}

std::size_t ArtifactCache::size() const {
    std::lock_guard lock(mutex_);
    return lru_.size();
}

}  // namespace evolvis
