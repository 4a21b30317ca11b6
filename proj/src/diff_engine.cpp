#include "evolvis/diff_engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace evolvis {

namespace {

struct Lines {
    std::vector<std::string_view> text;
    bool missingNewline = false;
};

Lines splitLines(std::string_view s) {
    Lines out;
    std::size_t start = 0;
    while (start < s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            out.text.push_back(s.substr(start));
            out.missingNewline = true;
            break;
        }
        out.text.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

struct Edit {
    DiffTag tag;
    int fromIndex;  // 0-based, valid for Keep/Remove
    int toIndex;    // 0-based, valid for Keep/Add
};

/// Greedy Myers O((n+m)·D) shortest edit script with per-step snapshots of V.
std::vector<Edit> myers(const Lines& a, const Lines& b) {
    const int n = static_cast<int>(a.text.size());
    const int m = static_cast<int>(b.text.size());
    auto same = [&](int i, int j) {
        if (a.text[static_cast<std::size_t>(i)] != b.text[static_cast<std::size_t>(j)]) return false;
        // The unterminated final line only matches another unterminated final line.
        bool aLast = a.missingNewline && i == n - 1;
        bool bLast = b.missingNewline && j == m - 1;
        return aLast == bLast;
    };

    const int max = n + m;
    const int offset = max + 1;
    std::vector<int> v(static_cast<std::size_t>(2 * max + 3), 0);
    std::vector<std::vector<int>> trace;
    int finalD = -1;
    for (int d = 0; d <= max && finalD < 0; ++d) {
        trace.push_back(v);
        for (int k = -d; k <= d; k += 2) {
            int x;
            if (k == -d || (k != d && v[static_cast<std::size_t>(offset + k - 1)] < v[static_cast<std::size_t>(offset + k + 1)])) {
                x = v[static_cast<std::size_t>(offset + k + 1)];
            } else {
                x = v[static_cast<std::size_t>(offset + k - 1)] + 1;
            }
            int y = x - k;
            while (x < n && y < m && same(x, y)) {
                ++x;
                ++y;
            }
            v[static_cast<std::size_t>(offset + k)] = x;
            if (x >= n && y >= m) {
                finalD = d;
                break;
            }
        }
    }

    std::vector<Edit> edits;
    int x = n;
    int y = m;
    for (int d = finalD; d >= 0; --d) {
        const auto& pv = trace[static_cast<std::size_t>(d)];
        int k = x - y;
        int prevK;
        if (d == 0) {
            prevK = 0;
        } else if (k == -d || (k != d && pv[static_cast<std::size_t>(offset + k - 1)] < pv[static_cast<std::size_t>(offset + k + 1)])) {
            prevK = k + 1;
        } else {
            prevK = k - 1;
        }
        int prevX = d == 0 ? 0 : pv[static_cast<std::size_t>(offset + prevK)];
        int prevY = prevX - prevK;
        while (x > prevX && y > prevY) {
            --x;
            --y;
            edits.push_back({DiffTag::Keep, x, y});
        }
        if (d > 0) {
            if (x == prevX) {
                edits.push_back({DiffTag::Add, x, prevY});
            } else {
                edits.push_back({DiffTag::Remove, prevX, y});
            }
        }
        x = prevX;
        y = prevY;
    }
    std::reverse(edits.begin(), edits.end());
    return edits;
}

}  // namespace

std::size_t FileDiff::countOf(DiffTag tag) const {
    std::size_t n = 0;
    for (const auto& h : hunks) {
        n += static_cast<std::size_t>(std::count_if(h.ops.begin(), h.ops.end(), [&](const DiffOp& op) { return op.tag == tag; }));
    }
    return n;
}

FileDiff lineDiff(std::string_view from, std::string_view to) {
    auto a = splitLines(from);
    auto b = splitLines(to);
    FileDiff diff;
    diff.fromMissingNewline = a.missingNewline;
    diff.toMissingNewline = b.missingNewline;
    diff.fromLineCount = static_cast<int>(a.text.size());
    diff.toLineCount = static_cast<int>(b.text.size());

    auto edits = myers(a, b);
    const int count = static_cast<int>(edits.size());

    // Mark edits that fall within kDiffContextLines of a change.
    std::vector<bool> include(static_cast<std::size_t>(count), false);
    for (int i = 0; i < count; ++i) {
        if (edits[static_cast<std::size_t>(i)].tag == DiffTag::Keep) continue;
        for (int j = std::max(0, i - kDiffContextLines); j <= std::min(count - 1, i + kDiffContextLines); ++j) {
            include[static_cast<std::size_t>(j)] = true;
        }
    }

    int fromLine = 0;  // 0-based cursors
    int toLine = 0;
    Hunk* hunk = nullptr;
    for (int i = 0; i < count; ++i) {
        const auto& e = edits[static_cast<std::size_t>(i)];
        if (!include[static_cast<std::size_t>(i)]) {
            hunk = nullptr;
        } else {
            if (hunk == nullptr) {
                diff.hunks.push_back(Hunk{fromLine + 1, 0, toLine + 1, 0, {}});
                hunk = &diff.hunks.back();
            }
            switch (e.tag) {
                case DiffTag::Keep:
                    hunk->ops.push_back({DiffTag::Keep, std::string(a.text[static_cast<std::size_t>(e.fromIndex)])});
                    ++hunk->fromLen;
                    ++hunk->toLen;
                    break;
                case DiffTag::Remove:
                    hunk->ops.push_back({DiffTag::Remove, std::string(a.text[static_cast<std::size_t>(e.fromIndex)])});
                    ++hunk->fromLen;
                    break;
                case DiffTag::Add:
                    hunk->ops.push_back({DiffTag::Add, std::string(b.text[static_cast<std::size_t>(e.toIndex)])});
                    ++hunk->toLen;
                    break;
            }
        }
        if (e.tag != DiffTag::Add) ++fromLine;
        if (e.tag != DiffTag::Remove) ++toLine;
    }

    if (diff.hunks.empty()) {
        diff.status = FileStatus::Unchanged;
    } else {
        diff.status = FileStatus::Modified;
    }
    return diff;
}

std::vector<FileDiff> revisionDiff(const SourceState& from, const SourceState& to) {
    std::set<std::string> paths;
    for (const auto& [p, _] : from.files) paths.insert(p);
    for (const auto& [p, _] : to.files) paths.insert(p);

    std::vector<FileDiff> out;
    for (const auto& path : paths) {
        auto f = from.files.find(path);
        auto t = to.files.find(path);
        FileDiff d;
        if (f == from.files.end()) {
            d = lineDiff("", t->second);
            d.status = FileStatus::Added;
        } else if (t == to.files.end()) {
            d = lineDiff(f->second, "");
            d.status = FileStatus::Deleted;
        } else {
            d = lineDiff(f->second, t->second);
        }
        d.path = path;
        out.push_back(std::move(d));
    }
    return out;
}

std::string applyDiff(std::string_view from, const FileDiff& diff) {
    auto a = splitLines(from);
    if (a.missingNewline != diff.fromMissingNewline) {
        throw DiffMismatch("trailing newline of base text disagrees with diff");
    }
    const int n = static_cast<int>(a.text.size());

    std::vector<std::string_view> out;
    int cursor = 0;  // 0-based index into a
    for (const auto& h : diff.hunks) {
        int start = h.fromStart - 1;
        if (start < cursor || start > n) throw DiffMismatch("hunk out of order or out of range");
        for (; cursor < start; ++cursor) out.push_back(a.text[static_cast<std::size_t>(cursor)]);
        for (const auto& op : h.ops) {
            if (op.tag == DiffTag::Add) {
                out.push_back(op.text);
                continue;
            }
            if (cursor >= n || a.text[static_cast<std::size_t>(cursor)] != op.text) {
                throw DiffMismatch(fmt::format("line {} does not match diff context", cursor + 1));
            }
            if (op.tag == DiffTag::Keep) out.push_back(a.text[static_cast<std::size_t>(cursor)]);
            ++cursor;
        }
    }
    for (; cursor < n; ++cursor) out.push_back(a.text[static_cast<std::size_t>(cursor)]);

    std::string result;
    for (std::size_t i = 0; i < out.size(); ++i) {
        result += out[i];
        if (i + 1 < out.size() || !diff.toMissingNewline) result.push_back('\n');
    }
    return result;
}

std::string_view statusName(FileStatus status) {
    switch (status) {
        case FileStatus::Modified: return "modified";
        case FileStatus::Added: return "added";
        case FileStatus::Deleted: return "deleted";
        case FileStatus::Unchanged: return "unchanged";
    }
    return "?";
}

nlohmann::json toJson(const FileDiff& diff) {
    auto hunks = nlohmann::json::array();
    for (const auto& h : diff.hunks) {
        auto ops = nlohmann::json::array();
        int fromLine = h.fromStart;
        int toLine = h.toStart;
        for (const auto& op : h.ops) {
            nlohmann::json o = {{"text", op.text}};
            switch (op.tag) {
                case DiffTag::Keep:
                    o["tag"] = "keep";
                    o["fromLine"] = fromLine++;
                    o["toLine"] = toLine++;
                    break;
                case DiffTag::Remove:
                    o["tag"] = "remove";
                    o["fromLine"] = fromLine++;
                    break;
                case DiffTag::Add:
                    o["tag"] = "add";
                    o["toLine"] = toLine++;
                    break;
            }
            ops.push_back(std::move(o));
        }
        hunks.push_back({{"fromStart", h.fromStart},
                         {"fromLen", h.fromLen},
                         {"toStart", h.toStart},
                         {"toLen", h.toLen},
                         {"ops", std::move(ops)}});
    }
    return {
        {"path", diff.path},
        {"status", statusName(diff.status)},
        {"fromMissingNewline", diff.fromMissingNewline},
        {"toMissingNewline", diff.toMissingNewline},
        {"fromLineCount", diff.fromLineCount},
        {"toLineCount", diff.toLineCount},
        {"hunks", std::move(hunks)},
    };
}

std::string renderUnified(const std::vector<FileDiff>& diffs) {
    std::string out;
    for (const auto& d : diffs) {
        if (d.hunks.empty()) continue;
        out += fmt::format("--- {}\n+++ {}\n", d.status == FileStatus::Added ? "/dev/null" : "a/" + d.path,
                           d.status == FileStatus::Deleted ? "/dev/null" : "b/" + d.path);
        for (const auto& h : d.hunks) {
            // Unified diffs number an empty side by the line before it.
            out += fmt::format("@@ -{},{} +{},{} @@\n", h.fromLen ? h.fromStart : h.fromStart - 1, h.fromLen,
                               h.toLen ? h.toStart : h.toStart - 1, h.toLen);
            int fromLine = h.fromStart;
            int toLine = h.toStart;
            const int fromTotal = d.fromLineCount;
            const int toTotal = d.toLineCount;
            for (const auto& op : h.ops) {
                char mark = op.tag == DiffTag::Keep ? ' ' : op.tag == DiffTag::Remove ? '-' : '+';
                out += mark;
                out += op.text;
                out += '\n';
                bool fromEnd = op.tag != DiffTag::Add && fromLine == fromTotal && d.fromMissingNewline;
                bool toEnd = op.tag != DiffTag::Remove && toLine == toTotal && d.toMissingNewline;
                if (op.tag != DiffTag::Add) ++fromLine;
                if (op.tag != DiffTag::Remove) ++toLine;
                if ((op.tag == DiffTag::Keep && (fromEnd || toEnd)) || (op.tag == DiffTag::Remove && fromEnd) ||
                    (op.tag == DiffTag::Add && toEnd)) {
                    out += "\\ No newline at end of file\n";
                }
            }
        }
    }
    return out;
}

}  // namespace evolvis
