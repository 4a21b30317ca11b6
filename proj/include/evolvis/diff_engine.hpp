#pragma once

#include "evolvis/revision_store.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evolvis {

enum class DiffTag { Keep, Remove, Add };

struct DiffOp {
    DiffTag tag;
    std::string text;  // without the trailing '\n'

    bool operator==(const DiffOp&) const = default;
};

/// Contiguous region of change plus surrounding context. Starts are 1-based
/// line numbers of the first line the hunk covers on each side; for an empty
/// side the start is the line the hunk would occupy.
struct Hunk {
    int fromStart = 1;
    int fromLen = 0;
    int toStart = 1;
    int toLen = 0;
    std::vector<DiffOp> ops;

    bool operator==(const Hunk&) const = default;
};

enum class FileStatus { Modified, Added, Deleted, Unchanged };

struct FileDiff {
    std::string path;
    FileStatus status = FileStatus::Unchanged;
    std::vector<Hunk> hunks;
    bool fromMissingNewline = false;
    bool toMissingNewline = false;
    int fromLineCount = 0;
    int toLineCount = 0;

    std::size_t countOf(DiffTag tag) const;
};

class DiffMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kDiffContextLines = 3;

/// Minimal line edit script (Myers) grouped into hunks with 3 context lines.
/// Texts split on '\n'; a last line without '\n' never matches a terminated one.
FileDiff lineDiff(std::string_view from, std::string_view to);

/// One FileDiff per path in the union of both file sets, in path order.
std::vector<FileDiff> revisionDiff(const SourceState& from, const SourceState& to);

/// Replays `diff` on `from`; throws DiffMismatch if context or removed lines disagree.
std::string applyDiff(std::string_view from, const FileDiff& diff);

std::string renderUnified(const std::vector<FileDiff>& diffs);

std::string_view statusName(FileStatus status);
nlohmann::json toJson(const FileDiff& diff);

}  // namespace evolvis
