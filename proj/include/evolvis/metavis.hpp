#pragma once

#include "evolvis/revision_store.hpp"
#include "evolvis/scope_parser.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace evolvis {

/// What the tree compression needs to know about one revision.
struct RevisionInfo {
    RevisionId id;
    std::optional<RevisionId> parent;
    std::uint64_t seq = 0;
    std::uint64_t sstHash = 0;
};

std::vector<RevisionInfo> revisionInfos(const RevisionStore& store);

/// Per-session expand/collapse state: ids of groups the user expanded.
using ExpandState = std::set<int>;

struct GroupNode {
    int id = 0;
    std::vector<RevisionId> members;  // seq order
    std::uint64_t sstHash = 0;
    std::vector<int> childGroups;     // ordered by the seq of the child revision
    bool collapsed = false;

    bool operator==(const GroupNode&) const = default;
};

struct CompressedTree {
    std::vector<GroupNode> groups;  // groups[i].id == i, ordered by first member seq
    std::unordered_map<RevisionId, int, RevisionIdHash> groupOf;
};

/// Merges every revision with its parent when both share an SST hash. A group
/// is collapsed when it has at least two members and is not expanded.
CompressedTree compressTree(std::span<const RevisionInfo> revisions, const ExpandState& expanded = {});

enum class NodeColor { Blue, Grey };

struct BranchRow {
    int group = 0;
    std::vector<RevisionId> revisions;  // on-branch revisions shown by this row
    std::vector<std::string> images;
    std::uint64_t sstHash = 0;
    ScopeNode sst;
    std::optional<std::string> variance;
    bool collapsed = false;
};

struct BranchView {
    RevisionId head;
    RevisionId current;
    std::vector<BranchRow> rows;  // root → head
    std::map<RevisionId, NodeColor> colors;
    std::vector<int> collapsedGroups;
};

using ScopeTreeLookup = std::function<ScopeNode(const RevisionId&)>;

std::string resultImageRef(const RevisionId& id, std::uint64_t paramGen);
std::string varianceImageRef(int groupId, std::uint64_t paramGen);

/// Rows for branchPath(head) grouped by `tree`; collapsed groups become one
/// row with a variance ref when two or more of their members are on the branch.
/// Throws StoreError(UnknownRevision) for an unknown head or current.
BranchView branchView(std::span<const RevisionInfo> revisions, const CompressedTree& tree, const RevisionId& head,
                      const RevisionId& current, std::uint64_t paramGen, const ScopeTreeLookup& sstOf);

/// `{"groups":[...],"branch":{...}}`; branch is null when there is no view.
nlohmann::json toJson(const CompressedTree& tree, const std::optional<BranchView>& view);

}  // namespace evolvis
