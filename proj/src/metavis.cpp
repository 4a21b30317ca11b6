#include "evolvis/metavis.hpp"

#include <algorithm>

namespace evolvis {

std::vector<RevisionInfo> revisionInfos(const RevisionStore& store) {
    std::vector<RevisionInfo> out;
    for (const auto& rev : store.all()) out.push_back({rev->id, rev->parent, rev->seq, rev->sstHash});
    return out;
}

CompressedTree compressTree(std::span<const RevisionInfo> revisions, const ExpandState& expanded) {
    std::vector<const RevisionInfo*> ordered;
    ordered.reserve(revisions.size());
    for (const auto& r : revisions) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->seq < b->seq; });

    std::unordered_map<RevisionId, const RevisionInfo*, RevisionIdHash> byId;
    for (const auto* r : ordered) byId.emplace(r->id, r);

    // Parents precede children in seq order, so a single pass assigns groups.
    CompressedTree tree;
    for (const auto* r : ordered) {
        const RevisionInfo* parent = nullptr;
        if (r->parent) {
            auto it = byId.find(*r->parent);
            if (it != byId.end()) parent = it->second;
        }
        if (parent != nullptr && parent->sstHash == r->sstHash) {
            int g = tree.groupOf.at(parent->id);
            tree.groupOf[r->id] = g;
            tree.groups[static_cast<std::size_t>(g)].members.push_back(r->id);
            continue;
        }
        int g = static_cast<int>(tree.groups.size());
        tree.groups.push_back(GroupNode{g, {r->id}, r->sstHash, {}, false});
        tree.groupOf[r->id] = g;
        if (parent != nullptr) tree.groups[static_cast<std::size_t>(tree.groupOf.at(parent->id))].childGroups.push_back(g);
    }
    for (auto& g : tree.groups) g.collapsed = g.members.size() >= 2 && !expanded.contains(g.id);
    return tree;
}

std::string resultImageRef(const RevisionId& id, std::uint64_t paramGen) {
    return id.hex() + ":" + std::to_string(paramGen);
}

std::string varianceImageRef(int groupId, std::uint64_t paramGen) {
    return "g" + std::to_string(groupId) + ":" + std::to_string(paramGen);
}

BranchView branchView(std::span<const RevisionInfo> revisions, const CompressedTree& tree, const RevisionId& head,
                      const RevisionId& current, std::uint64_t paramGen, const ScopeTreeLookup& sstOf) {
    std::unordered_map<RevisionId, const RevisionInfo*, RevisionIdHash> byId;
    for (const auto& r : revisions) byId.emplace(r.id, &r);
    for (const auto* id : {&head, &current}) {
        if (!byId.contains(*id)) throw StoreError(StoreError::Code::UnknownRevision, "unknown revision " + id->hex());
    }

    std::vector<RevisionId> path;
    for (const RevisionInfo* r = byId.at(head);;) {
        path.push_back(r->id);
        if (!r->parent) break;
        r = byId.at(*r->parent);
    }
    std::reverse(path.begin(), path.end());

    BranchView view;
    view.head = head;
    view.current = current;
    std::set<RevisionId> onBranch(path.begin(), path.end());
    for (const auto& r : revisions) view.colors[r.id] = onBranch.contains(r.id) ? NodeColor::Blue : NodeColor::Grey;
    for (const auto& g : tree.groups) {
        if (g.collapsed) view.collapsedGroups.push_back(g.id);
    }

    for (std::size_t i = 0; i < path.size();) {
        int g = tree.groupOf.at(path[i]);
        std::size_t j = i;
        while (j < path.size() && tree.groupOf.at(path[j]) == g) ++j;
        const auto& group = tree.groups[static_cast<std::size_t>(g)];

        auto makeRow = [&](std::size_t from, std::size_t to) {
            BranchRow row;
            row.group = g;
            row.sstHash = group.sstHash;
            row.sst = sstOf(path[from]);
            row.collapsed = group.collapsed;
            for (std::size_t k = from; k < to; ++k) {
                row.revisions.push_back(path[k]);
                row.images.push_back(resultImageRef(path[k], paramGen));
            }
            if (row.revisions.size() >= 2) row.variance = varianceImageRef(g, paramGen);
            view.rows.push_back(std::move(row));
        };
        if (group.collapsed) {
            makeRow(i, j);
        } else {
            for (std::size_t k = i; k < j; ++k) makeRow(k, k + 1);
        }
        i = j;
    }
    return view;
}

namespace {

nlohmann::json hexList(const std::vector<RevisionId>& ids) {
    auto out = nlohmann::json::array();
    for (const auto& id : ids) out.push_back(id.hex());
    return out;
}

}  // namespace

nlohmann::json toJson(const CompressedTree& tree, const std::optional<BranchView>& view) {
    auto groups = nlohmann::json::array();
    for (const auto& g : tree.groups) {
        groups.push_back({{"id", g.id},
                          {"members", hexList(g.members)},
                          {"sstHash", toHex(g.sstHash)},
                          {"children", g.childGroups},
                          {"collapsed", g.collapsed}});
    }
    nlohmann::json branch = nullptr;
    if (view) {
        auto rows = nlohmann::json::array();
        for (const auto& r : view->rows) {
            rows.push_back({{"group", r.group},
                            {"revisions", hexList(r.revisions)},
                            {"images", r.images},
                            {"sstHash", toHex(r.sstHash)},
                            {"sst", toJson(r.sst)},
                            {"variance", r.variance ? nlohmann::json(*r.variance) : nlohmann::json(nullptr)},
                            {"collapsed", r.collapsed}});
        }
        auto colors = nlohmann::json::object();
        for (const auto& [id, c] : view->colors) colors[id.hex()] = c == NodeColor::Blue ? "blue" : "grey";
        branch = {{"head", view->head.hex()},
                  {"current", view->current.hex()},
                  {"rows", std::move(rows)},
                  {"colors", std::move(colors)},
                  {"collapsedGroups", view->collapsedGroups}};
    }
    return {{"groups", std::move(groups)}, {"branch", std::move(branch)}};
}

}  // namespace evolvis
