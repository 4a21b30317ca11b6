#include "evolvis/scope_parser.hpp"

#include "evolvis/hash.hpp"

#include <algorithm>

namespace evolvis {

LanguageProfile LanguageProfile::cLike() { return {"//", "/*", "*/", "\"'", '\\'}; }

LanguageProfile LanguageProfile::minivis() { return {"//", "/*", "*/", "\"", '\\'}; }

void LanguageProfile::validate() const {
    if (lineComment.empty() || blockCommentOpen.empty() || blockCommentClose.empty()) {
        throw std::invalid_argument("language profile: comment delimiters must be non-empty");
    }
    if (lineComment == blockCommentOpen) {
        throw std::invalid_argument("language profile: line and block comment openers collide");
    }
    if (stringDelims.empty()) throw std::invalid_argument("language profile: no string delimiters");
    for (char d : stringDelims) {
        if (d == escapeChar || lineComment.find(d) != std::string::npos ||
            blockCommentOpen.find(d) != std::string::npos || d == '{' || d == '}') {
            throw std::invalid_argument(std::string("language profile: bad string delimiter '") + d + "'");
        }
    }
    auto sorted = stringDelims;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("language profile: duplicate string delimiter");
    }
}

UnbalancedScope::UnbalancedScope(std::string file, int line, int col)
    : std::runtime_error("unbalanced scope in " + file + " at " + std::to_string(line) + ":" +
                         std::to_string(col)),
      file_(std::move(file)), line_(line), col_(col) {}

namespace {

/// Walks the text tracking line/column in code points.
class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    bool startsWith(std::string_view s) const { return text_.substr(pos_).starts_with(s); }
    int line() const { return line_; }
    int col() const { return col_; }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            char c = text_[pos_++];
            if (c == '\n') {
                lastLine_ = line_;
                lastCol_ = col_;
                ++line_;
                col_ = 1;
            } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
                // Continuation bytes belong to the code point of their lead byte.
                lastLine_ = line_;
                lastCol_ = col_;
                ++col_;
            }
        }
    }

    int lastLine() const { return lastLine_; }
    int lastCol() const { return lastCol_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    int lastLine_ = 1;
    int lastCol_ = 1;
};

void encode(const ScopeNode& node, std::string& out) {
    switch (node.kind) {
        case ScopeNode::Kind::Root: out.push_back('R'); break;
        case ScopeNode::Kind::File:
            out.push_back('F');
            out += std::to_string(node.file.size());
            out.push_back(':');
            out += node.file;
            break;
        case ScopeNode::Kind::Block: out.push_back('B'); break;
    }
    out.push_back('(');
    for (const auto& child : node.children) encode(child, out);
    out.push_back(')');
}

}  // namespace

ScopeNode parseScopes(std::string_view text, const LanguageProfile& profile, const std::string& path) {
    profile.validate();

    ScopeNode file;
    file.kind = ScopeNode::Kind::File;
    file.file = path;
    file.span = {1, 1, 1, 1};

    // Open blocks, innermost last; each owns its children until closed.
    std::vector<ScopeNode> open;
    auto attach = [&](ScopeNode node) {
        (open.empty() ? file : open.back()).children.push_back(std::move(node));
    };

    Cursor cur(text);
    while (!cur.done()) {
        if (cur.startsWith(profile.lineComment)) {
            while (!cur.done() && cur.peek() != '\n') cur.advance();
            continue;
        }
        if (cur.startsWith(profile.blockCommentOpen)) {
            cur.advance(profile.blockCommentOpen.size());
            while (!cur.done() && !cur.startsWith(profile.blockCommentClose)) cur.advance();
            cur.advance(profile.blockCommentClose.size());
            continue;
        }
        char c = cur.peek();
        if (profile.stringDelims.find(c) != std::string::npos) {
            cur.advance();
            while (!cur.done() && cur.peek() != c) {
                if (cur.peek() == profile.escapeChar) cur.advance();
                cur.advance();
            }
            cur.advance();
            continue;
        }
        if (c == '{') {
            ScopeNode block;
            block.kind = ScopeNode::Kind::Block;
            block.file = path;
            block.span.startLine = cur.line();
            block.span.startCol = cur.col();
            open.push_back(std::move(block));
        } else if (c == '}') {
            if (open.empty()) throw UnbalancedScope(path, cur.line(), cur.col());
            ScopeNode block = std::move(open.back());
            open.pop_back();
            block.span.endLine = cur.line();
            block.span.endCol = cur.col();
            attach(std::move(block));
        }
        cur.advance();
    }
    if (!open.empty()) throw UnbalancedScope(path, open.back().span.startLine, open.back().span.startCol);

    if (!text.empty()) {
        file.span.endLine = cur.lastLine();
        file.span.endCol = cur.lastCol();
    }
    return file;
}

ScopeNode mergeTrees(std::vector<ScopeNode> fileTrees) {
    if (fileTrees.empty()) throw std::invalid_argument("mergeTrees: no file trees");
    std::stable_sort(fileTrees.begin(), fileTrees.end(),
                     [](const ScopeNode& a, const ScopeNode& b) { return a.file < b.file; });
    for (std::size_t i = 0; i < fileTrees.size(); ++i) {
        if (fileTrees[i].kind != ScopeNode::Kind::File) {
            throw std::invalid_argument("mergeTrees: expected File nodes");
        }
        if (i > 0 && fileTrees[i].file == fileTrees[i - 1].file) {
            throw DuplicatePath("duplicate path '" + fileTrees[i].file + "'");
        }
    }
    ScopeNode root;
    root.kind = ScopeNode::Kind::Root;
    root.children = std::move(fileTrees);
    return root;
}

ScopeNode buildScopeTree(const std::map<std::string, std::string>& files, const LanguageProfile& profile) {
    std::vector<ScopeNode> trees;
    trees.reserve(files.size());
    for (const auto& [path, text] : files) trees.push_back(parseScopes(text, profile, path));
    return mergeTrees(std::move(trees));
}

bool structurallyEqual(const ScopeNode& a, const ScopeNode& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == ScopeNode::Kind::File && a.file != b.file) return false;
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!structurallyEqual(a.children[i], b.children[i])) return false;
    }
    return true;
}

std::string canonicalForm(const ScopeNode& tree) {
    std::string out;
    encode(tree, out);
    return out;
}

std::uint64_t scopeHash(const ScopeNode& tree) {
    auto digest = sha256(canonicalForm(tree));
    std::uint64_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | digest[static_cast<std::size_t>(i)];
    return h;
}

std::size_t nodeCount(const ScopeNode& tree) {
    std::size_t n = 1;
    for (const auto& c : tree.children) n += nodeCount(c);
    return n;
}

std::size_t depth(const ScopeNode& tree) {
    std::size_t d = 0;
    for (const auto& c : tree.children) d = std::max(d, depth(c));
    return d + 1;
}

std::string_view kindName(ScopeNode::Kind kind) {
    switch (kind) {
        case ScopeNode::Kind::Root: return "Root";
        case ScopeNode::Kind::File: return "File";
        case ScopeNode::Kind::Block: return "Block";
    }
    return "?";
}

nlohmann::json toJson(const ScopeNode& node) {
    auto children = nlohmann::json::array();
    for (const auto& c : node.children) children.push_back(toJson(c));
    return {
        {"kind", kindName(node.kind)},
        {"file", node.file},
        {"span", {node.span.startLine, node.span.startCol, node.span.endLine, node.span.endCol}},
        {"children", std::move(children)},
    };
}

}  // namespace evolvis
