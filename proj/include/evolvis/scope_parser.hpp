#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evolvis {

/// 1-based, inclusive source range. Block spans include their braces.
struct Span {
    int startLine = 0;
    int startCol = 0;
    int endLine = 0;
    int endCol = 0;

    bool operator==(const Span&) const = default;
};

/// Node of a static scope tree: Root → File → nested Blocks.
struct ScopeNode {
    enum class Kind { Root, File, Block };

    Kind kind = Kind::Block;
    std::string file;
    Span span;
    std::vector<ScopeNode> children;

    bool operator==(const ScopeNode&) const = default;
};

/// Lexical conventions needed to skip braces inside comments and strings.
struct LanguageProfile {
    std::string lineComment;
    std::string blockCommentOpen;
    std::string blockCommentClose;
    std::string stringDelims;
    char escapeChar = '\\';

    /// `//`, `/* */`, `"` and `'` strings, backslash escapes (C++, GLSL).
    static LanguageProfile cLike();
    /// Same comments as cLike, `"` strings only.
    static LanguageProfile minivis();

    /// Throws std::invalid_argument when delimiters are empty or collide.
    void validate() const;
};

class UnbalancedScope : public std::runtime_error {
public:
    UnbalancedScope(std::string file, int line, int col);
    const std::string& file() const { return file_; }
    int line() const { return line_; }
    int col() const { return col_; }

private:
    std::string file_;
    int line_;
    int col_;
};

class DuplicatePath : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Builds the File node of one source file. Braces inside comments and
/// string literals are ignored; an unterminated comment or string runs to the
/// end of the file. Columns count UTF-8 code points.
ScopeNode parseScopes(std::string_view text, const LanguageProfile& profile, const std::string& path);

/// Links per-file trees under a Root, ordered by path.
ScopeNode mergeTrees(std::vector<ScopeNode> fileTrees);

/// Parses and merges every file of a source snapshot.
ScopeNode buildScopeTree(const std::map<std::string, std::string>& files, const LanguageProfile& profile);

/// Kind, File-node path and ordered children; spans are ignored.
bool structurallyEqual(const ScopeNode& a, const ScopeNode& b);

/// 64-bit hash of the span-free canonical form (first 8 bytes of its SHA-256).
std::uint64_t scopeHash(const ScopeNode& tree);

/// Span-free canonical encoding; equal strings iff structurallyEqual.
std::string canonicalForm(const ScopeNode& tree);

std::size_t nodeCount(const ScopeNode& tree);
std::size_t depth(const ScopeNode& tree);

std::string_view kindName(ScopeNode::Kind kind);
nlohmann::json toJson(const ScopeNode& node);

}  // namespace evolvis
