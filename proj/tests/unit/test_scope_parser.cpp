#include "evolvis/scope_parser.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace evolvis;

namespace {

std::string readFixture(const std::string& name) {
    std::ifstream in(std::string(EVOLVIS_FIXTURES) + "/sst/" + name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const auto kC = LanguageProfile::cLike();

}  // namespace

TEST_CASE("empty file") {
    auto f = parseScopes("", kC, "a.c");
    CHECK(f.kind == ScopeNode::Kind::File);
    CHECK(f.children.empty());
    CHECK(f.span == Span{1, 1, 1, 1});
}

TEST_CASE("nested blocks") {
    auto f = parseScopes("fn f(){ { } }", kC, "a.c");
    REQUIRE(f.children.size() == 1);
    const auto& outer = f.children[0];
    CHECK(outer.span == Span{1, 7, 1, 13});
    REQUIRE(outer.children.size() == 1);
    CHECK(outer.children[0].span == Span{1, 9, 1, 11});
    CHECK(depth(f) == 3);
    CHECK(nodeCount(f) == 3);
}

TEST_CASE("braces in comments and strings are ignored") {
    auto f = parseScopes("// {\n/* } */ s = \"{\\\"\"; c = '}'; { }", kC, "a.c");
    REQUIRE(f.children.size() == 1);
    CHECK(f.children[0].span == Span{2, 29, 2, 31});
}

TEST_CASE("columns count code points") {
    auto f = parseScopes("\"\xc3\xa9\" {}", kC, "u.c");
    REQUIRE(f.children.size() == 1);
    CHECK(f.children[0].span.startCol == 5);
}

TEST_CASE("unbalanced braces") {
    try {
        parseScopes("a {\n  b }\n}", kC, "x.c");
        FAIL("expected UnbalancedScope");
    } catch (const UnbalancedScope& e) {
        CHECK(e.file() == "x.c");
        CHECK(e.line() == 3);
        CHECK(e.col() == 1);
    }
    try {
        parseScopes("{ {\n}", kC, "y.c");
        FAIL("expected UnbalancedScope");
    } catch (const UnbalancedScope& e) {
        // Innermost unclosed brace.
        CHECK(e.line() == 1);
        CHECK(e.col() == 1);
    }
}

TEST_CASE("merge orders files by path") {
    auto root = buildScopeTree({{"z.c", "{}"}, {"a.c", ""}, {"m/b.c", "{{}}"}}, kC);
    CHECK(root.kind == ScopeNode::Kind::Root);
    REQUIRE(root.children.size() == 3);
    CHECK(root.children[0].file == "a.c");
    CHECK(root.children[1].file == "m/b.c");
    CHECK(root.children[2].file == "z.c");

    auto one = buildScopeTree({{"main.mv", "pixel { x }"}}, LanguageProfile::minivis());
    CHECK(one.children.size() == 1);

    CHECK_THROWS_AS(mergeTrees({}), std::invalid_argument);
    auto f = parseScopes("", kC, "d.c");
    CHECK_THROWS_AS(mergeTrees({f, f}), DuplicatePath);
}

TEST_CASE("structural equality ignores spans") {
    auto a = buildScopeTree({{"p.c", "int f() { return 1; }"}}, kC);
    CHECK(structurallyEqual(a, a));
    auto commented = buildScopeTree({{"p.c", "// note\nint f()\n{\n  return 1;\n}"}}, kC);
    CHECK(structurallyEqual(a, commented));
    CHECK(scopeHash(a) == scopeHash(commented));
    auto extra = buildScopeTree({{"p.c", "int f() { return 1; } {}"}}, kC);
    CHECK_FALSE(structurallyEqual(a, extra));

    auto noBlock = buildScopeTree({{"p.c", "x"}}, kC);
    auto oneBlock = buildScopeTree({{"p.c", "{}"}}, kC);
    CHECK(scopeHash(noBlock) != scopeHash(oneBlock));
    // File names are part of the structure.
    CHECK(scopeHash(buildScopeTree({{"q.c", "x"}}, kC)) != scopeHash(noBlock));
}

TEST_CASE("canonical form") {
    auto t = buildScopeTree({{"a.c", "{{}}{}"}, {"b.c", ""}}, kC);
    CHECK(canonicalForm(t) == "R(F3:a.c(B(B())B())F3:b.c())");
}

TEST_CASE("random programs match the strip-then-stack oracle") {
    std::mt19937 rng(7);
    for (int i = 0; i < 200; ++i) {
        auto text = oracle::randomBraceProgram(rng);
        CAPTURE(text);
        CHECK(parseScopes(text, kC, "r.c") == oracle::scopeOracle(text, kC, "r.c"));
    }
}

TEST_CASE("hash collisions over random trees") {
    std::mt19937 rng(11);
    std::map<std::uint64_t, std::string> seen;
    int collisions = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string text;
        int depthNow = 0;
        for (int k = std::uniform_int_distribution<int>(0, 30)(rng); k > 0; --k) {
            if (depthNow > 0 && rng() % 2) {
                text += '}';
                --depthNow;
            } else {
                text += '{';
                ++depthNow;
            }
        }
        text.append(depthNow, '}');
        auto tree = buildScopeTree({{"f.c", text}}, kC);
        auto canon = canonicalForm(tree);
        auto [it, inserted] = seen.emplace(scopeHash(tree), canon);
        if (!inserted && it->second != canon) ++collisions;
    }
    CHECK(collisions == 0);
    CHECK(seen.size() > 1000);
}

TEST_CASE("three-file fixture") {
    std::map<std::string, std::string> files;
    for (auto name : {"util.h", "shade.glsl", "main.cpp"}) files[name] = readFixture(name);
    auto root = buildScopeTree(files, kC);
    REQUIRE(root.children.size() == 3);
    const auto& cpp = root.children[0];
    const auto& glsl = root.children[1];
    const auto& header = root.children[2];
    CHECK(cpp.file == "main.cpp");
    CHECK(glsl.file == "shade.glsl");
    CHECK(header.file == "util.h");

    // Hand counts: blocks per file 8 / 3 / 1; depth counts the File node.
    CHECK(nodeCount(header) == 2);
    CHECK(depth(header) == 2);
    CHECK(nodeCount(glsl) == 4);
    CHECK(depth(glsl) == 3);
    CHECK(nodeCount(cpp) == 9);
    CHECK(depth(cpp) == 6);
    CHECK(nodeCount(root) == 16);
    CHECK(depth(root) == 7);

    CHECK(glsl.children[0].children[0].span == Span{3, 20, 5, 5});
    CHECK(header.children[0].span == Span{3, 12, 3, 29});
}

TEST_CASE("json form") {
    auto j = toJson(buildScopeTree({{"a.mv", "pixel { x }"}}, LanguageProfile::minivis()));
    CHECK(j["kind"] == "Root");
    CHECK(j["children"][0]["kind"] == "File");
    CHECK(j["children"][0]["file"] == "a.mv");
    CHECK(j["children"][0]["children"][0]["span"] == nlohmann::json::array({1, 7, 1, 11}));
}
