#include "evolvis/diff_engine.hpp"

#include "../support/oracles.hpp"
#include "../support/random_text.hpp"

#include <doctest.h>

using namespace evolvis;

TEST_CASE("identical texts") {
    auto d = lineDiff("a\nb\n", "a\nb\n");
    CHECK(d.status == FileStatus::Unchanged);
    CHECK(d.hunks.empty());
    CHECK(lineDiff("", "").status == FileStatus::Unchanged);
}

TEST_CASE("single insertion") {
    auto d = lineDiff("a\nb\n", "a\nx\nb\n");
    CHECK(d.status == FileStatus::Modified);
    REQUIRE(d.hunks.size() == 1);
    const auto& h = d.hunks[0];
    CHECK(h.ops == std::vector<DiffOp>{{DiffTag::Keep, "a"}, {DiffTag::Add, "x"}, {DiffTag::Keep, "b"}});
    CHECK(h.fromStart == 1);
    CHECK(h.fromLen == 2);
    CHECK(h.toStart == 1);
    CHECK(h.toLen == 3);
    CHECK(applyDiff("a\nb\n", d) == "a\nx\nb\n");
}

TEST_CASE("context is limited to three lines") {
    std::string from, to;
    for (int i = 1; i <= 20; ++i) {
        from += "l" + std::to_string(i) + "\n";
        to += (i == 10 ? std::string("changed") : "l" + std::to_string(i)) + "\n";
    }
    auto d = lineDiff(from, to);
    REQUIRE(d.hunks.size() == 1);
    CHECK(d.hunks[0].fromStart == 7);
    CHECK(d.hunks[0].fromLen == 7);
    CHECK(d.countOf(DiffTag::Keep) == 6);
    CHECK(d.countOf(DiffTag::Remove) == 1);
    CHECK(d.countOf(DiffTag::Add) == 1);

    // Changes more than 6 lines apart split into two hunks.
    std::string far = to;
    far.replace(far.find("l2\n"), 3, "two\n");
    far.replace(far.find("l19\n"), 4, "nineteen\n");
    CHECK(lineDiff(from, far).hunks.size() == 3);
}

TEST_CASE("missing trailing newline") {
    auto d = lineDiff("a\nb", "a\nb\n");
    CHECK(d.status == FileStatus::Modified);
    CHECK(d.fromMissingNewline);
    CHECK_FALSE(d.toMissingNewline);
    CHECK(d.countOf(DiffTag::Remove) == 1);
    CHECK(d.countOf(DiffTag::Add) == 1);
    CHECK(applyDiff("a\nb", d) == "a\nb\n");
    CHECK(renderUnified({d}).find("\\ No newline at end of file") != std::string::npos);

    auto back = lineDiff("a\nb\n", "a\nb");
    CHECK(applyDiff("a\nb\n", back) == "a\nb");
}

TEST_CASE("mismatched base") {
    auto d = lineDiff("a\nb\n", "a\nx\nb\n");
    CHECK_THROWS_AS(applyDiff("q\nb\n", d), DiffMismatch);
    CHECK_THROWS_AS(applyDiff("a\nb", d), DiffMismatch);
}

TEST_CASE("revision diff") {
    SourceState a;
    a.files = {{"main.mv", "param a = 0.5;\npixel { a * x }\n"}};
    CHECK(revisionDiff(a, a).size() == 1);
    CHECK(revisionDiff(a, a)[0].status == FileStatus::Unchanged);

    SourceState b = a;
    b.files["shader.glsl"] = "void main() {}\n";
    auto d = revisionDiff(a, b);
    REQUIRE(d.size() == 2);
    CHECK(d[0].path == "main.mv");
    CHECK(d[0].status == FileStatus::Unchanged);
    CHECK(d[1].path == "shader.glsl");
    CHECK(d[1].status == FileStatus::Added);
    CHECK(revisionDiff(b, a)[1].status == FileStatus::Deleted);
    CHECK(applyDiff("", d[1]) == "void main() {}\n");

    // One formula line edited between hovered and current.
    SourceState hovered = a;
    hovered.files["main.mv"] = "param a = 0.5;\npixel { a * y }\n";
    auto f = revisionDiff(a, hovered);
    REQUIRE(f.size() == 1);
    CHECK(f[0].status == FileStatus::Modified);
    CHECK(f[0].hunks.size() == 1);
    CHECK(applyDiff(a.files["main.mv"], f[0]) == hovered.files["main.mv"]);

    auto reverse = revisionDiff(hovered, a);
    CHECK(reverse[0].countOf(DiffTag::Add) == f[0].countOf(DiffTag::Remove));
    CHECK(reverse[0].countOf(DiffTag::Remove) == f[0].countOf(DiffTag::Add));
}

TEST_CASE("unified rendering") {
    auto d = lineDiff("a\nb\n", "a\nx\nb\n");
    d.path = "main.mv";
    CHECK(renderUnified({d}) == "--- a/main.mv\n+++ b/main.mv\n@@ -1,2 +1,3 @@\n a\n+x\n b\n");
}

TEST_CASE("json carries line numbers per op") {
    auto j = toJson(lineDiff("a\nb\n", "a\nx\nb\n"));
    CHECK(j["status"] == "modified");
    const auto& ops = j["hunks"][0]["ops"];
    CHECK(ops[1]["tag"] == "add");
    CHECK(ops[1]["toLine"] == 2);
    CHECK_FALSE(ops[1].contains("fromLine"));
    CHECK(ops[2]["fromLine"] == 2);
    CHECK(ops[2]["toLine"] == 3);
}

TEST_CASE("random pairs round-trip with a minimal edit script") {
    std::mt19937 rng(3);
    for (int i = 0; i < 300; ++i) {
        auto [a, b] = testing::randomTextPair(rng, 60);
        CAPTURE(a);
        CAPTURE(b);
        auto d = lineDiff(a, b);
        CHECK(applyDiff(a, d) == b);
        auto la = testing::terminatedLines(a);
        auto lb = testing::terminatedLines(b);
        auto lcs = oracle::lcsLength(la, lb);
        CHECK(d.countOf(DiffTag::Remove) == la.size() - lcs);
        CHECK(d.countOf(DiffTag::Add) == lb.size() - lcs);
    }
}
