#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace testing {

/// Pairs of texts drawn from a small line vocabulary so that diffs mix long
/// common runs with edits; the trailing newline is random on both sides.
inline std::pair<std::string, std::string> randomTextPair(std::mt19937& rng, int maxLines = 200) {
    static const std::vector<std::string> vocab = {
        "",  "{", "}", "  x = 1;", "  y = x * 2;", "return y;", "pixel { x }", "// note", "  if (a) {", "\t",
    };
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto randomLines = [&](int n) {
        std::vector<std::string> lines;
        for (int i = 0; i < n; ++i) lines.push_back(vocab[pick(0, static_cast<int>(vocab.size()) - 1)]);
        return lines;
    };
    auto join = [&](const std::vector<std::string>& lines) {
        std::string out;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            out += lines[i];
            if (i + 1 < lines.size() || pick(0, 3) != 0) out += '\n';
        }
        return out;
    };

    auto a = randomLines(pick(0, maxLines));
    std::vector<std::string> b;
    if (pick(0, 4) == 0) {
        b = randomLines(pick(0, maxLines));
    } else {
        b = a;
        for (int edits = pick(0, 12); edits > 0; --edits) {
            int op = pick(0, 2);
            if (op == 0 && static_cast<int>(b.size()) < maxLines) {
                b.insert(b.begin() + pick(0, static_cast<int>(b.size())), vocab[pick(0, 9)]);
            } else if (op == 1 && !b.empty()) {
                b.erase(b.begin() + pick(0, static_cast<int>(b.size()) - 1));
            } else if (!b.empty()) {
                b[pick(0, static_cast<int>(b.size()) - 1)] = vocab[pick(0, 9)];
            }
        }
    }
    return {join(a), join(b)};
}

/// Lines with their terminator kept, so "x" and "x\n" differ.
inline std::vector<std::string> terminatedLines(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
        auto nl = s.find('\n', start);
        auto end = nl == std::string::npos ? s.size() : nl + 1;
        out.push_back(s.substr(start, end - start));
        start = end;
    }
    return out;
}

}  // namespace testing
