#include "util.h"
#include <cstdio>

namespace app {
struct Grid {
    int w = 4, h = 4;
    int cells() const { return w * h; }
};

int run(const char* label) {
    Grid g;
    for (int y = 0; y < g.h; ++y) {
        for (int x = 0; x < g.w; ++x) {
            if ((x + y) % 2 == 0) {
                std::printf("%s{%d}\n", label, x);
            }
        }
    }
    return g.cells();
}
}  // namespace app {

int main() { return app::run("}"); }
