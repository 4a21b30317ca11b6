// Writes a binary PPM gradient to stdout.
// @param gain = 1.0 range 0 2
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

static double readGain(const char* path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    auto pos = text.find("\"gain\":");
    return pos == std::string::npos ? 1.0 : std::strtod(text.c_str() + pos + 7, nullptr);
}

int main(int argc, char** argv) {
    if (argc < 4) return 2;
    int w = std::atoi(argv[1]);
    int h = std::atoi(argv[2]);
    double gain = readGain(argv[3]);
    std::printf("P6\n%d %d\n255\n", w, h);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            double v = gain * (col + 0.5) / w;
            int c = v < 0 ? 0 : v > 1 ? 255 : static_cast<int>(v * 255 + 0.5);
            std::putchar(c);
            std::putchar(c);
            std::putchar(255 - c);
        }
    }
    return 0;
}
