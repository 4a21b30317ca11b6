// Command-line front end: run the live-coding server or use the core
// libraries directly on files.
#include "evolvis/api_service.hpp"
#include "evolvis/diff_engine.hpp"
#include "evolvis/image_lab.hpp"
#include "evolvis/param_manager.hpp"
#include "evolvis/scope_parser.hpp"
#include "evolvis/ws_server.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace evolvis;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string readFile(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFile(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Files become entries keyed by file name; directories contribute every
/// regular file below them, keyed by the path relative to the directory.
std::map<std::string, std::string> loadSources(const std::vector<std::string>& inputs) {
    std::map<std::string, std::string> files;
    for (const auto& input : inputs) {
        fs::path p(input);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file()) files[fs::relative(e.path(), p).generic_string()] = readFile(e.path());
            }
        } else {
            files[p.filename().generic_string()] = readFile(p);
        }
    }
    return files;
}

ParamValue parseValue(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(std::stod(item));
    if (parts.size() == 1) return parts[0];
    if (parts.size() == 3) return Vec3{parts[0], parts[1], parts[2]};
    throw std::invalid_argument("parameter value must be a number or x,y,z: " + text);
}

Image readImage(const fs::path& p) { return decodeImage(readFile(p)); }

void writeImage(const fs::path& p, const Image& img) {
    writeFile(p, p.extension() == ".ppm" ? encodePPM(img) : encodePNG(img));
}

ToolchainRegistry registry(const std::string& dir) {
    auto r = ToolchainRegistry::withBuiltins();
    if (!dir.empty()) r.loadDirectory(dir);
    return r;
}

LanguageProfile profileNamed(const std::string& name) {
    if (name == "minivis") return LanguageProfile::minivis();
    return LanguageProfile::cLike();
}

volatile std::sig_atomic_t stopRequested = 0;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolvis: live coding with a revision tree of rendered results"};
    app.require_subcommand(1);
    std::string logLevel = "info";
    app.add_option("--log-level", logLevel, "trace, debug, info, warn, error or off");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the JSON-RPC server over WebSocket");
    std::string listen = "127.0.0.1:8765";
    std::string toolchainDir;
    std::string storeDir;
    std::string configFile;
    std::optional<std::int64_t> debounceMs;
    std::optional<int> renderWorkers;
    std::optional<std::size_t> cacheSize;
    int ioThreads = 2;
    serve->add_option("--listen", listen, "host:port; port 0 picks a free one")->capture_default_str();
    serve->add_option("--toolchains", toolchainDir, "Directory of <id>.json toolchain manifests");
    serve->add_option("--store", storeDir, "Persist each session's revisions under this directory");
    serve->add_option("--config", configFile, "JSON file with debounceMs, renderWorkers, artifactCacheSize");
    serve->add_option("--debounce-ms", debounceMs);
    serve->add_option("--render-workers", renderWorkers);
    serve->add_option("--artifact-cache", cacheSize);
    serve->add_option("--io-threads", ioThreads)->capture_default_str();

    // render
    auto* render = app.add_subcommand("render", "Compile sources and render one image");
    std::vector<std::string> renderInputs;
    std::string renderToolchain = "minivis";
    std::string output = "out.png";
    int width = 256, height = 256;
    std::vector<std::string> sets;
    render->add_option("inputs", renderInputs, "Source files or directories")->required();
    render->add_option("-t,--toolchain", renderToolchain)->capture_default_str();
    render->add_option("--toolchains", toolchainDir, "Directory of toolchain manifests");
    render->add_option("-o,--output", output, ".png or .ppm")->capture_default_str();
    render->add_option("--width", width)->capture_default_str()->check(CLI::Range(1, 8192));
    render->add_option("--height", height)->capture_default_str()->check(CLI::Range(1, 8192));
    render->add_option("-p,--param", sets, "name=value or name=x,y,z");

    // sst
    auto* sst = app.add_subcommand("sst", "Print the scope structure tree of sources");
    std::vector<std::string> sstInputs;
    std::string language = "c-like";
    bool sstJson = false;
    sst->add_option("inputs", sstInputs)->required();
    sst->add_option("-l,--language", language)->check(CLI::IsMember({"c-like", "minivis"}))->capture_default_str();
    sst->add_flag("--json", sstJson, "Full tree with spans");

    // diff
    auto* diff = app.add_subcommand("diff", "Line diff between two files or directories");
    std::string diffFrom, diffTo;
    bool diffJson = false;
    diff->add_option("from", diffFrom)->required();
    diff->add_option("to", diffTo)->required();
    diff->add_flag("--json", diffJson);

    // variance
    auto* variance = app.add_subcommand("variance", "Per-pixel variance image of equally sized images");
    std::vector<std::string> images;
    std::string varianceOut = "variance.png";
    variance->add_option("images", images)->required()->expected(2, -1);
    variance->add_option("-o,--output", varianceOut)->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(logLevel));

    try {
        if (*serve) {
            ServiceConfig config;
            if (!configFile.empty()) config.scheduler = SchedulerConfig::fromJson(json::parse(readFile(configFile)));
            if (debounceMs) config.scheduler.debounce = Millis(*debounceMs);
            if (renderWorkers) config.scheduler.renderWorkers = *renderWorkers;
            if (cacheSize) config.scheduler.artifactCacheSize = *cacheSize;
            SchedulerConfig::fromJson({{"debounceMs", config.scheduler.debounce.count()},
                                       {"renderWorkers", config.scheduler.renderWorkers},
                                       {"artifactCacheSize", config.scheduler.artifactCacheSize}});
            if (!storeDir.empty()) config.storeRoot = fs::path(storeDir);

            auto colon = listen.rfind(':');
            if (colon == std::string::npos) throw std::invalid_argument("--listen expects host:port");
            auto port = static_cast<unsigned short>(std::stoi(listen.substr(colon + 1)));

            ApiService service(registry(toolchainDir), config);
            WsServer server(service, listen.substr(0, colon), port);
            service.start();
            // Printed on stdout so scripts can discover a port chosen by the OS.
            std::cout << "listening on " << listen.substr(0, colon) << ":" << server.port() << std::endl;
            std::signal(SIGINT, [](int) { stopRequested = 1; });
            std::signal(SIGTERM, [](int) { stopRequested = 1; });
            server.start(ioThreads);
            while (!stopRequested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            spdlog::info("shutting down");
            server.stop();
            service.stop();
        }
        if (*render) {
            auto tools = registry(toolchainDir);
            auto adapter = tools.find(renderToolchain);
            if (!adapter) throw std::invalid_argument("unknown toolchain: " + renderToolchain);
            SourceState source{loadSources(renderInputs), renderToolchain};
            auto result = adapter->compile(source);
            for (const auto& d : result.diagnostics)
                std::cerr << d.file << ":" << d.line << ":" << d.col << ": " << d.message << "\n";
            if (!result.ok) return 1;
            ParameterSet active;
            for (const auto& s : sets) {
                auto eq = s.find('=');
                if (eq == std::string::npos) throw std::invalid_argument("--param expects name=value");
                active.values[s.substr(0, eq)] = parseValue(s.substr(eq + 1));
            }
            auto params = effectiveParams(extractParams(source, *adapter), active);
            writeImage(output, adapter->run(*result.artifact, params, width, height));
            std::cout << output << "\n";
        }
        if (*sst) {
            auto tree = buildScopeTree(loadSources(sstInputs), profileNamed(language));
            if (sstJson)
                std::cout << toJson(tree).dump(2) << "\n";
            else
                std::cout << canonicalForm(tree) << "\nnodes " << nodeCount(tree) << " depth " << depth(tree)
                          << " hash " << toHex(scopeHash(tree)) << "\n";
        }
        if (*diff) {
            SourceState a{loadSources({diffFrom}), ""};
            SourceState b{loadSources({diffTo}), ""};
            // Two plain files compare as one path.
            if (!fs::is_directory(diffFrom) && !fs::is_directory(diffTo) && a.files.begin()->first != b.files.begin()->first) {
                b.files = {{a.files.begin()->first, b.files.begin()->second}};
            }
            auto diffs = revisionDiff(a, b);
            if (diffJson) {
                json out = json::array();
                for (const auto& d : diffs) out.push_back(toJson(d));
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << renderUnified(diffs);
            }
            bool changed = std::any_of(diffs.begin(), diffs.end(), [](const FileDiff& d) { return d.status != FileStatus::Unchanged; });
            return changed ? 1 : 0;
        }
        if (*variance) {
            std::vector<Image> stack;
            for (const auto& p : images) stack.push_back(readImage(p));
            writeImage(varianceOut, varianceImage(stack));
            std::cout << varianceOut << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "evolvis: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
