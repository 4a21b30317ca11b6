#include "evolvis/toolchain.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

namespace evolvis {

namespace fs = std::filesystem;

namespace {

/// Temporary directory removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        auto pattern = (fs::temp_directory_path() / "evolvis-XXXXXX").string();
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        if (mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct ExternalArtifact final : Artifact {
    std::shared_ptr<ScratchDir> scratch;
    fs::path srcDir;
    fs::path outDir;
};

struct ProcessResult {
    int exitCode = -1;
    bool timedOut = false;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs `/bin/sh -c command` in `cwd`, capturing output into files under `logDir`.
ProcessResult runShell(const std::string& command, const fs::path& cwd, const fs::path& logDir,
                       std::chrono::duration<double> timeout) {
    auto outPath = (logDir / ".stdout").string();
    auto errPath = (logDir / ".stderr").string();
    auto cwdStr = cwd.string();

    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        int out = open(outPath.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int err = open(errPath.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int devnull = open("/dev/null", O_RDONLY);
        if (out < 0 || err < 0 || devnull < 0 || chdir(cwdStr.c_str()) != 0) _exit(127);
        dup2(devnull, 0);
        dup2(out, 1);
        dup2(err, 2);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);

    ProcessResult result;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
    int status = 0;
    while (true) {
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw std::runtime_error("waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timedOut = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!result.timedOut) result.exitCode = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    result.out = slurp(outPath);
    result.err = slurp(errPath);
    return result;
}

std::string expand(std::string text, const std::map<std::string, std::string>& vars) {
    for (const auto& [key, value] : vars) {
        auto token = "{" + key + "}";
        for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
            text.replace(pos, token.size(), value);
        }
    }
    return text;
}

void writeSources(const SourceState& source, const fs::path& dir) {
    for (const auto& [path, content] : source.files) {
        auto target = dir / path;
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
}

}  // namespace

ExternalManifest ExternalManifest::fromJson(const nlohmann::json& j, const std::string& id) {
    try {
        ExternalManifest m;
        m.id = j.value("id", id);
        m.buildCmd = j.at("buildCmd").get<std::string>();
        m.runCmd = j.at("runCmd").get<std::string>();
        m.imagePath = j.at("imagePath").get<std::string>();
        m.timeoutSeconds = j.value("timeoutSeconds", 60.0);
        m.artifactName = j.value("artifact", std::string("app"));
        m.language = j.value("language", std::string("c-like"));
        if (m.timeoutSeconds <= 0) throw ToolchainError(ToolchainError::Code::InvalidManifest, "timeoutSeconds must be positive");
        if (m.language != "c-like" && m.language != "minivis") {
            throw ToolchainError(ToolchainError::Code::InvalidManifest, "unknown language '" + m.language + "'");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ToolchainError(ToolchainError::Code::InvalidManifest, "manifest '" + id + "': " + e.what());
    }
}

ExternalManifest ExternalManifest::load(const fs::path& file) {
    std::ifstream in(file);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ToolchainError(ToolchainError::Code::InvalidManifest, "cannot parse " + file.string());
    return fromJson(j, file.stem().string());
}

ExternalToolchain::ExternalToolchain(ExternalManifest manifest) : manifest_(std::move(manifest)) {}

LanguageProfile ExternalToolchain::scopeProfile() const {
    return manifest_.language == "minivis" ? LanguageProfile::minivis() : LanguageProfile::cLike();
}

std::vector<ParameterDecl> ExternalToolchain::declaredParams(const SourceState& source) const {
    return parseParamAnnotations(source);
}

CompileResult ExternalToolchain::compile(const SourceState& source) const {
    auto scratch = std::make_shared<ScratchDir>();
    auto artifact = std::make_shared<ExternalArtifact>();
    artifact->scratch = scratch;
    artifact->srcDir = scratch->path() / "src";
    artifact->outDir = scratch->path() / "out";
    fs::create_directories(artifact->srcDir);
    fs::create_directories(artifact->outDir);
    writeSources(source, artifact->srcDir);

    auto cmd = expand(manifest_.buildCmd, {{"srcDir", artifact->srcDir.string()},
                                           {"outDir", artifact->outDir.string()},
                                           {"artifact", (artifact->outDir / manifest_.artifactName).string()}});
    auto result = runShell(cmd, artifact->srcDir, scratch->path(), std::chrono::duration<double>(manifest_.timeoutSeconds));
    if (result.timedOut) {
        throw ToolchainError(ToolchainError::Code::Timeout,
                             fmt::format("build of '{}' exceeded {} s", manifest_.id, manifest_.timeoutSeconds));
    }
    if (result.exitCode != 0) {
        auto diags = parseCompilerOutput(result.err);
        if (diags.empty()) diags.push_back({"", 0, 0, fmt::format("build exited with code {}", result.exitCode), ""});
        return CompileResult::failure(std::move(diags));
    }
    return CompileResult::success(std::move(artifact));
}

Image ExternalToolchain::run(const Artifact& artifact, const ParameterSet& params, int width, int height) const {
    const auto* ext = dynamic_cast<const ExternalArtifact*>(&artifact);
    if (ext == nullptr) throw ToolchainError(ToolchainError::Code::InvalidArtifact, "artifact not produced by " + manifest_.id);

    ScratchDir runDir;
    auto paramsFile = runDir.path() / "params.json";
    {
        std::ofstream out(paramsFile);
        out << toJson(params.values).dump();
    }
    std::map<std::string, std::string> vars = {
        {"srcDir", ext->srcDir.string()},
        {"outDir", ext->outDir.string()},
        {"artifact", (ext->outDir / manifest_.artifactName).string()},
        {"width", std::to_string(width)},
        {"height", std::to_string(height)},
        {"paramsFile", paramsFile.string()},
        {"runDir", runDir.path().string()},
    };
    auto result = runShell(expand(manifest_.runCmd, vars), runDir.path(), runDir.path(),
                           std::chrono::duration<double>(manifest_.timeoutSeconds));
    if (result.timedOut) {
        throw ToolchainError(ToolchainError::Code::Timeout,
                             fmt::format("run of '{}' exceeded {} s", manifest_.id, manifest_.timeoutSeconds));
    }
    if (result.exitCode != 0) {
        throw ToolchainError(ToolchainError::Code::NonZeroExit,
                             fmt::format("run exited with code {}: {}", result.exitCode, result.err));
    }
    fs::path imagePath = expand(manifest_.imagePath, vars);
    if (imagePath.is_relative()) imagePath = runDir.path() / imagePath;
    if (!fs::exists(imagePath)) {
        throw ToolchainError(ToolchainError::Code::MissingOutputImage, "no output image at " + imagePath.string());
    }
    return decodeImage(slurp(imagePath));
}

std::vector<Diagnostic> parseCompilerOutput(std::string_view text) {
    static const std::regex located(R"(^(.+?):(\d+):(\d+):\s?(.*)$)");
    std::vector<Diagnostic> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::smatch m;
        if (std::regex_match(line, m, located)) {
            out.push_back({m[1].str(), std::stoi(m[2].str()), std::stoi(m[3].str()), m[4].str(), ""});
        } else {
            out.push_back({"", 0, 0, line, ""});
        }
    }
    return out;
}

std::vector<ParameterDecl> parseParamAnnotations(const SourceState& source) {
    static const std::string num = R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";
    static const std::regex annotation(
        R"(@param\s+([A-Za-z_]\w*)\s*=\s*(?:\(\s*()" + num + R"()\s*,\s*()" + num + R"()\s*,\s*()" + num +
        R"()\s*\)|()" + num + R"())(?:\s+range\s+()" + num + R"()\s+()" + num + R"())?)");
    std::vector<ParameterDecl> out;
    for (const auto& [path, content] : source.files) {
        for (std::sregex_iterator it(content.begin(), content.end(), annotation), end; it != end; ++it) {
            const auto& m = *it;
            ParameterDecl d;
            d.name = m[1].str();
            if (m[5].matched) {
                d.type = ParamType::Float;
                d.defaultValue = std::stod(m[5].str());
                if (m[6].matched) d.range = std::pair{std::stod(m[6].str()), std::stod(m[7].str())};
            } else {
                d.type = ParamType::Vec3;
                d.defaultValue = Vec3{std::stod(m[2].str()), std::stod(m[3].str()), std::stod(m[4].str())};
            }
            out.push_back(std::move(d));
        }
    }
    return out;
}

}  // namespace evolvis
