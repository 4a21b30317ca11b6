#include "evolvis/toolchain.hpp"

#include "evolvis/minivis.hpp"

#include <spdlog/spdlog.h>

namespace evolvis {

nlohmann::json toJson(const Diagnostic& d) {
    nlohmann::json out = {{"file", d.file}, {"line", d.line}, {"col", d.col}, {"message", d.message}};
    if (!d.code.empty()) out["code"] = d.code;
    return out;
}

CompileResult CompileResult::success(ArtifactHandle artifact, std::vector<Diagnostic> warnings) {
    return {true, std::move(warnings), std::move(artifact)};
}

CompileResult CompileResult::failure(std::vector<Diagnostic> diagnostics) {
    if (diagnostics.empty()) diagnostics.push_back({"", 0, 0, "compilation failed", ""});
    return {false, std::move(diagnostics), nullptr};
}

ToolchainRegistry ToolchainRegistry::withBuiltins() {
    ToolchainRegistry r;
    r.add(std::make_shared<MinivisToolchain>());
    return r;
}

void ToolchainRegistry::add(std::shared_ptr<const ToolchainAdapter> adapter) {
    auto id = adapter->id();
    adapters_[id] = std::move(adapter);
}

void ToolchainRegistry::loadDirectory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ToolchainError(ToolchainError::Code::InvalidManifest, "toolchain directory " + dir.string() + " not found");
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        auto manifest = ExternalManifest::load(entry.path());
        spdlog::info("registered toolchain '{}' from {}", manifest.id, entry.path().string());
        add(std::make_shared<ExternalToolchain>(std::move(manifest)));
    }
}

std::shared_ptr<const ToolchainAdapter> ToolchainRegistry::find(const std::string& id) const {
    auto it = adapters_.find(id);
    return it == adapters_.end() ? nullptr : it->second;
}

std::vector<std::string> ToolchainRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : adapters_) out.push_back(id);
    return out;
}

}  // namespace evolvis
