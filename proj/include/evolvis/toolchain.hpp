#pragma once

#include "evolvis/image_lab.hpp"
#include "evolvis/parameters.hpp"
#include "evolvis/revision_store.hpp"
#include "evolvis/scope_parser.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace evolvis {

struct Diagnostic {
    std::string file;  // empty when the toolchain gave no location
    int line = 0;
    int col = 0;
    std::string message;
    std::string code;  // e.g. "UnknownIdentifier"; empty for external toolchains

    bool operator==(const Diagnostic&) const = default;
};

nlohmann::json toJson(const Diagnostic& d);

/// Immutable output of a successful compile; shared between render threads.
class Artifact {
public:
    virtual ~Artifact() = default;
};

using ArtifactHandle = std::shared_ptr<const Artifact>;

struct CompileResult {
    bool ok = false;
    std::vector<Diagnostic> diagnostics;
    ArtifactHandle artifact;  // set iff ok

    static CompileResult success(ArtifactHandle artifact, std::vector<Diagnostic> warnings = {});
    static CompileResult failure(std::vector<Diagnostic> diagnostics);
};

class ToolchainError : public std::runtime_error {
public:
    enum class Code { Timeout, MissingOutputImage, NonZeroExit, InvalidArtifact, InvalidManifest };

    ToolchainError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Compile/run backend. `run` must be deterministic for equal inputs and
/// `compile` must not modify the source.
class ToolchainAdapter {
public:
    virtual ~ToolchainAdapter() = default;

    virtual const std::string& id() const = 0;
    virtual LanguageProfile scopeProfile() const = 0;
    virtual std::vector<ParameterDecl> declaredParams(const SourceState& source) const = 0;
    virtual CompileResult compile(const SourceState& source) const = 0;
    virtual Image run(const Artifact& artifact, const ParameterSet& params, int width, int height) const = 0;
};

/// `toolchains/<id>.json`. Command templates may use {srcDir}, {outDir},
/// {artifact}, {width}, {height}, {paramsFile} and {runDir}.
struct ExternalManifest {
    std::string id;
    std::string buildCmd;
    std::string runCmd;
    std::string imagePath;
    double timeoutSeconds = 60.0;
    std::string artifactName = "app";
    std::string language = "c-like";

    static ExternalManifest fromJson(const nlohmann::json& j, const std::string& id);
    static ExternalManifest load(const std::filesystem::path& file);
};

/// Runs shell commands from a manifest in scratch directories. Parameters are
/// declared in the sources with `@param name = value [range lo hi]`, usually
/// inside a comment.
class ExternalToolchain final : public ToolchainAdapter {
public:
    explicit ExternalToolchain(ExternalManifest manifest);

    const std::string& id() const override { return manifest_.id; }
    LanguageProfile scopeProfile() const override;
    std::vector<ParameterDecl> declaredParams(const SourceState& source) const override;
    CompileResult compile(const SourceState& source) const override;
    Image run(const Artifact& artifact, const ParameterSet& params, int width, int height) const override;

    const ExternalManifest& manifest() const { return manifest_; }

private:
    ExternalManifest manifest_;
};

/// Parses `file:line:col: message` lines; anything else becomes a file-less diagnostic.
std::vector<Diagnostic> parseCompilerOutput(std::string_view text);

/// `@param` annotations across all files, in path then line order.
std::vector<ParameterDecl> parseParamAnnotations(const SourceState& source);

class ToolchainRegistry {
public:
    /// Registry holding the built-in MiniVis toolchain.
    static ToolchainRegistry withBuiltins();

    void add(std::shared_ptr<const ToolchainAdapter> adapter);
    /// Registers every `<id>.json` manifest in `dir`.
    void loadDirectory(const std::filesystem::path& dir);

    std::shared_ptr<const ToolchainAdapter> find(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::shared_ptr<const ToolchainAdapter>> adapters_;
};

}  // namespace evolvis
