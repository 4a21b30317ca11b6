#pragma once

#include "evolvis/toolchain.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace evolvis {

/// Compiled MiniVis program. Every value is evaluated as three lanes
/// (r, g, b); scalars occupy all lanes equally and `rgb(r, g, b)` picks
/// lane i of argument i.
namespace minivis {

enum class OpCode : std::uint8_t {
    Const,
    Slot,    // parameter slot
    PixelX,
    PixelY,
    Arg,     // argument of the enclosing function
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Floor,
    Min,
    Max,
    Clamp,
    Step,
    Mix,
    Rgb,
    Call,
};

struct Instr {
    OpCode op;
    int index = 0;  // slot, argument or function index
    double value = 0.0;
};

using Code = std::vector<Instr>;

struct Function {
    std::string name;
    int arity = 0;
    Code code;
};

/// One scalar input: either a float parameter or a component of a vec3.
struct Slot {
    int param = 0;
    int component = -1;  // -1 for floats, 0..2 for vec3 components
};

struct Program final : Artifact {
    std::vector<ParameterDecl> params;
    std::vector<Slot> slots;
    std::vector<Function> functions;
    Code pixel;
};

using Lanes = std::array<double, 3>;

/// Evaluates the pixel expression at normalised coordinates.
Lanes evaluate(const Program& program, std::span<const double> slotValues, double x, double y);

}  // namespace minivis

CompileResult minivisCompile(const SourceState& source);
Image minivisRun(const Artifact& artifact, const ParameterSet& params, int width, int height);

/// Parameter declarations in path then source order; tolerant of errors
/// elsewhere in the program.
std::vector<ParameterDecl> minivisDeclaredParams(const SourceState& source);

class MinivisToolchain final : public ToolchainAdapter {
public:
    const std::string& id() const override;
    LanguageProfile scopeProfile() const override { return LanguageProfile::minivis(); }
    std::vector<ParameterDecl> declaredParams(const SourceState& source) const override {
        return minivisDeclaredParams(source);
    }
    CompileResult compile(const SourceState& source) const override { return minivisCompile(source); }
    Image run(const Artifact& artifact, const ParameterSet& params, int width, int height) const override {
        return minivisRun(artifact, params, width, height);
    }
};

}  // namespace evolvis
