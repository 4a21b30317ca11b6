#include "evolvis/minivis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>

namespace evolvis {

namespace {

using minivis::Code;
using minivis::Instr;
using minivis::OpCode;

// ---------------------------------------------------------------------------
// Lexing

enum class Tok { Ident, Number, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int col = 1;
};

struct SyntaxFailure {
    Diagnostic diagnostic;
};

Diagnostic makeDiag(const std::string& file, int line, int col, std::string code, std::string message) {
    return {file, line, col, std::move(message), std::move(code)};
}

class Lexer {
public:
    Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

    Token next() {
        skipTrivia();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= text_.size()) return t;

        char c = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) bump();
            t.kind = Tok::Ident;
            t.text = std::string(text_.substr(start, pos_ - start));
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) bump();
            if (pos_ < text_.size() && text_[pos_] == '.') {
                bump();
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) bump();
            }
            if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
                std::size_t save = pos_;
                int saveCol = col_;
                bump();
                if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) bump();
                if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) bump();
                } else {
                    pos_ = save;
                    col_ = saveCol;
                }
            }
            t.kind = Tok::Number;
            t.text = std::string(text_.substr(start, pos_ - start));
            auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
            if (res.ec != std::errc()) fail(t.line, t.col, "malformed number '" + t.text + "'");
            return t;
        }
        static constexpr std::string_view kPunct = "(){},;=+-*/";
        if (kPunct.find(c) != std::string_view::npos) {
            bump();
            t.kind = Tok::Punct;
            t.text = std::string(1, c);
            return t;
        }
        fail(line_, col_, fmt::format("unexpected character '{}'", c));
    }

private:
    [[noreturn]] void fail(int line, int col, std::string message) {
        throw SyntaxFailure{makeDiag(file_, line, col, "SyntaxError", std::move(message))};
    }

    void bump() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
            ++col_;
        }
    }

    void skipTrivia() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else if (text_.substr(pos_).starts_with("//")) {
                while (pos_ < text_.size() && text_[pos_] != '\n') bump();
            } else if (text_.substr(pos_).starts_with("/*")) {
                int line = line_;
                int col = col_;
                bump();
                bump();
                while (pos_ < text_.size() && !text_.substr(pos_).starts_with("*/")) bump();
                if (pos_ >= text_.size()) fail(line, col, "unterminated block comment");
                bump();
                bump();
            } else {
                break;
            }
        }
    }

    std::string_view text_;
    std::string file_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Syntax tree

struct Expr {
    enum class Kind { Number, Ident, Neg, Binary, Call };

    Kind kind = Kind::Number;
    double number = 0.0;
    std::string name;
    char op = 0;
    std::vector<Expr> args;
    int line = 0;
    int col = 0;
};

struct Located {
    std::string name;
    int line = 0;
    int col = 0;
};

struct ParamItem {
    ParameterDecl decl;
    Located where;
};

struct FnItem {
    Located where;
    std::vector<Located> params;
    Expr body;
};

struct PixelItem {
    Located where;
    Expr body;
};

struct FileAst {
    std::string path;
    std::vector<ParamItem> params;
    std::vector<FnItem> functions;
    std::vector<PixelItem> pixels;
    std::optional<Diagnostic> syntaxError;
};

const std::set<std::string, std::less<>> kKeywords = {"param", "fn", "pixel", "range"};

struct Builtin {
    OpCode op;
    int arity;
};

const std::map<std::string, Builtin, std::less<>> kBuiltins = {
    {"sin", {OpCode::Sin, 1}},     {"cos", {OpCode::Cos, 1}},     {"sqrt", {OpCode::Sqrt, 1}},
    {"abs", {OpCode::Abs, 1}},     {"floor", {OpCode::Floor, 1}}, {"min", {OpCode::Min, 2}},
    {"max", {OpCode::Max, 2}},     {"clamp", {OpCode::Clamp, 3}}, {"step", {OpCode::Step, 2}},
    {"mix", {OpCode::Mix, 3}},     {"rgb", {OpCode::Rgb, 3}},
};

class Parser {
public:
    Parser(std::string_view text, std::string path) : lexer_(text, path), path_(std::move(path)) { advance(); }

    /// Parses items until the end; on a syntax error the items before it are kept.
    FileAst parseFile() {
        FileAst ast;
        ast.path = path_;
        try {
            while (tok_.kind != Tok::End) parseItem(ast);
        } catch (const SyntaxFailure& f) {
            ast.syntaxError = f.diagnostic;
        }
        return ast;
    }

private:
    void advance() { tok_ = lexer_.next(); }

    [[noreturn]] void fail(const Token& at, std::string message) {
        throw SyntaxFailure{makeDiag(path_, at.line, at.col, "SyntaxError", std::move(message))};
    }

    std::string describe(const Token& t) const {
        switch (t.kind) {
            case Tok::End: return "end of file";
            case Tok::Number: return "number '" + t.text + "'";
            default: return "'" + t.text + "'";
        }
    }

    bool isPunct(char c) const { return tok_.kind == Tok::Punct && tok_.text[0] == c; }
    bool isKeyword(std::string_view kw) const { return tok_.kind == Tok::Ident && tok_.text == kw; }

    void expect(char c) {
        if (!isPunct(c)) fail(tok_, fmt::format("expected '{}' but found {}", c, describe(tok_)));
        advance();
    }

    Located expectIdent(const char* what) {
        if (tok_.kind != Tok::Ident || kKeywords.contains(tok_.text)) {
            fail(tok_, fmt::format("expected {} but found {}", what, describe(tok_)));
        }
        Located l{tok_.text, tok_.line, tok_.col};
        advance();
        return l;
    }

    double signedNumber() {
        bool negative = false;
        if (isPunct('-')) {
            negative = true;
            advance();
        }
        if (tok_.kind != Tok::Number) fail(tok_, "expected number but found " + describe(tok_));
        double v = tok_.number;
        advance();
        return negative ? -v : v;
    }

    void parseItem(FileAst& ast) {
        Token start = tok_;
        if (isKeyword("param")) {
            advance();
            ParamItem item;
            item.where = expectIdent("parameter name");
            item.decl.name = item.where.name;
            expect('=');
            if (isPunct('(')) {
                advance();
                Vec3 v;
                v.x = signedNumber();
                expect(',');
                v.y = signedNumber();
                expect(',');
                v.z = signedNumber();
                expect(')');
                item.decl.type = ParamType::Vec3;
                item.decl.defaultValue = v;
            } else {
                item.decl.type = ParamType::Float;
                item.decl.defaultValue = signedNumber();
            }
            if (isKeyword("range")) {
                Token rangeTok = tok_;
                advance();
                double lo = signedNumber();
                double hi = signedNumber();
                if (item.decl.type != ParamType::Float) fail(rangeTok, "range is only allowed on float parameters");
                item.decl.range = std::pair{lo, hi};
            }
            expect(';');
            ast.params.push_back(std::move(item));
        } else if (isKeyword("fn")) {
            advance();
            FnItem item;
            item.where = expectIdent("function name");
            expect('(');
            if (!isPunct(')')) {
                item.params.push_back(expectIdent("parameter name"));
                while (isPunct(',')) {
                    advance();
                    item.params.push_back(expectIdent("parameter name"));
                }
            }
            expect(')');
            expect('{');
            item.body = parseExpr();
            expect('}');
            ast.functions.push_back(std::move(item));
        } else if (isKeyword("pixel")) {
            advance();
            PixelItem item;
            item.where = {"pixel", start.line, start.col};
            expect('{');
            item.body = parseExpr();
            expect('}');
            ast.pixels.push_back(std::move(item));
        } else {
            fail(tok_, "expected 'param', 'fn' or 'pixel' but found " + describe(tok_));
        }
    }

    Expr parseExpr() {
        Expr lhs = parseTerm();
        while (isPunct('+') || isPunct('-')) {
            Expr bin;
            bin.kind = Expr::Kind::Binary;
            bin.op = tok_.text[0];
            bin.line = tok_.line;
            bin.col = tok_.col;
            advance();
            bin.args.push_back(std::move(lhs));
            bin.args.push_back(parseTerm());
            lhs = std::move(bin);
        }
        return lhs;
    }

    Expr parseTerm() {
        Expr lhs = parseUnary();
        while (isPunct('*') || isPunct('/')) {
            Expr bin;
            bin.kind = Expr::Kind::Binary;
            bin.op = tok_.text[0];
            bin.line = tok_.line;
            bin.col = tok_.col;
            advance();
            bin.args.push_back(std::move(lhs));
            bin.args.push_back(parseUnary());
            lhs = std::move(bin);
        }
        return lhs;
    }

    Expr parseUnary() {
        if (isPunct('-')) {
            Expr neg;
            neg.kind = Expr::Kind::Neg;
            neg.line = tok_.line;
            neg.col = tok_.col;
            advance();
            neg.args.push_back(parseUnary());
            return neg;
        }
        return parsePrimary();
    }

    Expr parsePrimary() {
        Expr e;
        e.line = tok_.line;
        e.col = tok_.col;
        if (tok_.kind == Tok::Number) {
            e.kind = Expr::Kind::Number;
            e.number = tok_.number;
            advance();
            return e;
        }
        if (isPunct('(')) {
            advance();
            Expr inner = parseExpr();
            expect(')');
            return inner;
        }
        if (tok_.kind == Tok::Ident && !kKeywords.contains(tok_.text)) {
            e.name = tok_.text;
            advance();
            if (isPunct('(')) {
                e.kind = Expr::Kind::Call;
                advance();
                if (!isPunct(')')) {
                    e.args.push_back(parseExpr());
                    while (isPunct(',')) {
                        advance();
                        e.args.push_back(parseExpr());
                    }
                }
                expect(')');
            } else {
                e.kind = Expr::Kind::Ident;
            }
            return e;
        }
        fail(tok_, "expected expression but found " + describe(tok_));
    }

    Lexer lexer_;
    std::string path_;
    Token tok_;
};

std::vector<FileAst> parseAll(const SourceState& source) {
    std::vector<FileAst> files;
    for (const auto& [path, text] : source.files) files.push_back(Parser(text, path).parseFile());
    return files;
}

// ---------------------------------------------------------------------------
// Resolution and code generation

struct CallSite {
    int callee;
    Located where;
    std::string file;
};

class Compiler {
public:
    explicit Compiler(std::vector<FileAst> files) : files_(std::move(files)) {}

    CompileResult run() {
        for (const auto& f : files_) {
            if (f.syntaxError) diags_.push_back(*f.syntaxError);
        }
        if (!diags_.empty()) return CompileResult::failure(std::move(diags_));

        auto program = std::make_shared<minivis::Program>();
        declareParams(*program);
        declareFunctions(*program);

        const PixelItem* pixel = nullptr;
        std::string pixelFile;
        for (const auto& f : files_) {
            for (const auto& p : f.pixels) {
                if (pixel == nullptr) {
                    pixel = &p;
                    pixelFile = f.path;
                } else {
                    diags_.push_back(makeDiag(f.path, p.where.line, p.where.col, "MultiplePixelBlocks",
                                              "more than one pixel block in the program"));
                }
            }
        }
        if (pixel == nullptr) {
            diags_.push_back(makeDiag("", 0, 0, "MissingPixelBlock", "program has no pixel block"));
        }

        callSites_.assign(program->functions.size(), {});
        int fnIndex = 0;
        for (const auto& f : files_) {
            for (const auto& fn : f.functions) {
                auto& target = program->functions[static_cast<std::size_t>(fnIndex)];
                std::map<std::string, int, std::less<>> locals;
                for (std::size_t i = 0; i < fn.params.size(); ++i) {
                    if (!locals.emplace(fn.params[i].name, static_cast<int>(i)).second) {
                        diags_.push_back(makeDiag(f.path, fn.params[i].line, fn.params[i].col, "DuplicateDefinition",
                                                  fmt::format("duplicate parameter '{}'", fn.params[i].name)));
                    }
                }
                Scope scope{f.path, &locals, false, fnIndex};
                emit(fn.body, scope, target.code);
                ++fnIndex;
            }
        }
        if (pixel != nullptr) {
            Scope scope{pixelFile, nullptr, true, -1};
            emit(pixel->body, scope, program->pixel);
        }
        checkRecursion();

        if (!diags_.empty()) return CompileResult::failure(std::move(diags_));
        return CompileResult::success(std::move(program));
    }

private:
    struct Scope {
        std::string file;
        const std::map<std::string, int, std::less<>>* locals;
        bool pixel;
        int function;  // -1 for the pixel block
    };

    void error(const std::string& file, int line, int col, std::string code, std::string message) {
        diags_.push_back(makeDiag(file, line, col, std::move(code), std::move(message)));
    }

    bool reserved(const std::string& name) const { return name == "x" || name == "y" || kBuiltins.contains(name); }

    void claimName(const std::string& name, const std::string& file, const Located& where) {
        if (!globals_.insert(name).second) {
            error(file, where.line, where.col, "DuplicateDefinition", fmt::format("'{}' is already defined", name));
        }
    }

    void declareParams(minivis::Program& program) {
        for (const auto& f : files_) {
            for (const auto& p : f.params) {
                const auto& d = p.decl;
                if (reserved(d.name)) {
                    error(f.path, p.where.line, p.where.col, "ReservedIdentifier", fmt::format("'{}' is reserved", d.name));
                    continue;
                }
                if (d.range) {
                    auto [lo, hi] = *d.range;
                    double def = std::get<double>(d.defaultValue);
                    if (!(lo < hi) || def < lo || def > hi) {
                        error(f.path, p.where.line, p.where.col, "InvalidRange",
                              fmt::format("range {} {} of '{}' is empty or excludes the default", lo, hi, d.name));
                    }
                }
                int index = static_cast<int>(program.params.size());
                program.params.push_back(d);
                if (d.type == ParamType::Float) {
                    claimName(d.name, f.path, p.where);
                    scalars_[d.name] = static_cast<int>(program.slots.size());
                    program.slots.push_back({index, -1});
                } else {
                    claimName(d.name, f.path, p.where);
                    static constexpr const char* kSuffix[] = {"_x", "_y", "_z"};
                    for (int c = 0; c < 3; ++c) {
                        auto name = d.name + kSuffix[c];
                        claimName(name, f.path, p.where);
                        scalars_[name] = static_cast<int>(program.slots.size());
                        program.slots.push_back({index, c});
                    }
                }
            }
        }
    }

    void declareFunctions(minivis::Program& program) {
        for (const auto& f : files_) {
            for (const auto& fn : f.functions) {
                if (reserved(fn.where.name)) {
                    error(f.path, fn.where.line, fn.where.col, "ReservedIdentifier",
                          fmt::format("'{}' is reserved", fn.where.name));
                } else {
                    claimName(fn.where.name, f.path, fn.where);
                }
                functions_.emplace(fn.where.name, static_cast<int>(program.functions.size()));
                program.functions.push_back({fn.where.name, static_cast<int>(fn.params.size()), {}});
                arities_.push_back(static_cast<int>(fn.params.size()));
            }
        }
    }

    void emit(const Expr& e, const Scope& scope, Code& code) {
        switch (e.kind) {
            case Expr::Kind::Number: code.push_back({OpCode::Const, 0, e.number}); return;
            case Expr::Kind::Ident: {
                if (scope.locals != nullptr) {
                    if (auto it = scope.locals->find(e.name); it != scope.locals->end()) {
                        code.push_back({OpCode::Arg, it->second, 0.0});
                        return;
                    }
                }
                if (scope.pixel && e.name == "x") {
                    code.push_back({OpCode::PixelX});
                    return;
                }
                if (scope.pixel && e.name == "y") {
                    code.push_back({OpCode::PixelY});
                    return;
                }
                if (auto it = scalars_.find(e.name); it != scalars_.end()) {
                    code.push_back({OpCode::Slot, it->second, 0.0});
                    return;
                }
                error(scope.file, e.line, e.col, "UnknownIdentifier", fmt::format("unknown identifier '{}'", e.name));
                code.push_back({OpCode::Const, 0, 0.0});
                return;
            }
            case Expr::Kind::Neg:
                emit(e.args[0], scope, code);
                code.push_back({OpCode::Neg});
                return;
            case Expr::Kind::Binary: {
                emit(e.args[0], scope, code);
                emit(e.args[1], scope, code);
                OpCode op = e.op == '+' ? OpCode::Add : e.op == '-' ? OpCode::Sub : e.op == '*' ? OpCode::Mul : OpCode::Div;
                code.push_back({op});
                return;
            }
            case Expr::Kind::Call: {
                for (const auto& a : e.args) emit(a, scope, code);
                const int argc = static_cast<int>(e.args.size());
                if (auto b = kBuiltins.find(e.name); b != kBuiltins.end()) {
                    if (argc != b->second.arity) {
                        error(scope.file, e.line, e.col, "ArityMismatch",
                              fmt::format("'{}' expects {} argument(s), got {}", e.name, b->second.arity, argc));
                    }
                    code.push_back({b->second.op});
                    return;
                }
                if (auto f = functions_.find(e.name); f != functions_.end()) {
                    int arity = arities_[static_cast<std::size_t>(f->second)];
                    if (argc != arity) {
                        error(scope.file, e.line, e.col, "ArityMismatch",
                              fmt::format("'{}' expects {} argument(s), got {}", e.name, arity, argc));
                    }
                    if (scope.function >= 0) {
                        callSites_[static_cast<std::size_t>(scope.function)].push_back({f->second, {e.name, e.line, e.col}, scope.file});
                    }
                    code.push_back({OpCode::Call, f->second, 0.0});
                    return;
                }
                error(scope.file, e.line, e.col, "UnknownIdentifier", fmt::format("unknown function '{}'", e.name));
                code.push_back({OpCode::Const, 0, 0.0});
                return;
            }
        }
    }

    void checkRecursion() {
        enum class Mark { White, Grey, Black };
        std::vector<Mark> marks(callSites_.size(), Mark::White);
        auto visit = [&](auto&& self, int fn) -> void {
            marks[static_cast<std::size_t>(fn)] = Mark::Grey;
            for (const auto& site : callSites_[static_cast<std::size_t>(fn)]) {
                auto& m = marks[static_cast<std::size_t>(site.callee)];
                if (m == Mark::Grey) {
                    error(site.file, site.where.line, site.where.col, "RecursionNotSupported",
                          fmt::format("recursive call to '{}'", site.where.name));
                } else if (m == Mark::White) {
                    self(self, site.callee);
                }
            }
            marks[static_cast<std::size_t>(fn)] = Mark::Black;
        };
        for (std::size_t i = 0; i < callSites_.size(); ++i) {
            if (marks[i] == Mark::White) visit(visit, static_cast<int>(i));
        }
    }

    std::vector<FileAst> files_;
    std::vector<Diagnostic> diags_;
    std::set<std::string> globals_;
    std::map<std::string, int, std::less<>> scalars_;
    std::map<std::string, int, std::less<>> functions_;
    std::vector<int> arities_;
    std::vector<std::vector<CallSite>> callSites_;
};

// ---------------------------------------------------------------------------
// Evaluation

using minivis::Lanes;

struct Machine {
    const minivis::Program& program;
    std::span<const double> slots;
    double x;
    double y;
    std::vector<Lanes> stack;

    Lanes pop() {
        Lanes v = stack.back();
        stack.pop_back();
        return v;
    }

    template <typename F>
    void unary(F f) {
        auto& a = stack.back();
        for (auto& v : a) v = f(v);
    }

    template <typename F>
    void binary(F f) {
        Lanes b = pop();
        auto& a = stack.back();
        for (std::size_t i = 0; i < 3; ++i) a[i] = f(a[i], b[i]);
    }

    template <typename F>
    void ternary(F f) {
        Lanes c = pop();
        Lanes b = pop();
        auto& a = stack.back();
        for (std::size_t i = 0; i < 3; ++i) a[i] = f(a[i], b[i], c[i]);
    }

    Lanes exec(const Code& code, std::size_t argBase) {
        const std::size_t base = stack.size();
        for (const auto& in : code) {
            switch (in.op) {
                case OpCode::Const: stack.push_back({in.value, in.value, in.value}); break;
                case OpCode::Slot: {
                    double v = slots[static_cast<std::size_t>(in.index)];
                    stack.push_back({v, v, v});
                    break;
                }
                case OpCode::PixelX: stack.push_back({x, x, x}); break;
                case OpCode::PixelY: stack.push_back({y, y, y}); break;
                case OpCode::Arg: stack.push_back(stack[argBase + static_cast<std::size_t>(in.index)]); break;
                case OpCode::Neg: unary([](double a) { return -a; }); break;
                case OpCode::Add: binary([](double a, double b) { return a + b; }); break;
                case OpCode::Sub: binary([](double a, double b) { return a - b; }); break;
                case OpCode::Mul: binary([](double a, double b) { return a * b; }); break;
                case OpCode::Div: binary([](double a, double b) { return a / b; }); break;
                case OpCode::Sin: unary([](double a) { return std::sin(a); }); break;
                case OpCode::Cos: unary([](double a) { return std::cos(a); }); break;
                case OpCode::Sqrt: unary([](double a) { return std::sqrt(a); }); break;
                case OpCode::Abs: unary([](double a) { return std::abs(a); }); break;
                case OpCode::Floor: unary([](double a) { return std::floor(a); }); break;
                case OpCode::Min: binary([](double a, double b) { return std::min(a, b); }); break;
                case OpCode::Max: binary([](double a, double b) { return std::max(a, b); }); break;
                case OpCode::Clamp: ternary([](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }); break;
                case OpCode::Step: binary([](double edge, double v) { return v < edge ? 0.0 : 1.0; }); break;
                case OpCode::Mix: ternary([](double a, double b, double t) { return a * (1.0 - t) + b * t; }); break;
                case OpCode::Rgb: {
                    Lanes b = pop();
                    Lanes g = pop();
                    auto& r = stack.back();
                    r = {r[0], g[1], b[2]};
                    break;
                }
                case OpCode::Call: {
                    const auto& fn = program.functions[static_cast<std::size_t>(in.index)];
                    std::size_t frame = stack.size() - static_cast<std::size_t>(fn.arity);
                    Lanes result = exec(fn.code, frame);
                    stack.resize(frame);
                    stack.push_back(result);
                    break;
                }
            }
        }
        Lanes result = stack.back();
        stack.resize(base);
        return result;
    }
};

std::uint8_t quantize(double c) {
    if (!std::isfinite(c)) return 0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

std::vector<double> bindSlots(const minivis::Program& program, const ParameterSet& params) {
    std::vector<double> values;
    values.reserve(program.slots.size());
    for (const auto& slot : program.slots) {
        const auto& decl = program.params[static_cast<std::size_t>(slot.param)];
        ParamValue v = decl.defaultValue;
        if (auto it = params.values.find(decl.name); it != params.values.end() && typeOf(it->second) == decl.type) {
            v = it->second;
        }
        if (slot.component < 0) {
            values.push_back(std::get<double>(v));
        } else {
            const auto& p = std::get<Vec3>(v);
            values.push_back(slot.component == 0 ? p.x : slot.component == 1 ? p.y : p.z);
        }
    }
    return values;
}

}  // namespace

namespace minivis {

Lanes evaluate(const Program& program, std::span<const double> slotValues, double x, double y) {
    Machine m{program, slotValues, x, y, {}};
    m.stack.reserve(64);
    return m.exec(program.pixel, 0);
}

}  // namespace minivis

CompileResult minivisCompile(const SourceState& source) {
    return Compiler(parseAll(source)).run();
}

Image minivisRun(const Artifact& artifact, const ParameterSet& params, int width, int height) {
    const auto* program = dynamic_cast<const minivis::Program*>(&artifact);
    if (program == nullptr) throw ToolchainError(ToolchainError::Code::InvalidArtifact, "artifact is not a MiniVis program");

    auto slots = bindSlots(*program, params);
    Image img(width, height);
    Machine m{*program, slots, 0.0, 0.0, {}};
    m.stack.reserve(64);
    auto px = img.bytes();
    std::size_t o = 0;
    for (int row = 0; row < height; ++row) {
        m.y = (row + 0.5) / height;
        for (int col = 0; col < width; ++col) {
            m.x = (col + 0.5) / width;
            auto c = m.exec(program->pixel, 0);
            px[o++] = quantize(c[0]);
            px[o++] = quantize(c[1]);
            px[o++] = quantize(c[2]);
        }
    }
    return img;
}

std::vector<ParameterDecl> minivisDeclaredParams(const SourceState& source) {
    std::vector<ParameterDecl> out;
    for (const auto& f : parseAll(source)) {
        for (const auto& p : f.params) out.push_back(p.decl);
    }
    return out;
}

const std::string& MinivisToolchain::id() const {
    static const std::string kId = "minivis";
    return kId;
}

}  // namespace evolvis
