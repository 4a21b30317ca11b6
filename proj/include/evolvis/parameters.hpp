#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace evolvis {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Vec3&) const = default;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const { return *this / norm(); }
};

enum class ParamType { Float, Vec3 };

using ParamValue = std::variant<double, Vec3>;

inline ParamType typeOf(const ParamValue& v) { return std::holds_alternative<double>(v) ? ParamType::Float : ParamType::Vec3; }

struct ParameterDecl {
    std::string name;
    ParamType type = ParamType::Float;
    ParamValue defaultValue = 0.0;
    std::optional<std::pair<double, double>> range;

    bool operator==(const ParameterDecl&) const = default;
};

/// The session's active parameter values; `generation` identifies the version.
struct ParameterSet {
    std::map<std::string, ParamValue> values;
    std::uint64_t generation = 0;

    bool operator==(const ParameterSet&) const = default;
};

class ParamError : public std::runtime_error {
public:
    enum class Code { DuplicateParameter, TypeMismatch, NonPositiveFactor, InvalidCamera, InvalidValue };

    ParamError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Wire form: number for float, [x,y,z] for vec3.
nlohmann::json toJson(const ParamValue& v);
ParamValue paramValueFromJson(const nlohmann::json& j);

/// `{"name": value, ...}`
nlohmann::json toJson(const std::map<std::string, ParamValue>& values);
std::map<std::string, ParamValue> paramValuesFromJson(const nlohmann::json& j);

nlohmann::json toJson(const ParameterDecl& decl);

}  // namespace evolvis
