#include "evolvis/parameters.hpp"

namespace evolvis {

nlohmann::json toJson(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    const auto& p = std::get<Vec3>(v);
    return nlohmann::json::array({p.x, p.y, p.z});
}

ParamValue paramValueFromJson(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number()) {
        return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    }
    throw ParamError(ParamError::Code::InvalidValue, "parameter value must be a number or [x,y,z]");
}

nlohmann::json toJson(const std::map<std::string, ParamValue>& values) {
    auto out = nlohmann::json::object();
    for (const auto& [name, v] : values) out[name] = toJson(v);
    return out;
}

std::map<std::string, ParamValue> paramValuesFromJson(const nlohmann::json& j) {
    if (!j.is_object()) throw ParamError(ParamError::Code::InvalidValue, "parameter values must be an object");
    std::map<std::string, ParamValue> out;
    for (const auto& [name, v] : j.items()) out.emplace(name, paramValueFromJson(v));
    return out;
}

nlohmann::json toJson(const ParameterDecl& decl) {
    nlohmann::json out = {
        {"name", decl.name},
        {"type", decl.type == ParamType::Float ? "float" : "vec3"},
        {"default", toJson(decl.defaultValue)},
    };
    if (decl.range) out["range"] = {decl.range->first, decl.range->second};
    return out;
}

}  // namespace evolvis
