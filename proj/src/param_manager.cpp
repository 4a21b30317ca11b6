#include "evolvis/param_manager.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace evolvis {

std::vector<ParameterDecl> extractParams(const SourceState& source, const ToolchainAdapter& adapter) {
    auto decls = adapter.declaredParams(source);
    std::set<std::string> seen;
    for (const auto& d : decls) {
        if (!seen.insert(d.name).second) {
            throw ParamError(ParamError::Code::DuplicateParameter, "parameter '" + d.name + "' declared twice");
        }
    }
    return decls;
}

ParameterSet effectiveParams(const std::vector<ParameterDecl>& decls, const ParameterSet& active) {
    ParameterSet out;
    out.generation = active.generation;
    for (const auto& d : decls) {
        auto it = active.values.find(d.name);
        if (it == active.values.end()) {
            out.values[d.name] = d.defaultValue;
            continue;
        }
        if (typeOf(it->second) != d.type) {
            throw ParamError(ParamError::Code::TypeMismatch,
                             "parameter '" + d.name + "' expects " + (d.type == ParamType::Float ? "float" : "vec3"));
        }
        out.values[d.name] = it->second;
    }
    if (spdlog::should_log(spdlog::level::debug)) {
        for (const auto& [name, _] : active.values) {
            if (!out.values.contains(name)) spdlog::debug("ignoring undeclared parameter '{}'", name);
        }
    }
    return out;
}

Camera::Camera(Vec3 eye, Vec3 at, Vec3 up) : eye_(eye), at_(at) {
    Vec3 view = at - eye;
    if (view.norm() == 0.0) throw ParamError(ParamError::Code::InvalidCamera, "camera eye and look-at coincide");
    Vec3 d = view.normalized();
    Vec3 ortho = up - d * up.dot(d);
    if (ortho.norm() < 1e-12) throw ParamError(ParamError::Code::InvalidCamera, "camera up is parallel to the view");
    up_ = ortho.normalized();
}

Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
    double c = std::cos(angle);
    double s = std::sin(angle);
    return v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c));
}

Vec3 arcballPoint(Point2 p) {
    double r2 = p.x * p.x + p.y * p.y;
    if (r2 > 1.0) {
        double r = std::sqrt(r2);
        return {p.x / r, p.y / r, 0.0};
    }
    return Vec3{p.x, p.y, std::sqrt(std::max(0.0, 1.0 - r2))}.normalized();
}

Camera arcball(const Camera& cam, Point2 p0, Point2 p1) {
    Vec3 v0 = arcballPoint(p0);
    Vec3 v1 = arcballPoint(p1);
    Vec3 axisView = v0.cross(v1);
    double len = axisView.norm();
    if (len < 1e-15) return cam;
    double angle = std::acos(std::clamp(v0.dot(v1), -1.0, 1.0));

    // View-space basis: x = right, y = up, z = towards the viewer.
    Vec3 axis = (cam.right() * axisView.x + cam.up() * axisView.y + cam.back() * axisView.z) / len;
    axis = axis.normalized();
    Vec3 offset = rotate(cam.eye() - cam.at(), axis, -angle);
    Vec3 up = rotate(cam.up(), axis, -angle);
    return Camera(cam.at() + offset, cam.at(), up);
}

Camera pan(const Camera& cam, double dx, double dy) {
    Vec3 shift = (cam.right() * dx + cam.up() * dy) * cam.distance();
    return Camera(cam.eye() + shift, cam.at() + shift, cam.up());
}

Camera zoom(const Camera& cam, double factor) {
    if (!(factor > 0.0)) throw ParamError(ParamError::Code::NonPositiveFactor, "zoom factor must be positive");
    return Camera(cam.at() + (cam.eye() - cam.at()) / factor, cam.at(), cam.up());
}

std::map<std::string, ParamValue> cameraToParams(const Camera& cam) {
    return {{kCameraEye, cam.eye()}, {kCameraAt, cam.at()}, {kCameraUp, cam.up()}};
}

}  // namespace evolvis
