#pragma once

#include "evolvis/parameters.hpp"
#include "evolvis/toolchain.hpp"

#include <vector>

namespace evolvis {

/// Reserved parameter names coupled to the live-view camera.
inline constexpr const char* kCameraEye = "cam_eye";
inline constexpr const char* kCameraAt = "cam_at";
inline constexpr const char* kCameraUp = "cam_up";

/// Declared parameters of a successfully compiled source, in declaration
/// order. Throws ParamError(DuplicateParameter) on a repeated name.
std::vector<ParameterDecl> extractParams(const SourceState& source, const ToolchainAdapter& adapter);

/// Active values restricted to the declared names, with defaults filled in.
/// Undeclared names are dropped; a value of the wrong type throws TypeMismatch.
ParameterSet effectiveParams(const std::vector<ParameterDecl>& decls, const ParameterSet& active);

/// Orbit camera. `up` is kept unit length and orthogonal to the view direction.
class Camera {
public:
    /// Throws ParamError(InvalidCamera) if eye == at or up is parallel to the view direction.
    Camera(Vec3 eye, Vec3 at, Vec3 up);

    const Vec3& eye() const { return eye_; }
    const Vec3& at() const { return at_; }
    const Vec3& up() const { return up_; }

    double distance() const { return (eye_ - at_).norm(); }
    /// Unit vector pointing from `at` towards the eye.
    Vec3 back() const { return (eye_ - at_).normalized(); }
    Vec3 right() const { return up_.cross(back()); }

    static Camera defaultCamera() { return Camera({0, 0, 5}, {0, 0, 0}, {0, 1, 0}); }

private:
    Vec3 eye_;
    Vec3 at_;
    Vec3 up_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Maps a point in [-1,1]² onto the unit arcball; points off the sphere are
/// projected onto its silhouette.
Vec3 arcballPoint(Point2 p);

/// Rotates the eye and up about `at` by the inverse of the arcball rotation
/// taking p0 to p1, so dragging right orbits the camera to the left.
Camera arcball(const Camera& cam, Point2 p0, Point2 p1);

/// Translates eye and at by (dx·right + dy·up)·|eye − at|.
Camera pan(const Camera& cam, double dx, double dy);

/// eye' = at + (eye − at) / factor. Throws ParamError(NonPositiveFactor).
Camera zoom(const Camera& cam, double factor);

/// {cam_eye, cam_at, cam_up}.
std::map<std::string, ParamValue> cameraToParams(const Camera& cam);

/// Rotates `v` about unit `axis` by `angle` radians (Rodrigues).
Vec3 rotate(const Vec3& v, const Vec3& axis, double angle);

}  // namespace evolvis
