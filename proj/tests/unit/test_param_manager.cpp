#include "evolvis/minivis.hpp"
#include "evolvis/param_manager.hpp"

#include <doctest.h>

#include <random>

using namespace evolvis;

namespace {

SourceState src(std::string text) {
    SourceState s;
    s.files["main.mv"] = std::move(text);
    return s;
}

void checkVec(const Vec3& a, const Vec3& b, double tol = 1e-9) {
    CHECK(std::abs(a.x - b.x) <= tol);
    CHECK(std::abs(a.y - b.y) <= tol);
    CHECK(std::abs(a.z - b.z) <= tol);
}

}  // namespace

TEST_CASE("extract params") {
    MinivisToolchain mv;
    auto d = extractParams(src("param a=0.5 range 0 1; pixel{a}"), mv);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == ParameterDecl{"a", ParamType::Float, 0.5, std::pair{0.0, 1.0}});
    CHECK(extractParams(src("pixel { 0 }"), mv).empty());
    auto cam = extractParams(src("param cam_eye=(0,0,5); pixel { 0 }"), mv);
    CHECK(cam[0] == ParameterDecl{"cam_eye", ParamType::Vec3, Vec3{0, 0, 5}, std::nullopt});

    ExternalManifest m;
    m.id = "ext";
    ExternalToolchain ext(m);
    SourceState dup;
    dup.files["a.c"] = "// @param k = 1\n";
    dup.files["b.c"] = "// @param k = 2\n";
    try {
        extractParams(dup, ext);
        FAIL("expected DuplicateParameter");
    } catch (const ParamError& e) {
        CHECK(e.code() == ParamError::Code::DuplicateParameter);
    }
}

TEST_CASE("effective params") {
    std::vector<ParameterDecl> decls{{"a", ParamType::Float, 0.5, std::nullopt}};
    ParameterSet active;
    active.values = {{"a", 1.0}, {"b", 2.0}};
    active.generation = 4;
    auto e = effectiveParams(decls, active);
    CHECK(e.values == std::map<std::string, ParamValue>{{"a", 1.0}});
    CHECK(e.generation == 4);

    CHECK(effectiveParams(decls, {}).values == std::map<std::string, ParamValue>{{"a", 0.5}});

    ParameterSet wrong;
    wrong.values = {{"a", Vec3{1, 2, 3}}};
    try {
        effectiveParams(decls, wrong);
        FAIL("expected TypeMismatch");
    } catch (const ParamError& e) {
        CHECK(e.code() == ParamError::Code::TypeMismatch);
    }
}

TEST_CASE("parameter json") {
    CHECK(toJson(ParamValue{0.25}) == 0.25);
    CHECK(toJson(ParamValue{Vec3{1, 2, 3}}) == nlohmann::json::array({1.0, 2.0, 3.0}));
    CHECK(paramValueFromJson(nlohmann::json::array({1, 2, 3})) == ParamValue{Vec3{1, 2, 3}});
    CHECK(paramValueFromJson(2) == ParamValue{2.0});
    CHECK_THROWS_AS(paramValueFromJson("x"), ParamError);
    CHECK_THROWS_AS(paramValueFromJson(nlohmann::json::array({1, 2})), ParamError);
    auto values = paramValuesFromJson({{"a", 0.9}, {"cam_eye", {0, 0, 5}}});
    CHECK(values.size() == 2);
    CHECK(toJson(values) == nlohmann::json{{"a", 0.9}, {"cam_eye", {0.0, 0.0, 5.0}}});
    auto decl = toJson(ParameterDecl{"a", ParamType::Float, 0.5, std::pair{0.0, 1.0}});
    CHECK(decl["type"] == "float");
    CHECK(decl["range"] == nlohmann::json::array({0.0, 1.0}));
}

TEST_CASE("camera construction") {
    auto c = Camera::defaultCamera();
    CHECK(c.distance() == 5.0);
    checkVec(c.right(), {1, 0, 0});
    checkVec(c.back(), {0, 0, 1});
    // Up is re-orthogonalised against the view direction.
    Camera tilted({0, 0, 5}, {0, 0, 0}, {0, 2, 1});
    checkVec(tilted.up(), {0, 1, 0});
    CHECK_THROWS_AS(Camera({1, 1, 1}, {1, 1, 1}, {0, 1, 0}), ParamError);
    CHECK_THROWS_AS(Camera({0, 5, 0}, {0, 0, 0}, {0, 1, 0}), ParamError);
}

TEST_CASE("arcball") {
    auto cam = Camera::defaultCamera();

    SUBCASE("zero drag is identity") {
        auto same = arcball(cam, {0.3, -0.2}, {0.3, -0.2});
        CHECK(same.eye() == cam.eye());
        CHECK(same.up() == cam.up());
    }
    SUBCASE("quarter turn to the right") {
        auto r = arcball(cam, {0, 0}, {1, 0});
        checkVec(r.eye(), {-5, 0, 0});
        checkVec(r.up(), {0, 1, 0});
        checkVec(r.at(), {0, 0, 0});
    }
    SUBCASE("quarter turn upwards") {
        // axis (0,0,1)x(0,1,0) = (-1,0,0); rotating by -90 deg about it is +90 deg about x.
        auto r = arcball(cam, {0, 0}, {0, 1});
        checkVec(r.eye(), {0, -5, 0});
        checkVec(r.up(), {0, 0, 1});
    }
    SUBCASE("points outside the ball land on the silhouette") {
        checkVec(arcballPoint({3, 4}), {0.6, 0.8, 0});
        checkVec(arcballPoint({0, 0}), {0, 0, 1});
    }
    SUBCASE("drags along one great circle compose") {
        auto twoSteps = arcball(arcball(cam, {0, 0}, {0.1, 0}), {0.1, 0}, {0.2, 0});
        auto direct = arcball(cam, {0, 0}, {0.2, 0});
        checkVec(twoSteps.eye(), direct.eye());
        checkVec(twoSteps.up(), direct.up());
        CHECK(std::atan2(-direct.eye().x, direct.eye().z) == doctest::Approx(std::asin(0.2)).epsilon(1e-12));
    }
    SUBCASE("random drags preserve distance and an orthonormal frame") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> u(-1.2, 1.2);
        Camera c({1, 2, 3}, {-1, 0.5, 2}, {0, 1, 0});
        const double d0 = c.distance();
        double worst = 0;
        for (int i = 0; i < 10000; ++i) {
            c = arcball(c, {u(rng), u(rng)}, {u(rng), u(rng)});
            worst = std::max(worst, std::abs(c.distance() - d0));
        }
        CHECK(worst <= 1e-9);
        CHECK(std::abs(c.up().norm() - 1) <= 1e-9);
        CHECK(std::abs(c.up().dot(c.back())) <= 1e-9);
        checkVec(c.at(), {-1, 0.5, 2});
    }
}

TEST_CASE("zoom and pan") {
    auto cam = Camera::defaultCamera();
    auto same = zoom(cam, 1);
    CHECK(same.eye() == cam.eye());
    checkVec(zoom(cam, 2).eye(), {0, 0, 2.5});
    CHECK_THROWS_AS(zoom(cam, 0), ParamError);
    CHECK_THROWS_AS(zoom(cam, -1), ParamError);

    Camera c({1, 2, 3}, {0, 0, 0}, {0, 1, 0});
    auto moved = pan(c, 0.3, -0.7);
    checkVec(moved.eye() - moved.at(), c.eye() - c.at());
    auto back = pan(moved, -0.3, 0.7);
    checkVec(back.eye(), c.eye());
    checkVec(back.at(), c.at());
    checkVec(pan(cam, 0.1, 0).at(), {0.5, 0, 0});
}

TEST_CASE("camera params use the reserved names") {
    auto p = cameraToParams(Camera::defaultCamera());
    CHECK(p.size() == 3);
    CHECK(p.at("cam_eye") == ParamValue{Vec3{0, 0, 5}});
    CHECK(p.at("cam_at") == ParamValue{Vec3{0, 0, 0}});
    CHECK(p.at("cam_up") == ParamValue{Vec3{0, 1, 0}});
}

TEST_CASE("rodrigues") {
    checkVec(rotate({1, 0, 0}, {0, 0, 1}, std::acos(-1.0) / 2), {0, 1, 0});
    checkVec(rotate({1, 2, 3}, {0, 1, 0}, 0), {1, 2, 3});
    checkVec(rotate({0, 1, 0}, {0, 1, 0}, 1.3), {0, 1, 0});
}
