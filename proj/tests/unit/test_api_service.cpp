#include "evolvis/api_service.hpp"
#include "evolvis/param_manager.hpp"

#include "../support/service_harness.hpp"
#include "../support/temp_dir.hpp"

#include <doctest.h>

#include <condition_variable>

using namespace evolvis;
using nlohmann::json;
using testing::ServiceHarness;

namespace {

const std::string kFlat = "param a = 0.5 range 0 1;\npixel { a }\n";
const std::string kFlatDarker = "param a = 0.5 range 0 1;\npixel { a * 0.8 }\n";
const std::string kWithFn = "param a = 0.5 range 0 1;\nfn g(v) { v * v }\npixel { g(a) + x * 0.1 }\n";
const std::string kBroken = "pixel { foo }\n";

const std::string kOrbit =
    "param cam_eye = (0, 0, 5);\nparam cam_at = (0, 0, 0);\nparam cam_up = (0, 1, 0);\n"
    "pixel { clamp(0.5 + 0.1 * cam_eye_x - (x - 0.5) * (x - 0.5), 0, 1) }\n";
const std::string kOrbitFlipped =
    "param cam_eye = (0, 0, 5);\nparam cam_at = (0, 0, 0);\nparam cam_up = (0, 1, 0);\n"
    "pixel { clamp(0.5 - 0.1 * cam_eye_x + y * 0.2, 0, 1) }\n";

std::string ref(const std::string& rev, int gen) { return rev + ":" + std::to_string(gen); }

}  // namespace

TEST_CASE("session.open") {
    ServiceHarness h;
    auto r = h.call("session.open", {{"toolchainId", "minivis"}});
    CHECK(r["sessionId"] == "s1");
    CHECK(r["width"] == 256);
    CHECK(r["current"].is_null());
    CHECK(h.call("session.open", {{"toolchainId", "minivis"}})["sessionId"] == "s2");
    CHECK(h.errorCode("session.open", {{"toolchainId", "nope"}}) == rpc::kUnknownToolchain);
    CHECK(h.errorCode("session.open", {{"toolchainId", "minivis"}, {"width", 0}}) == rpc::kInvalidParams);
    CHECK(h.errorCode("session.open", {{"toolchainId", "minivis"}, {"store", "x"}}) == rpc::kInvalidParams);
    CHECK(h.errorCode("view.tree", {{"sessionId", "s9"}}) == rpc::kUnknownSession);
    CHECK(h.call("toolchains.list", json::object()) == json{"minivis"});
}

TEST_CASE("valid update commits and renders") {
    ServiceHarness h;
    h.open();
    h.call("source.update", {{"sessionId", h.sessionId}, {"files", {{"main.mv", kFlat}}}});
    h.service.advanceTime(Millis(1499));
    CHECK(h.notes.empty());
    h.service.advanceTime(Millis(1));
    REQUIRE(h.methods() == std::vector<std::string>{"compile.succeeded", "tree.changed", "image.ready"});
    auto ok = h.take("compile.succeeded")[0];
    CHECK(ok["parent"].is_null());
    CHECK(ok["unchanged"] == false);
    auto rev = ok["revisionId"].get<std::string>();
    CHECK(h.take("tree.changed")[0]["head"] == rev);
    auto ready = h.take("image.ready")[0];
    CHECK(ready["ref"] == ref(rev, 0));

    auto img = h.image(ref(rev, 0));
    CHECK(img.width() == 16);
    CHECK(img.at(3, 3)[0] == 128);
}

TEST_CASE("broken update leaves the store untouched") {
    ServiceHarness h;
    h.open();
    auto r1 = h.commit(kFlat);
    auto before = h.tree();
    h.notes.clear();
    h.update(kBroken);
    REQUIRE(h.methods() == std::vector<std::string>{"compile.failed"});
    auto diag = h.take("compile.failed")[0]["diagnostics"][0];
    CHECK(diag["code"] == "UnknownIdentifier");
    CHECK(diag["line"] == 1);
    CHECK(diag["col"] == 9);
    CHECK(diag["file"] == "main.mv");
    CHECK(h.tree() == before);
    CHECK(h.call("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", r1}})["files"]["main.mv"] == kFlat);
}

TEST_CASE("identical resend creates no revision") {
    ServiceHarness h;
    h.open();
    auto r1 = h.commit(kFlat);
    h.notes.clear();
    h.update(kFlat);
    REQUIRE(h.methods() == std::vector<std::string>{"compile.succeeded"});
    CHECK(h.take("compile.succeeded")[0]["unchanged"] == true);
    CHECK(h.take("compile.succeeded")[0]["revisionId"] == r1);
    CHECK(h.tree()["revisions"].size() == 1);
}

TEST_CASE("debounce collapses a burst") {
    ServiceHarness h;
    h.open();
    for (const auto& s : {kFlat, kFlatDarker, kWithFn}) {
        h.call("source.update", {{"sessionId", h.sessionId}, {"files", {{"main.mv", s}}}});
        h.service.advanceTime(Millis(1000));
    }
    CHECK(h.notes.empty());
    h.service.advanceTime(Millis(500));
    REQUIRE(h.take("compile.succeeded").size() == 1);
    auto rev = h.take("compile.succeeded")[0]["revisionId"].get<std::string>();
    CHECK(h.call("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", rev}})["files"]["main.mv"] == kWithFn);
}

TEST_CASE("checkout moves current and forks branches") {
    ServiceHarness h;
    h.open();
    auto r1 = h.commit(kFlat);
    auto r2 = h.commit(kFlatDarker);
    auto r3 = h.commit(kWithFn);

    auto co = h.call("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", r1}});
    CHECK(co["revisionId"] == r1);
    CHECK(co["toolchainId"] == "minivis");
    auto branch = h.tree()["branch"];
    CHECK(branch["head"] == r3);
    CHECK(branch["current"] == r1);
    CHECK(branch["colors"][r2] == "blue");

    // Editing from an older state forks; the abandoned tail turns grey.
    auto r4 = h.commit(kFlat + "// note\n");
    CHECK(h.take("compile.succeeded").back()["parent"] == r1);
    branch = h.tree()["branch"];
    CHECK(branch["head"] == r4);
    CHECK(branch["colors"][r2] == "grey");
    CHECK(branch["colors"][r3] == "grey");

    h.call("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", r2}});
    branch = h.tree()["branch"];
    CHECK(branch["head"] == r3);
    CHECK(branch["colors"][r4] == "grey");

    CHECK(h.errorCode("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", std::string(64, 'f')}}) ==
          rpc::kUnknownRevision);
    CHECK(h.errorCode("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", "xyz"}}) == rpc::kUnknownRevision);
}

TEST_CASE("view.tree groups equal structure") {
    ServiceHarness h;
    h.open();
    auto fresh = h.tree();
    CHECK(fresh["groups"].empty());
    CHECK(fresh["branch"].is_null());

    auto r1 = h.commit("pixel { 0.25 }\n");
    auto r2 = h.commit("pixel { 0.25 + 0 }\n");
    auto r3 = h.commit("pixel { 0.5 * 0.5 }\n");
    auto t = h.tree();
    REQUIRE(t["groups"].size() == 1);
    CHECK(t["groups"][0]["collapsed"] == true);
    auto rows = t["branch"]["rows"];
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["images"] == json{ref(r1, 0), ref(r2, 0), ref(r3, 0)});
    CHECK(rows[0]["variance"] == "g0:0");

    // Identical outputs give a black variance image.
    auto variance = h.image("g0:0");
    bool black = true;
    for (int y = 0; y < variance.height(); ++y)
        for (int x = 0; x < variance.width(); ++x) black = black && variance.at(x, y)[0] == 0;
    CHECK(black);

    auto r4 = h.commit("fn f() { 0.25 }\npixel { f() }\n");
    t = h.tree();
    CHECK(t["groups"].size() == 2);
    REQUIRE(t["branch"]["rows"].size() == 2);
    CHECK(t["branch"]["rows"][1]["revisions"] == json{r4});
    CHECK(t["branch"]["rows"][1]["variance"].is_null());
    CHECK(t["revisions"][3]["parent"] == r3);
    CHECK(t["revisions"][3]["group"] == 1);
}

TEST_CASE("view.expand") {
    ServiceHarness h;
    h.open();
    h.commit("pixel { 0.1 }\n");
    h.commit("pixel { 0.2 }\n");
    h.commit("fn f() { 0.3 }\npixel { f() }\n");
    auto before = h.tree();

    auto e = h.call("view.expand", {{"sessionId", h.sessionId}, {"groupId", 0}, {"expanded", true}});
    CHECK(e["collapsed"] == false);
    CHECK(h.tree()["branch"]["rows"].size() == 3);
    h.call("view.expand", {{"sessionId", h.sessionId}, {"groupId", 0}, {"expanded", false}});
    CHECK(h.tree() == before);

    // Single-member groups have nothing to expand.
    h.call("view.expand", {{"sessionId", h.sessionId}, {"groupId", 1}, {"expanded", true}});
    CHECK(h.tree() == before);

    CHECK(h.errorCode("view.expand", {{"sessionId", h.sessionId}, {"groupId", 7}, {"expanded", true}}) ==
          rpc::kUnknownGroup);
    CHECK(h.errorCode("view.expand", {{"sessionId", h.sessionId}, {"groupId", 0}}) == rpc::kInvalidParams);
}

TEST_CASE("diff.get") {
    ServiceHarness h;
    h.open();
    auto r1 = h.commit(kFlat);
    auto r2 = h.commit(kFlatDarker);

    auto same = h.call("diff.get", {{"sessionId", h.sessionId}, {"fromRev", r1}, {"toRev", r1}});
    REQUIRE(same.size() == 1);
    CHECK(same[0]["status"] == "unchanged");
    CHECK(same[0]["hunks"].empty());

    auto fwd = h.call("diff.get", {{"sessionId", h.sessionId}, {"fromRev", r1}, {"toRev", r2}});
    auto ops = fwd[0]["hunks"][0]["ops"];
    CHECK(ops[1]["tag"] == "remove");
    CHECK(ops[1]["text"] == "pixel { a }");
    CHECK(ops[2]["tag"] == "add");

    auto back = h.call("diff.get", json::array({h.sessionId, r1, r2, "backward"}));
    CHECK(back[0]["hunks"][0]["ops"][1]["tag"] == "remove");
    CHECK(back[0]["hunks"][0]["ops"][1]["text"] == "pixel { a * 0.8 }");

    CHECK(h.errorCode("diff.get", {{"sessionId", h.sessionId}, {"fromRev", r1}, {"toRev", std::string(64, '0')}}) ==
          rpc::kUnknownRevision);
    CHECK(h.errorCode("diff.get", {{"sessionId", h.sessionId}, {"fromRev", r1}, {"toRev", r2}, {"direction", "up"}}) ==
          rpc::kInvalidParams);
}

TEST_CASE("params.set refreshes the branch with current first") {
    ServiceHarness h;
    h.open();
    auto r1 = h.commit("pixel { 0.25 }\n");
    auto r2 = h.commit("pixel { 0.25 + 0 }\n");
    auto r3 = h.commit(kOrbit);
    auto r4 = h.commit(kOrbitFlipped);
    h.call("state.checkout", {{"sessionId", h.sessionId}, {"revisionId", r3}});
    h.service.runPending();
    std::map<std::string, Image> gen0;
    for (const auto& r : {r1, r2, r3, r4}) gen0.emplace(r, h.image(ref(r, 0)));

    h.notes.clear();
    auto cam = arcball(Camera::defaultCamera(), {0, 0}, {0.5, 0});
    json values = toJson(cameraToParams(cam));
    auto set = h.call("params.set", {{"sessionId", h.sessionId}, {"values", values}});
    CHECK(set["generation"] == 1);
    h.service.runPending();

    auto ready = h.take("image.ready");
    REQUIRE(ready.size() == 4);
    CHECK(ready[0]["revisionId"] == r3);
    CHECK(ready[1]["revisionId"] == r4);
    std::set<std::string> got;
    for (const auto& n : ready) {
        CHECK(n["generation"] == 1);
        got.insert(n["revisionId"]);
    }
    CHECK(got == std::set<std::string>{r1, r2, r3, r4});

    // Revisions without camera parameters are unaffected by the drag.
    CHECK(h.image(ref(r1, 1)) == gen0.at(r1));
    CHECK(h.image(ref(r2, 1)) == gen0.at(r2));
    CHECK_FALSE(h.image(ref(r3, 1)) == gen0.at(r3));
    CHECK_FALSE(h.image(ref(r4, 1)) == gen0.at(r4));

    // Older generations are gone.
    CHECK(h.errorCode("image.get", {{"sessionId", h.sessionId}, {"ref", ref(r1, 0)}}) == rpc::kUnknownImage);
    CHECK(h.errorCode("image.get", {{"sessionId", h.sessionId}, {"ref", "g5:1"}}) == rpc::kUnknownImage);
    CHECK(h.errorCode("image.get", {{"sessionId", h.sessionId}, {"ref", "junk"}}) == rpc::kUnknownImage);

    auto get = h.call("params.get", {{"sessionId", h.sessionId}});
    CHECK(get["generation"] == 1);
    CHECK(get["declared"].size() == 3);
}

TEST_CASE("params.set rejects type mismatches") {
    ServiceHarness h;
    h.open();
    h.commit(kFlat);
    CHECK(h.errorCode("params.set", {{"sessionId", h.sessionId}, {"values", {{"a", {1, 2, 3}}}}}) ==
          rpc::kTypeMismatch);
    CHECK(h.call("params.get", {{"sessionId", h.sessionId}})["generation"] == 0);
    CHECK(h.errorCode("params.set", {{"sessionId", h.sessionId}, {"values", {{"a", "x"}}}}) == rpc::kInvalidParams);
    // Undeclared names are kept for later revisions.
    CHECK(h.call("params.set", {{"sessionId", h.sessionId}, {"values", {{"zz", 1.0}}}})["generation"] == 1);
}

TEST_CASE("params feed the render") {
    ServiceHarness h;
    h.open();
    auto r = h.commit(kFlat);
    h.call("params.set", {{"sessionId", h.sessionId}, {"values", {{"a", 1.0}}}});
    h.service.runPending();
    CHECK(h.image(ref(r, 1)).at(0, 0)[0] == 255);
}

TEST_CASE("json-rpc conformance") {
    ServiceHarness h;
    auto parse = json::parse(*h.service.handleText("{", h.client));
    CHECK(parse["error"]["code"] == rpc::kParseError);
    CHECK(parse["id"].is_null());

    auto invalid = json::parse(*h.service.handleText(R"({"jsonrpc":"2.0","method":1,"id":1})", h.client));
    CHECK(invalid["error"]["code"] == rpc::kInvalidRequest);
    CHECK(json::parse(*h.service.handleText(R"({"jsonrpc":"1.0","method":"x","id":1})", h.client))["error"]["code"] ==
          rpc::kInvalidRequest);
    CHECK(json::parse(*h.service.handleText("[]", h.client))["error"]["code"] == rpc::kInvalidRequest);

    auto missing = json::parse(*h.service.handleText(R"({"jsonrpc":"2.0","method":"nope","id":"a"})", h.client));
    CHECK(missing["error"]["code"] == rpc::kMethodNotFound);
    CHECK(missing["id"] == "a");

    CHECK_FALSE(h.service.handleText(R"({"jsonrpc":"2.0","method":"toolchains.list"})", h.client));

    auto batch = json::parse(*h.service.handleText(
        R"([{"jsonrpc":"2.0","method":"toolchains.list","id":1},
            {"jsonrpc":"2.0","method":"toolchains.list"},
            1,
            {"jsonrpc":"2.0","method":"session.open","params":{"toolchainId":"minivis"},"id":2}])",
        h.client));
    REQUIRE(batch.size() == 3);
    CHECK(batch[0]["result"] == json{"minivis"});
    CHECK(batch[1]["error"]["code"] == rpc::kInvalidRequest);
    CHECK(batch[2]["result"]["sessionId"] == "s1");
    CHECK_FALSE(h.service.handleText(R"([{"jsonrpc":"2.0","method":"toolchains.list"}])", h.client));

    auto badParams = json::parse(*h.service.handleText(R"({"jsonrpc":"2.0","method":"view.tree","params":3,"id":4})", h.client));
    CHECK(badParams["error"]["code"] == rpc::kInvalidRequest);
}

TEST_CASE("notifications reach every subscriber") {
    ServiceHarness h;
    h.open();
    std::vector<json> other;
    auto c2 = h.service.connect([&](const json& m) { other.push_back(m); });
    auto resumed = h.service.handle({{"jsonrpc", "2.0"}, {"id", 1}, {"method", "session.resume"},
                                     {"params", {{"sessionId", h.sessionId}}}}, c2);
    CHECK((*resumed)["result"]["toolchainId"] == "minivis");
    h.commit(kFlat);
    CHECK(other.size() == h.notes.size());
    h.service.disconnect(c2);
    h.commit(kFlatDarker);
    CHECK(other.size() < h.notes.size());
}

TEST_CASE("reloading a store reproduces the tree") {
    testing::TempDir dir;
    json saved;
    std::string head;
    {
        ServiceHarness h(ServiceHarness::simulatedConfig(dir.path()));
        h.open(16, "demo");
        h.commit("pixel { 0.1 }\n");
        h.commit("pixel { 0.2 }\n");
        h.commit("fn f() { 0.3 }\npixel { f() }\n");
        head = h.commit("fn f() { 0.4 }\npixel { f() }\n");
        saved = h.tree();
    }
    ServiceHarness h(ServiceHarness::simulatedConfig(dir.path()));
    auto r = h.call("session.open", {{"toolchainId", "minivis"}, {"width", 16}, {"height", 16}, {"store", "demo"}});
    CHECK(r["current"] == head);
    h.sessionId = r["sessionId"];
    h.service.runPending();
    CHECK(h.tree() == saved);
    CHECK(h.take("image.ready").size() == 4);
}

TEST_CASE("threaded mode") {
    ServiceConfig config;
    config.scheduler.debounce = Millis(20);
    config.scheduler.renderWorkers = 2;
    ApiService service(ToolchainRegistry::withBuiltins(), config);
    std::mutex m;
    std::condition_variable cv;
    std::vector<json> notes;
    auto client = service.connect([&](const json& n) {
        std::lock_guard lock(m);
        notes.push_back(n);
        cv.notify_all();
    });
    service.start();
    auto call = [&](const std::string& method, json params) {
        return (*service.handle({{"jsonrpc", "2.0"}, {"id", 1}, {"method", method}, {"params", params}}, client))["result"];
    };
    auto sid = call("session.open", {{"toolchainId", "minivis"}, {"width", 8}, {"height", 8}})["sessionId"];
    CHECK(sid.get<std::string>().size() == 32);
    call("source.update", {{"sessionId", sid}, {"files", {{"main.mv", kFlat}}}});
    std::unique_lock lock(m);
    bool ready = cv.wait_for(lock, std::chrono::seconds(10), [&] {
        return std::any_of(notes.begin(), notes.end(), [](const json& n) { return n["method"] == "image.ready"; });
    });
    lock.unlock();
    CHECK(ready);
    service.stop();
}
