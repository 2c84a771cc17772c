#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "bcih/errors.hpp"
#include "bcih/session.hpp"
#include "fixtures.hpp"

using namespace bcih;

namespace {

std::shared_ptr<const SessionResources> resources(double timeout = 120.0) {
    const auto& w = fixture::world();
    auto r = std::make_shared<SessionResources>();
    r->scene = w.scene;
    r->model = w.model;
    r->subject = w.profile.subject;
    r->operator_config = w.profile.operator_config;
    r->guide = w.config.guide;
    r->timeout = timeout;
    return r;
}

std::string msg(const json& j) { return j.dump(); }

json cursor_at(Vec2 p) { return {{"type", "cursor"}, {"x", p.x}, {"y", p.y}, {"t", 0.0}}; }

struct Run {
    std::vector<json> states;
    std::optional<json> end;
};

// Drives an interactive session in virtual time: the pointer leads the
// cursor along the centerline with a sideways wobble, input every 50 ms.
Run drive(InteractiveSession& s, double max_seconds, double wobble = 0.0) {
    const Scene& scene = *fixture::world().scene;
    Run run;
    double now = 0.0;
    for (int step = 0; step < static_cast<int>(max_seconds / 0.05); ++step) {
        now += 0.05;
        const auto* sim = s.simulator();
        if (sim) {
            const double ahead = sim->progress() + 40.0;
            const Vec2 p = scene.point_at(ahead) + Vec2{wobble * std::sin(now * 3.0), wobble * std::cos(now * 2.3)};
            CHECK(s.handle(msg(cursor_at(p)), now).empty());
        }
        for (auto& m : s.advance(now)) {
            if (m["type"] == "state") run.states.push_back(m);
            if (m["type"] == "trial_end") {
                run.end = m;
                return run;
            }
        }
    }
    return run;
}

}  // namespace

TEST_CASE("server config validation and env overrides") {
    ServerConfig c;
    CHECK_NOTHROW(c.validate());
    c.state_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ServerConfig{};
    c.max_sessions = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    ::setenv("BCIH_PORT", "9123", 1);
    ::setenv("BCIH_DATA_DIR", "/tmp/bcih_env_dir", 1);
    const auto o = apply_env_overrides(ServerConfig{});
    CHECK(o.port == 9123);
    CHECK(o.data_dir == "/tmp/bcih_env_dir");
    ::setenv("BCIH_PORT", "eighty", 1);
    CHECK_THROWS_AS(apply_env_overrides(ServerConfig{}), ConfigError);
    ::unsetenv("BCIH_PORT");
    ::unsetenv("BCIH_DATA_DIR");
    CHECK(apply_env_overrides(ServerConfig{}).port == 8765);
}

TEST_CASE("protocol errors keep the session alive") {
    InteractiveSession s(resources(), ServerConfig{}, 1);
    auto r = s.handle("{oops", 0.0);
    REQUIRE(r.size() == 1);
    CHECK(r[0]["type"] == "error");
    CHECK(r[0]["code"] == "bad_json");
    r = s.handle(R"({"kind":"hello"})", 0.0);
    CHECK(r[0]["code"] == "bad_message");
    r = s.handle(R"({"type":"dance"})", 0.0);
    CHECK(r[0]["code"] == "unknown_type");
    r = s.handle(R"({"type":"start"})", 0.0);
    CHECK(r[0]["code"] == "out_of_order");
    r = s.handle(R"({"type":"hello","condition":"SOMETIMES"})", 0.0);
    CHECK(r[0]["code"] == "bad_message");
    r = s.handle(R"({"type":"hello","condition":"NO_A","mode":"telepathic"})", 0.0);
    CHECK(r[0]["code"] == "bad_message");
    r = s.handle(R"({"type":"hello","condition":"NO_A"})", 0.0);
    CHECK(r[0]["type"] == "scene");
    CHECK(r[0]["condition"] == "NO_A");
    CHECK(r[0]["geometry"]["walls"].size() == fixture::world().scene->walls.size());
    r = s.handle(R"({"type":"cursor","x":"left"})", 0.0);
    CHECK(r[0]["code"] == "bad_message");
    r = s.handle(R"({"type":"start"})", 0.0);
    CHECK(r[0]["type"] == "state");
    CHECK(s.phase() == InteractiveSession::Phase::Running);
    r = s.handle(R"({"type":"start"})", 0.0);
    CHECK(r[0]["code"] == "out_of_order");
    r = s.handle(R"({"type":"hello"})", 0.0);
    CHECK(r[0]["code"] == "out_of_order");
    r = s.handle(R"({"type":"reset"})", 0.0);
    CHECK(r[0]["type"] == "scene");
    CHECK(s.phase() == InteractiveSession::Phase::Ready);
}

TEST_CASE("every message has a type and states carry the wire fields") {
    InteractiveSession s(resources(), ServerConfig{}, 2);
    s.handle(R"({"type":"hello","condition":"BCI_A"})", 0.0);
    const auto first = s.handle(R"({"type":"start"})", 0.0);
    for (const char* key : {"t", "cursor", "force", "index", "guide_active", "collisions", "part", "paused"})
        CHECK(first[0].contains(key));
    CHECK(first[0]["cursor"].contains("x"));
    CHECK(first[0]["force"].contains("y"));
}

TEST_CASE("ALL_A: every state has the guide on, states are monotone in t") {
    InteractiveSession s(resources(), ServerConfig{}, 3);
    s.handle(R"({"type":"hello","condition":"ALL_A"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    const auto run = drive(s, 200.0);
    REQUIRE(run.end.has_value());
    CHECK(run.states.size() > 100);
    for (std::size_t i = 0; i < run.states.size(); ++i) {
        CHECK(run.states[i]["type"] == "state");
        CHECK(run.states[i]["guide_active"] == true);
        if (i > 0) CHECK(run.states[i]["t"].get<double>() >= run.states[i - 1]["t"].get<double>());
    }
    const auto& m = (*run.end)["metrics"];
    CHECK(m["condition"] == "ALL_A");
    CHECK(m["outcome"] == "completed");
    CHECK(m["activation"].get<double>() == 1.0);
    CHECK(s.phase() == InteractiveSession::Phase::Ended);
}

TEST_CASE("BCI_A: guide changes only across whole-second boundaries") {
    InteractiveSession s(resources(), ServerConfig{}, 4);
    s.handle(R"({"type":"hello","condition":"BCI_A"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    const auto run = drive(s, 200.0, 15.0);
    REQUIRE(run.end.has_value());
    int changes = 0;
    for (std::size_t i = 1; i < run.states.size(); ++i) {
        if (run.states[i]["guide_active"] == run.states[i - 1]["guide_active"]) continue;
        ++changes;
        const double t0 = run.states[i - 1]["t"].get<double>(), t1 = run.states[i]["t"].get<double>();
        CHECK(std::floor(t1 + 1e-9) > std::floor(t0 + 1e-9));
    }
    CHECK(changes > 0);
    const auto& rec = *s.last_record();
    for (std::size_t i = 1; i < rec.samples.size(); ++i)
        if (rec.samples[i].guide_active != rec.samples[i - 1].guide_active)
            CHECK(std::abs(rec.samples[i].t - std::round(rec.samples[i].t)) < 1e-9);
}

TEST_CASE("no input for the timeout pauses the trial, input resumes it") {
    ServerConfig cfg;
    cfg.input_timeout = 2.0;
    InteractiveSession s(resources(), cfg, 5);
    s.handle(R"({"type":"hello","condition":"NO_A"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    double now = 0.0;
    std::vector<json> paused_states;
    for (int i = 0; i < 100; ++i) {
        now += 0.05;
        for (auto& m : s.advance(now))
            if (m["paused"] == true) paused_states.push_back(m);
    }
    CHECK(s.paused());
    REQUIRE(paused_states.size() == 1);  // announced once
    const double frozen = s.simulator()->time();
    CHECK(frozen == doctest::Approx(2.0).epsilon(0.05));
    CHECK(s.advance(now + 10.0).empty());
    CHECK(s.simulator()->time() == frozen);
    s.handle(msg(cursor_at(fixture::world().scene->start)), now + 10.0);
    CHECK_FALSE(s.paused());
    for (int i = 1; i <= 10; ++i) s.advance(now + 10.0 + 0.05 * i);
    CHECK(s.simulator()->time() == doctest::Approx(frozen + 0.5).epsilon(0.01));
    // A single long gap is capped so a stalled timer cannot fast-forward the trial.
    const double before = s.simulator()->time();
    s.handle(msg(cursor_at(fixture::world().scene->start)), now + 10.6);
    s.advance(now + 11.6);
    CHECK(s.simulator()->time() - before <= 0.26);
}

TEST_CASE("simulated mode runs the operator model without input") {
    InteractiveSession s(resources(), ServerConfig{}, 6);
    s.handle(R"({"type":"hello","condition":"BCI_A","mode":"simulated"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    std::optional<json> end;
    for (double now = 0.05; now < 200.0 && !end; now += 0.05)
        for (auto& m : s.advance(now))
            if (m["type"] == "trial_end") end = m;
    REQUIRE(end.has_value());
    CHECK_FALSE(s.paused());
    CHECK(s.last_record()->header["mode"] == "simulated");
    // Same seed through the batch runner gives the same record.
    TrialRecord batch = run_trial(*s.setup());
    batch.header["mode"] = "simulated";
    CHECK(to_ndjson(batch) == to_ndjson(*s.last_record()));
}

TEST_CASE("interactive trace replayed in batch reproduces the trial") {
    InteractiveSession s(resources(), ServerConfig{}, 7);
    s.handle(R"({"type":"hello","condition":"BCI_A"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    const auto run = drive(s, 200.0, 45.0);
    REQUIRE(run.end.has_value());
    const auto& live = *s.last_record();
    const auto& trace = s.target_trace();
    REQUIRE(!trace.empty());
    TrialRecord batch = run_trial_with_targets(*s.setup(), [&](std::int64_t tick) {
        return trace[static_cast<std::size_t>(std::min<std::int64_t>(tick, static_cast<std::int64_t>(trace.size()) - 1))];
    });
    CHECK(batch.collisions.size() == live.collisions.size());
    CHECK((*run.end)["metrics"]["collisions"] == live.collisions.size());
    CHECK(live.collisions.size() > 0);
    batch.header["mode"] = "interactive";
    CHECK(to_ndjson(batch) == to_ndjson(live));
}

TEST_CASE("opt-in NDJSON dump") {
    const auto dir = std::filesystem::temp_directory_path() / "bcih_session_dump_test";
    std::filesystem::remove_all(dir);
    ServerConfig cfg;
    cfg.data_dir = dir;
    InteractiveSession s(resources(3.0), cfg, 8);
    s.handle(R"({"type":"hello","condition":"NO_A","mode":"simulated"})", 0.0);
    s.handle(R"({"type":"start"})", 0.0);
    std::optional<json> end;
    for (double now = 0.05; now < 10.0 && !end; now += 0.05)
        for (auto& m : s.advance(now))
            if (m["type"] == "trial_end") end = m;
    REQUIRE(end.has_value());
    CHECK((*end)["metrics"]["outcome"] == "timeout");
    REQUIRE(end->contains("record"));
    std::ifstream in((*end)["record"].get<std::string>());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto rec = trial_from_ndjson(text);
    CHECK(rec.samples.size() == 30);
    std::filesystem::remove_all(dir);
}
