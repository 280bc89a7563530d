#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "clh/answer.hpp"
#include "clh/backend.hpp"
#include "clh/http_backend.hpp"
#include "support/fixtures.hpp"

namespace {

clh::BackendRequest make_request(clh::Stage stage, const std::string& prompt,
                                 const std::string& note_id = "",
                                 std::vector<std::string> candidates = {},
                                 clh::DecodingMode mode = clh::DecodingMode::Thinking) {
    clh::BackendRequest request;
    request.stage = stage;
    request.mode = mode;
    request.prompt = prompt;
    request.note_id = note_id;
    request.candidate_codes = std::move(candidates);
    return request;
}

} // namespace

TEST_CASE("scripted backend replays exact entries, then defaults, then fails") {
    clh::ScriptedBackend backend;
    backend.add_reply(clh::Stage::Navigator, "prompt one", "<answer>1</answer>");
    backend.add_default(clh::Stage::Navigator, "<answer>0</answer>");

    CHECK(backend.complete(make_request(clh::Stage::Navigator, "prompt one")).text ==
          "<answer>1</answer>");
    CHECK(backend.complete(make_request(clh::Stage::Navigator, "unknown prompt")).text ==
          "<answer>0</answer>");
    CHECK(backend.calls() == 2);

    try {
        backend.complete(make_request(clh::Stage::Validator, "prompt one")); // different stage
        FAIL("expected BackendUnavailable");
    } catch (const clh::Error& err) {
        CHECK(err.code() == clh::ErrorCode::BackendUnavailable);
    }
}

TEST_CASE("scripted backend round-trips through its JSON form") {
    clh::ScriptedBackend original;
    original.add_reply(clh::Stage::Evidence, "alpha", "spans a");
    original.add_reply(clh::Stage::Reconciler, "beta", "<answer>1, 2</answer>");
    original.add_default(clh::Stage::Validator, "<answer>0</answer>");

    std::stringstream buf;
    buf << original.to_json().dump();
    clh::ScriptedBackend reloaded = clh::ScriptedBackend::load(buf, "roundtrip.json");

    CHECK(reloaded.complete(make_request(clh::Stage::Evidence, "alpha")).text == "spans a");
    CHECK(reloaded.complete(make_request(clh::Stage::Reconciler, "beta")).text ==
          "<answer>1, 2</answer>");
    CHECK(reloaded.complete(make_request(clh::Stage::Validator, "anything")).text ==
          "<answer>0</answer>");

    // Serialization is canonical: dump(load(dump(x))) == dump(x).
    CHECK(reloaded.to_json().dump() == original.to_json().dump());
}

TEST_CASE("scripted backend rejects foreign schemas and bad JSON") {
    std::istringstream bad_schema(R"({"schema":"other/1","answers":[]})");
    try {
        clh::ScriptedBackend::load(bad_schema, "bad.json");
        FAIL("expected ParseError");
    } catch (const clh::Error& err) {
        CHECK(err.code() == clh::ErrorCode::ParseError);
    }
    std::istringstream not_json("{nope");
    CHECK_THROWS_AS(clh::ScriptedBackend::load(not_json, "bad.json"), clh::Error);
}

TEST_CASE("oracle backend quotes gold evidence spans for the evidence stage") {
    fixtures::World world = fixtures::make_world();
    clh::OracleBackend backend(world.notes);
    const clh::ClinicalNote& note = world.notes.front();

    auto reply = backend.complete(make_request(clh::Stage::Evidence, "whatever", note.id));
    clh::Decoded decoded = clh::parse_thinking_answer(reply.text);
    auto spans = clh::extract_strings(decoded.payload);
    REQUIRE(spans.size() == note.gold_evidence.size());
    for (std::size_t i = 0; i < spans.size(); ++i) CHECK(spans[i] == note.gold_evidence[i].text);

    auto raw = backend.complete(
        make_request(clh::Stage::Evidence, "whatever", note.id, {}, clh::DecodingMode::Constrained));
    CHECK(raw.text.find("<answer>") == std::string::npos);
    CHECK(raw.text.find('"') != std::string::npos);
}

TEST_CASE("oracle backend selects candidate positions that hit gold") {
    fixtures::World world = fixtures::make_world();
    clh::OracleBackend backend(world.notes);
    const clh::ClinicalNote* multi = nullptr;
    for (const auto& note : world.notes) {
        if (note.gold_codes.size() >= 2) multi = &note;
    }
    REQUIRE(multi != nullptr);

    std::vector<std::string> candidates = {"Z99", multi->gold_codes[0], "Z98",
                                           multi->gold_codes[1]};
    auto nav = backend.complete(make_request(clh::Stage::Navigator, "p", multi->id, candidates));
    auto nav_ids = clh::extract_ids(clh::parse_thinking_answer(nav.text).payload, 4);
    CHECK(nav_ids.ids == std::vector<int>{2, 4});

    auto rec = backend.complete(make_request(clh::Stage::Reconciler, "p", multi->id, candidates));
    CHECK(clh::parse_thinking_answer(rec.text).payload == "2, 4");

    // Validator keeps at most one: the first gold hit.
    auto val = backend.complete(make_request(clh::Stage::Validator, "p", multi->id, candidates));
    CHECK(clh::parse_thinking_answer(val.text).payload == "2");

    // No gold in the lineup: the empty-selection sentinel.
    auto none = backend.complete(make_request(clh::Stage::Navigator, "p", multi->id, {"Z99", "Z98"}));
    CHECK(clh::parse_thinking_answer(none.text).payload == "0");

    try {
        backend.complete(make_request(clh::Stage::Navigator, "p", "missing-note", candidates));
        FAIL("expected BackendUnavailable");
    } catch (const clh::Error& err) {
        CHECK(err.code() == clh::ErrorCode::BackendUnavailable);
    }
}

TEST_CASE("recording backend captures a replayable transcript") {
    fixtures::World world = fixtures::make_world();
    clh::OracleBackend oracle(world.notes);
    clh::ScriptedBackend table;
    fixtures::RecordingBackend recorder(oracle, table);

    const clh::ClinicalNote& note = world.notes.front();
    auto request = make_request(clh::Stage::Evidence, "evidence prompt", note.id);
    auto live = recorder.complete(request);
    auto replayed = table.complete(request);
    CHECK(replayed.text == live.text);
}

TEST_CASE("http backend talks chat-completions with auth, retries, and limits") {
    std::atomic<int> hits{0};
    std::atomic<int> fail_first{0};
    std::string seen_auth;
    std::string seen_model;
    std::string seen_prompt;

    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        hits.fetch_add(1);
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        auto body = clh::json::parse(req.body);
        seen_model = body.value("model", "");
        seen_prompt = body.at("messages").at(0).value("content", "");
        if (fail_first.load() > 0) {
            fail_first.fetch_sub(1);
            res.status = 503;
            res.set_content("overloaded", "text/plain");
            return;
        }
        clh::json message = {{"role", "assistant"}, {"content", "<answer>1</answer>"}};
        clh::json choice = {{"message", message}};
        clh::json reply = {{"choices", clh::json::array({choice})}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/bad/json", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    server.Post("/bad/shape", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[]})", "application/json");
    });
    server.Post("/always/403", [](const httplib::Request&, httplib::Response& res) {
        res.status = 403;
        res.set_content("forbidden", "text/plain");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("CLH_API_KEY", "secret-key-123", 1);
    clh::HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "test-model";
    config.backoff_ms = 1;

    SECTION("success carries auth header, model, and prompt") {
        clh::HttpBackend backend(config);
        auto reply = backend.complete(make_request(clh::Stage::Navigator, "the prompt"));
        CHECK(reply.text == "<answer>1</answer>");
        CHECK(seen_auth == "Bearer secret-key-123");
        CHECK(seen_model == "test-model");
        CHECK(seen_prompt == "the prompt");
        CHECK(backend.calls() == 1);
        CHECK(backend.retries() == 0);
    }

    SECTION("5xx retries until success and counts the retries") {
        fail_first.store(2);
        clh::HttpBackend backend(config);
        auto reply = backend.complete(make_request(clh::Stage::Navigator, "retry prompt"));
        CHECK(reply.text == "<answer>1</answer>");
        CHECK(backend.retries() == 2);
        CHECK(backend.failures() == 0);
    }

    SECTION("exhausted retries surface BackendUnavailable") {
        fail_first.store(100);
        clh::HttpBackendConfig brief = config;
        brief.max_retries = 1;
        clh::HttpBackend backend(brief);
        try {
            backend.complete(make_request(clh::Stage::Navigator, "doomed"));
            FAIL("expected BackendUnavailable");
        } catch (const clh::Error& err) {
            CHECK(err.code() == clh::ErrorCode::BackendUnavailable);
        }
        CHECK(backend.retries() == 1);
        CHECK(backend.failures() == 1);
        fail_first.store(0);
    }

    SECTION("other 4xx fails immediately without retrying") {
        clh::HttpBackendConfig bad = config;
        bad.path = "/always/403";
        clh::HttpBackend backend(bad);
        int before = hits.load();
        try {
            backend.complete(make_request(clh::Stage::Navigator, "nope"));
            FAIL("expected BackendUnavailable");
        } catch (const clh::Error& err) {
            CHECK(err.code() == clh::ErrorCode::BackendUnavailable);
        }
        CHECK(backend.retries() == 0);
        CHECK(hits.load() == before); // 403 endpoint does not touch the main counter
    }

    SECTION("malformed reply bodies raise ParseError") {
        clh::HttpBackendConfig bad = config;
        bad.path = "/bad/json";
        clh::HttpBackend backend(bad);
        try {
            backend.complete(make_request(clh::Stage::Navigator, "x"));
            FAIL("expected ParseError");
        } catch (const clh::Error& err) {
            CHECK(err.code() == clh::ErrorCode::ParseError);
        }

        clh::HttpBackendConfig shape = config;
        shape.path = "/bad/shape";
        clh::HttpBackend backend2(shape);
        CHECK_THROWS_AS(backend2.complete(make_request(clh::Stage::Navigator, "x")), clh::Error);
    }

    server.stop();
    server_thread.join();
    unsetenv("CLH_API_KEY");
}
