#include <doctest.h>

#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "bcih/errors.hpp"
#include "bcih/server.hpp"
#include "fixtures.hpp"

using namespace bcih;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

std::shared_ptr<const SessionResources> short_trials() {
    const auto& w = fixture::world();
    auto r = std::make_shared<SessionResources>();
    r->scene = w.scene;
    r->model = w.model;
    r->subject = w.profile.subject;
    r->operator_config = w.profile.operator_config;
    r->guide = w.config.guide;
    r->timeout = 3.0;
    return r;
}

struct Running {
    SessionServer server;
    std::thread thread;

    Running(ServerConfig cfg) : server(cfg, short_trials()) {
        server.start();
        thread = std::thread([this] { server.run(); });
    }
    ~Running() {
        server.stop();
        thread.join();
    }
};

http::response<http::string_body> get(unsigned short port, const std::string& target) {
    boost::asio::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    return res;
}

struct WsClient {
    boost::asio::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    explicit WsClient(unsigned short port) {
        tcp::resolver resolver(ioc);
        boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", "/session");
        ws.text(true);
    }
    void send(const json& j) { ws.write(boost::asio::buffer(j.dump())); }
    json receive() {
        beast::flat_buffer buf;
        ws.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }
};

}  // namespace

TEST_CASE("HTTP endpoints") {
    ServerConfig cfg;
    cfg.port = 0;
    Running live(cfg);
    const auto port = live.server.port();
    CHECK(port != 0);

    const auto scene = get(port, "/scene/default");
    CHECK(scene.result() == http::status::ok);
    CHECK(scene[http::field::content_type] == "application/json");
    const auto geometry = json::parse(scene.body());
    CHECK(geometry["walls"].size() == fixture::world().scene->walls.size());
    CHECK(scene_hash(scene_from_json(geometry)) == scene_hash(*fixture::world().scene));

    CHECK(get(port, "/health").result() == http::status::ok);
    CHECK(get(port, "/nowhere").result() == http::status::not_found);
}

TEST_CASE("binding an occupied port is an I/O error") {
    ServerConfig cfg;
    cfg.port = 0;
    Running live(cfg);
    ServerConfig clash;
    clash.port = live.server.port();
    SessionServer second(clash, short_trials());
    CHECK_THROWS_AS(second.start(), IoError);
}

TEST_CASE("WebSocket session: hello, start, cursor through trial_end") {
    ServerConfig cfg;
    cfg.port = 0;
    cfg.max_sessions = 1;
    Running live(cfg);
    WsClient client(live.server.port());

    client.send({{"type", "bogus"}});
    auto m = client.receive();
    CHECK(m["type"] == "error");
    CHECK(m["code"] == "unknown_type");
    client.ws.write(boost::asio::buffer(std::string("{not json")));
    CHECK(client.receive()["code"] == "bad_json");

    client.send({{"type", "hello"}, {"condition", "ALL_A"}, {"mode", "interactive"}});
    m = client.receive();
    REQUIRE(m["type"] == "scene");
    CHECK(m["geometry"].contains("walls"));
    CHECK(live.server.active_sessions() == 1);

    // A second client is turned away while the first holds the only slot.
    {
        boost::asio::io_context ioc;
        websocket::stream<tcp::socket> other(ioc);
        tcp::resolver resolver(ioc);
        boost::asio::connect(other.next_layer(), resolver.resolve("127.0.0.1", std::to_string(live.server.port())));
        CHECK_THROWS(other.handshake("127.0.0.1", "/session"));
    }

    client.send({{"type", "start"}});
    const auto& scene = *fixture::world().scene;
    int states = 0;
    double last_t = -1.0;
    std::optional<json> end;
    Vec2 cursor = scene.start;
    while (!end) {
        m = client.receive();
        if (m["type"] == "state") {
            ++states;
            CHECK(m["guide_active"] == true);
            CHECK(m["t"].get<double>() >= last_t);
            last_t = m["t"].get<double>();
            cursor = {m["cursor"]["x"].get<double>(), m["cursor"]["y"].get<double>()};
            const Vec2 target = scene.point_at(scene.project(cursor) + 40.0);
            client.send({{"type", "cursor"}, {"x", target.x}, {"y", target.y}, {"t", last_t}});
        } else if (m["type"] == "trial_end") {
            end = m;
        } else {
            FAIL("unexpected message " << m.dump());
        }
    }
    CHECK(states >= 60);  // ~30 Hz over a 3 s trial
    CHECK((*end)["metrics"]["outcome"] == "timeout");
    CHECK((*end)["metrics"]["activation"].get<double>() == 1.0);
    CHECK(distance(cursor, scene.start) > 100.0);  // the pointer actually steered the cursor
    client.ws.close(websocket::close_code::normal);
}
