#include "bcih/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include "bcih/errors.hpp"

namespace bcih {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

double wall_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto origin = clock::now();
    return std::chrono::duration<double>(clock::now() - origin).count();
}

constexpr auto kTickPeriod = std::chrono::milliseconds(5);

}  // namespace

struct SessionServer::Impl : std::enable_shared_from_this<SessionServer::Impl> {
    ServerConfig config;
    std::shared_ptr<const SessionResources> resources;
    std::string scene_json;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::atomic<std::size_t> active{0};
    std::atomic<std::uint64_t> next_id{1};

    void accept();
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, std::shared_ptr<SessionServer::Impl> server)
        : ws_(std::move(socket)),
          timer_(ws_.get_executor()),
          server_(std::move(server)),
          session_(server_->resources, server_->config, server_->next_id++) {
        ++server_->active;
    }
    ~WsSession() { --server_->active; }

    void run(http::request<http::string_body> req) {
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->read();
            self->schedule();
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->timer_.cancel();
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            for (auto& m : self->session_.handle(text, wall_seconds())) self->send(m.dump());
            self->read();
        });
    }

    void schedule() {
        timer_.expires_after(kTickPeriod);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (ec || self->closed_) return;
            try {
                for (auto& m : self->session_.advance(wall_seconds())) self->send(m.dump());
            } catch (const std::exception& e) {
                self->send(InteractiveSession::error_message("simulation", e.what()).dump());
            }
            self->schedule();
        });
    }

    void send(std::string text) {
        queue_.push_back(std::move(text));
        if (queue_.size() == 1) write();
    }

    void write() {
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
        });
    }

    websocket::stream<tcp::socket> ws_;
    asio::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    std::shared_ptr<SessionServer::Impl> server_;
    InteractiveSession session_;
    bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, std::shared_ptr<SessionServer::Impl> server)
        : stream_(std::move(socket)), server_(std::move(server)) {}

    void run() {
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (!ec) self->dispatch();
        });
    }

private:
    void dispatch() {
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_)) {
            if (target != "/session") return reply(http::status::not_found, "text/plain", "unknown endpoint\n");
            if (server_->active.load() >= static_cast<std::size_t>(server_->config.max_sessions))
                return reply(http::status::service_unavailable, "text/plain", "session limit reached\n");
            std::make_shared<WsSession>(stream_.release_socket(), server_)->run(std::move(req_));
            return;
        }
        if (req_.method() != http::verb::get) return reply(http::status::method_not_allowed, "text/plain", "GET only\n");
        if (target == "/scene/default") return reply(http::status::ok, "application/json", server_->scene_json);
        if (target == "/health") return reply(http::status::ok, "application/json", R"({"status":"ok"})");
        reply(http::status::not_found, "text/plain", "unknown endpoint\n");
    }

    void reply(http::status status, const char* content_type, std::string body) {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::content_type, content_type);
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(false);
        res->body() = std::move(body);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    std::shared_ptr<SessionServer::Impl> server_;
};

}  // namespace

void SessionServer::Impl::accept() {
    acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
        if (ec == asio::error::operation_aborted) return;
        if (!ec) std::make_shared<HttpSession>(std::move(socket), self)->run();
        self->accept();
    });
}

SessionServer::SessionServer(ServerConfig config, std::shared_ptr<const SessionResources> resources)
    : impl_(std::make_shared<Impl>()) {
    config.validate();
    if (!resources || !resources->scene || !resources->model) throw UsageError("server requires session resources");
    impl_->config = std::move(config);
    impl_->resources = std::move(resources);
    impl_->scene_json = to_json(*impl_->resources->scene).dump();
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start() {
    beast::error_code ec;
    const auto address = asio::ip::make_address(impl_->config.bind_address, ec);
    if (ec) throw IoError(fmt::format("bad bind address '{}': {}", impl_->config.bind_address, ec.message()));
    const tcp::endpoint ep{address, impl_->config.port};
    auto& acc = impl_->acceptor;
    acc.open(ep.protocol(), ec);
    if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(ep, ec);
    if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw IoError(fmt::format("cannot listen on {}:{}: {}", impl_->config.bind_address, impl_->config.port, ec.message()));
    impl_->accept();
}

unsigned short SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::run() { impl_->io.run(); }

void SessionServer::stop() {
    asio::post(impl_->io, [impl = impl_] {
        beast::error_code ignored;
        impl->acceptor.close(ignored);
    });
    impl_->io.stop();
}

std::size_t SessionServer::active_sessions() const { return impl_->active.load(); }

}  // namespace bcih
