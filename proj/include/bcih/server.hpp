#pragma once

#include <cstddef>
#include <memory>

#include "bcih/session.hpp"

namespace bcih {

/// HTTP + WebSocket front end. `/session` upgrades to a WebSocket carrying
/// JSON text frames for one InteractiveSession; GET `/scene/default`
/// returns the scene JSON. All sessions run on one I/O thread, which
/// serializes each session's input handling against its simulation steps.
class SessionServer {
public:
    SessionServer(ServerConfig config, std::shared_ptr<const SessionResources> resources);
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and listens. Throws IoError when the address or port is unavailable.
    void start();
    /// Port actually bound (useful with port 0).
    unsigned short port() const;
    /// Serves until stop() is called.
    void run();
    /// Thread-safe.
    void stop();
    std::size_t active_sessions() const;

    struct Impl;  // defined in server.cpp

private:
    std::shared_ptr<Impl> impl_;
};

}  // namespace bcih
