#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace hyperscen::service {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceOptions {
    /// When set, every session mutation is snapshotted to <dir>/<id>.json and
    /// existing snapshots are loaded at construction.
    std::optional<std::filesystem::path> state_dir;
    /// Timestamp source for new sessions (ISO-8601 UTC by default). A
    /// session's scenario documents carry its creation time, so repeated
    /// optimize calls are byte-identical.
    std::function<std::string()> clock;
    /// Upper bound on each optimize call; the incumbent is returned with
    /// metadata.truncated = true when it is hit.
    std::optional<std::chrono::milliseconds> time_budget;
    std::string cors_origin = "*";
};

/// Session-scoped HTTP adapter over the library. handle() is the whole API
/// and is what the HTTP server calls; tests call it directly.
class Service {
public:
    explicit Service(ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Response handle(const std::string& method, const std::string& path, const std::string& body);

    /// Serve on host:port until stop() is called. Returns false if binding fails.
    bool listen(const std::string& host, int port);
    /// Two-step form of listen(): bind returns the bound port (any free one
    /// for port 0) or -1, then listen_after_bind serves until stop().
    int bind(const std::string& host, int port);
    bool listen_after_bind();
    void stop();
    /// True while listen() is accepting connections.
    bool running() const;

    struct Session;

private:
    struct Server;

    std::shared_ptr<Session> find(const std::string& id);
    void install_routes();
    Response dispatch(const std::string& method, const std::string& path, const std::string& body);
    void snapshot(const Session& s) const;
    void load_snapshots();

    ServiceOptions options_;
    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
    std::unique_ptr<Server> server_;
};

/// HYPERSCEN_PORT if set and valid, else 8080.
int port_from_env();

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_now();

}  // namespace hyperscen::service
