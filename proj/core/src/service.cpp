#include "hyperscen/service.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include <httplib.h>

#include "hyperscen/board.hpp"
#include "hyperscen/error.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/scenario.hpp"
#include "hyperscen/serialization.hpp"

namespace hyperscen::service {

using nlohmann::json;

struct Service::Session {
    std::mutex mutex;
    std::string id;
    std::string created_at;
    std::optional<HardwareCapacity> board;
    std::vector<scenario::VmInput> vms;
    std::map<std::string, profiling::ProfileVector> profiles;
    std::optional<scenario::Plan> plan;
};

struct Service::Server {
    httplib::Server http;
};

namespace {

Response json_response(int status, const json& body) { return {status, "application/json", io::dump(body)}; }

Response error_response(int status, std::string_view code, const std::string& message,
                        std::optional<std::size_t> row = std::nullopt, const std::string& column = {}) {
    json body = {{"error", std::string(code)}, {"message", message}};
    if (row) body["row"] = *row;
    if (!column.empty()) body["column"] = column;
    return json_response(status, body);
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string_view p = path;
    if (const auto q = p.find('?'); q != std::string_view::npos) p = p.substr(0, q);
    while (!p.empty()) {
        if (p.front() == '/') {
            p.remove_prefix(1);
            continue;
        }
        const auto slash = p.find('/');
        parts.emplace_back(p.substr(0, slash));
        p = slash == std::string_view::npos ? std::string_view{} : p.substr(slash);
    }
    return parts;
}

// Error codes that describe bad client input (400); anything else is a 500.
bool is_client_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedXml:
        case ErrorCode::MissingField:
        case ErrorCode::InvalidValue:
        case ErrorCode::MalformedCsv:
        case ErrorCode::NonMonotonicTimestamp:
        case ErrorCode::OutOfRangeValue:
        case ErrorCode::EmptyTrace:
        case ErrorCode::InvalidParams:
        case ErrorCode::InvalidSpec:
        case ErrorCode::LengthMismatch:
        case ErrorCode::ZeroAllocation:
        case ErrorCode::EmptyFeasibleSet:
        case ErrorCode::NoFeasibleAssignment:
        case ErrorCode::ZeroTotalDemand:
            return true;
        default:
            return false;
    }
}

struct Conflict {
    std::string message;
};

std::vector<objective::VmSpec> resolve_all(const Service::Session& s);

}  // namespace

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int port_from_env() {
    const char* v = std::getenv("HYPERSCEN_PORT");
    if (v == nullptr) return 8080;
    int port = 0;
    const std::string_view s(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), port);
    if (ec != std::errc{} || ptr != s.data() + s.size() || port <= 0 || port > 65535) return 8080;
    return port;
}

Service::Service(ServiceOptions options) : options_(std::move(options)), server_(std::make_unique<Server>()) {
    if (!options_.clock) options_.clock = utc_now;
    if (options_.state_dir) {
        std::filesystem::create_directories(*options_.state_dir);
        load_snapshots();
    }
}

Service::~Service() { stop(); }

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
        return dispatch(method, path, body);
    } catch (const Conflict& c) {
        return error_response(409, "Conflict", c.message);
    } catch (const Error& e) {
        return error_response(is_client_error(e.code()) ? 400 : 500, to_string(e.code()), e.what(), e.row(),
                              e.column());
    } catch (const std::exception& e) {
        return error_response(500, "Internal", e.what());
    }
}

namespace {

std::vector<objective::VmSpec> resolve_all(const Service::Session& s) {
    if (!s.board) throw Conflict{"upload a board first"};
    if (s.vms.empty()) throw Conflict{"define at least one VM first"};
    const auto quanta = board::default_quanta(*s.board);
    std::vector<objective::VmSpec> specs;
    for (const auto& vm : s.vms) {
        const auto it = s.profiles.find(vm.id());
        std::optional<profiling::ProfileVector> uploaded;
        if (it != s.profiles.end()) uploaded = it->second;
        if (!vm.spec && !uploaded && !vm.profile) throw Conflict{"no profile for VM " + vm.id()};
        specs.push_back(scenario::resolve_vm(vm, uploaded, *s.board, quanta));
    }
    return specs;
}

}  // namespace

Response Service::dispatch(const std::string& method, const std::string& path, const std::string& body) {
    const auto parts = split_path(path);
    if (method == "OPTIONS") return {204, "text/plain", ""};
    if (parts.size() == 1 && parts[0] == "health" && method == "GET") return json_response(200, {{"status", "ok"}});
    if (parts.empty() || parts[0] != "sessions") return error_response(404, "NotFound", "no such endpoint");

    if (parts.size() == 1) {
        if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST /sessions");
        auto s = std::make_shared<Session>();
        s->created_at = options_.clock();
        {
            std::lock_guard lock(sessions_mutex_);
            while (sessions_.contains("s" + std::to_string(next_id_))) ++next_id_;
            s->id = "s" + std::to_string(next_id_++);
            sessions_.emplace(s->id, s);
        }
        snapshot(*s);
        return json_response(201, {{"session_id", s->id}, {"created_at", s->created_at}});
    }

    const auto session = find(parts[1]);
    if (!session) return error_response(404, "NotFound", "unknown session " + parts[1]);
    std::lock_guard lock(session->mutex);
    auto& s = *session;
    const std::string resource = parts.size() > 2 ? parts[2] : "";

    if (parts.size() == 2 && method == "GET") {
        json vms = json::array();
        for (const auto& vm : s.vms) vms.push_back(vm.id());
        json profiles = json::array();
        for (const auto& [id, p] : s.profiles) profiles.push_back(id);
        return json_response(200, {{"session_id", s.id},
                                   {"created_at", s.created_at},
                                   {"board", s.board ? io::to_json(*s.board) : json(nullptr)},
                                   {"vms", vms},
                                   {"profiles", profiles},
                                   {"has_scenario", s.plan.has_value()}});
    }
    if (parts.size() == 3 && resource == "board" && method == "PUT") {
        s.board = board::parse_board_config(body);
        s.plan.reset();
        snapshot(s);
        return json_response(200, io::to_json(*s.board));
    }
    if (parts.size() == 3 && resource == "vms" && method == "PUT") {
        s.vms = scenario::vm_inputs_from_json(io::parse_json(body));
        s.plan.reset();
        snapshot(s);
        json ids = json::array();
        for (const auto& vm : s.vms) ids.push_back(vm.id());
        return json_response(200, {{"vms", ids}});
    }
    if (parts.size() == 4 && resource == "profiles" && method == "POST") {
        const auto& vm_id = parts[3];
        if (!s.board) throw Conflict{"upload a board first; profiles are relative to its capacity"};
        const bool known = std::any_of(s.vms.begin(), s.vms.end(), [&](const auto& v) { return v.id() == vm_id; });
        if (!known) return error_response(404, "NotFound", "unknown VM " + vm_id);
        const auto trace = profiling::ingest_trace(body);
        auto profile = profiling::summarize_profile(trace, board::default_quanta(*s.board), s.board->as_allocation());
        s.profiles[vm_id] = profile;
        s.plan.reset();
        snapshot(s);
        return json_response(200, io::to_json(profile));
    }
    if (parts.size() == 3 && resource == "optimize" && method == "POST") {
        auto specs = resolve_all(s);
        scenario::PlanOptions opts;
        opts.generated_at = s.created_at;
        opts.time_budget = options_.time_budget;
        if (!body.empty()) {
            const auto req = io::parse_json(body);
            if (req.contains("baseline")) {
                const auto b = req.at("baseline").get<std::string>();
                if (b == "equal") {
                    opts.baseline = alloc::Strategy::EqualSplit;
                } else if (b == "proportional") {
                    opts.baseline = alloc::Strategy::ProportionalSplit;
                } else if (b != "optimized") {
                    return error_response(400, "InvalidValue", "baseline must be equal, proportional or optimized");
                }
            }
            if (req.contains("seed")) opts.seed = req.at("seed").get<std::uint64_t>();
            if (req.contains("time_budget_ms")) {
                opts.time_budget = std::chrono::milliseconds(req.at("time_budget_ms").get<std::int64_t>());
            }
        }
        s.plan = scenario::plan_scenario(std::move(specs), *s.board, opts);
        return {200, "application/json", scenario::write_scenario(s.plan->document)};
    }
    if (parts.size() == 3 && resource == "whatif" && method == "POST") {
        const auto specs = resolve_all(s);
        auto req = io::parse_json(body);
        const json& list = req.is_object() && req.contains("allocations") ? req.at("allocations") : req;
        if (!list.is_array()) return error_response(400, "InvalidValue", "expected a list of allocations");
        std::vector<Allocation> allocs;
        for (const auto& a : list) allocs.push_back(io::allocation_from_json(a));
        auto out = scenario::whatif(specs, allocs);
        out["within_capacity"] = alloc::within_capacity(allocs, *s.board);
        return json_response(200, out);
    }
    if (parts.size() == 3 && resource == "scenario" && method == "GET") {
        if (!s.plan) throw Conflict{"no scenario yet; call optimize first"};
        return {200, "application/json", scenario::write_scenario(s.plan->document)};
    }
    if (parts.size() == 3 && resource == "launch-script" && method == "GET") {
        if (!s.plan) throw Conflict{"no scenario yet; call optimize first"};
        return {200, "text/x-shellscript", scenario::emit_launch_script(s.plan->document)};
    }
    return error_response(404, "NotFound", "no such endpoint");
}

// ---------------------------------------------------------------------------
// persistence

void Service::snapshot(const Session& s) const {
    if (!options_.state_dir) return;
    json vms = json::array();
    for (const auto& vm : s.vms) vms.push_back(scenario::to_json(vm));
    json profiles = json::object();
    for (const auto& [id, p] : s.profiles) profiles[id] = io::to_json(p);
    const json doc = {{"session_id", s.id},
                      {"created_at", s.created_at},
                      {"board", s.board ? io::to_json(*s.board) : json(nullptr)},
                      {"vms", vms},
                      {"profiles", profiles}};
    const auto path = *options_.state_dir / (s.id + ".json");
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << io::dump(doc);
    }
    std::filesystem::rename(tmp, path);
}

void Service::load_snapshots() {
    for (const auto& entry : std::filesystem::directory_iterator(*options_.state_dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto doc = io::parse_json(buf.str());
        auto s = std::make_shared<Session>();
        s->id = doc.at("session_id").get<std::string>();
        s->created_at = doc.at("created_at").get<std::string>();
        if (!doc.at("board").is_null()) s->board = io::capacity_from_json(doc.at("board"));
        s->vms = scenario::vm_inputs_from_json(doc.at("vms"));
        for (const auto& [id, p] : doc.at("profiles").items()) s->profiles.emplace(id, io::profile_from_json(p));
        sessions_.emplace(s->id, std::move(s));
    }
}

// ---------------------------------------------------------------------------
// HTTP transport

void Service::install_routes() {
    auto& http = server_->http;
    const auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    http.Get(".*", route);
    http.Post(".*", route);
    http.Put(".*", route);
    http.Options(".*", route);
    http.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
}

bool Service::listen(const std::string& host, int port) { return bind(host, port) >= 0 && listen_after_bind(); }

int Service::bind(const std::string& host, int port) {
    install_routes();
    if (port == 0) return server_->http.bind_to_any_port(host);
    return server_->http.bind_to_port(host, port) ? port : -1;
}

bool Service::listen_after_bind() { return server_->http.listen_after_bind(); }

void Service::stop() { server_->http.stop(); }

bool Service::running() const { return server_->http.is_running(); }

}  // namespace hyperscen::service
