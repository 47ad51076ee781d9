// hyperscen: command-line front end over the core library.
// Exit codes: 0 success, 1 user error (bad input, bad flags), 2 internal error.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyperscen/allocator.hpp"
#include "hyperscen/board.hpp"
#include "hyperscen/error.hpp"
#include "hyperscen/mlp.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/refinement.hpp"
#include "hyperscen/scenario.hpp"
#include "hyperscen/serialization.hpp"
#include "hyperscen/service.hpp"

namespace fs = std::filesystem;
using namespace hyperscen;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
    if (!out) throw UsageError("write failed for " + path.string());
}

// "-" or empty means stdout.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file(path, text);
    }
}

// SOURCE_DATE_EPOCH keeps generated documents reproducible in builds.
std::string generation_time() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const auto secs = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0' && secs >= 0) {
            const std::time_t t = static_cast<std::time_t>(secs);
            std::tm tm{};
            gmtime_r(&t, &tm);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
            return buf;
        }
    }
    return service::utc_now();
}

WorkloadClass parse_class(const std::string& s) {
    for (auto c : {WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice,
                   WorkloadClass::RtosControl}) {
        if (to_string(c) == s) return c;
    }
    throw UsageError("unknown workload class '" + s + "'");
}

std::vector<objective::VmSpec> load_specs(const std::string& vms_path, const HardwareCapacity& cap) {
    const auto inputs = scenario::vm_inputs_from_json(io::parse_json(read_file(vms_path)));
    const auto quanta = board::default_quanta(cap);
    std::vector<objective::VmSpec> specs;
    for (const auto& in : inputs) specs.push_back(scenario::resolve_vm(in, std::nullopt, cap, quanta));
    return specs;
}

std::optional<alloc::Strategy> parse_baseline(const std::string& s) {
    if (s.empty() || s == "optimized") return std::nullopt;
    if (s == "equal") return alloc::Strategy::EqualSplit;
    if (s == "proportional") return alloc::Strategy::ProportionalSplit;
    throw UsageError("baseline must be equal, proportional or optimized");
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

service::Service* g_service = nullptr;

extern "C" void on_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static resource-allocation planner for hypervisor scenarios"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(scenario::kToolVersion));

    // board
    auto* board_cmd = app.add_subcommand("board", "Board description tools");
    board_cmd->require_subcommand(1);
    auto* board_parse = board_cmd->add_subcommand("parse", "Validate a board XML and print its capacities");
    std::string board_in;
    bool board_xml = false;
    board_parse->add_option("file", board_in, "Board XML")->required();
    board_parse->add_flag("--json", "Print the capacity vector as JSON (default)");
    board_parse->add_flag("--xml", board_xml, "Print the board in canonical XML instead");

    // profile
    auto* profile_cmd = app.add_subcommand("profile", "Trace ingestion and synthesis");
    profile_cmd->require_subcommand(1);
    auto* ingest = profile_cmd->add_subcommand("ingest", "Summarize a trace CSV into a profile vector");
    std::string trace_in, profile_board, profile_out;
    ingest->add_option("--trace", trace_in, "Trace CSV")->required();
    ingest->add_option("--board", profile_board, "Board XML the trace was recorded on")->required();
    ingest->add_option("--out,-o", profile_out, "Output JSON (default stdout)");
    auto* synth = profile_cmd->add_subcommand("synth", "Generate a synthetic trace CSV");
    std::string synth_class = "gaming", synth_out;
    double synth_size = 1.0;
    std::size_t synth_samples = 120;
    std::uint64_t synth_seed = 0;
    synth->add_option("--class", synth_class, "gaming, ai_inference, web_microservice or rtos_control");
    synth->add_option("--size", synth_size, "Memory scale")->check(CLI::PositiveNumber);
    synth->add_option("--samples", synth_samples, "Number of samples")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out,-o", synth_out, "Output CSV (default stdout)");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Build a QoS model from a profile, optionally calibrated");
    std::string fit_profile, fit_board, fit_kind = "throughput", fit_samples, fit_out;
    double fit_anchor = 0.0;
    fit_cmd->add_option("--profile", fit_profile, "Profile JSON")->required();
    fit_cmd->add_option("--board", fit_board, "Board XML")->required();
    fit_cmd->add_option("--kind", fit_kind, "throughput or latency");
    fit_cmd->add_option("--anchor", fit_anchor, "QoS measured at the profiled allocation")->required();
    fit_cmd->add_option("--samples", fit_samples, "JSON array of {r, q} observations to calibrate against");
    fit_cmd->add_option("--out,-o", fit_out, "Output JSON (default stdout)");

    // optimize and baseline
    auto* opt_cmd = app.add_subcommand("optimize", "Search the best static allocation and emit a scenario");
    std::string opt_board, opt_vms, opt_out, opt_baseline;
    bool opt_stats = false;
    std::optional<long> opt_budget;
    std::uint64_t opt_seed = 0;
    opt_cmd->add_option("--board", opt_board, "Board XML")->required();
    opt_cmd->add_option("--vms", opt_vms, "VM definitions (JSON array)")->required();
    opt_cmd->add_option("--out,-o", opt_out, "scenario JSON path (launch.sh is written beside it) or a directory")
        ->required();
    opt_cmd->add_option("--baseline", opt_baseline, "equal or proportional instead of the search");
    opt_cmd->add_flag("--stats", opt_stats, "Print search statistics as JSON on stdout");
    opt_cmd->add_option("--time-budget", opt_budget, "Search time limit in milliseconds")
        ->check(CLI::PositiveNumber);
    opt_cmd->add_option("--seed", opt_seed, "Recorded in the scenario metadata");

    auto* base_cmd = app.add_subcommand("baseline", "Print a baseline split as JSON");
    std::string base_board, base_vms, base_strategy = "proportional", base_out;
    base_cmd->add_option("--board", base_board, "Board XML")->required();
    base_cmd->add_option("--vms", base_vms, "VM definitions (JSON array)")->required();
    base_cmd->add_option("--strategy", base_strategy, "equal or proportional");
    base_cmd->add_option("--out,-o", base_out, "Output JSON (default stdout)");

    // refine-sim
    auto* refine_cmd = app.add_subcommand("refine-sim", "Count refinement trials per start strategy");
    std::uint64_t refine_seed = 1;
    std::size_t refine_scenarios = 20, refine_max = alloc::kDefaultMaxTrials;
    std::string refine_strategies = "all";
    refine_cmd->add_option("--seed", refine_seed, "First scenario seed");
    refine_cmd->add_option("--scenarios", refine_scenarios, "Number of consecutive seeds")
        ->check(CLI::PositiveNumber);
    refine_cmd->add_option("--strategies", refine_strategies, "all or a comma list of equal,proportional,optimized");
    refine_cmd->add_option("--max-trials", refine_max)->check(CLI::PositiveNumber);

    // dataset
    auto* data_cmd = app.add_subcommand("dataset", "Generate a synthetic dataset as JSON lines");
    std::size_t data_n = 100;
    std::uint64_t data_seed = 42;
    std::string data_out, data_oracle_out;
    data_cmd->add_option("--n-per-class", data_n)->check(CLI::PositiveNumber);
    data_cmd->add_option("--seed", data_seed);
    data_cmd->add_option("--out,-o", data_out, "Output JSONL (default stdout)");
    data_cmd->add_option("--oracle-out", data_oracle_out, "Write the hidden oracle parameters as JSON");

    // compare-models
    auto* cmp_cmd = app.add_subcommand("compare-models", "Parametric vs MLP MSE table as CSV");
    std::string cmp_dataset;
    std::size_t cmp_n = 100, cmp_splits = 5;
    std::uint64_t cmp_seed = 42;
    bool cmp_spread = false;
    cmp_cmd->add_option("--dataset", cmp_dataset, "JSONL dataset (default: generate one)");
    cmp_cmd->add_option("--n-per-class", cmp_n, "Records per class when generating")->check(CLI::PositiveNumber);
    cmp_cmd->add_option("--seed", cmp_seed, "Dataset and split seed");
    cmp_cmd->add_option("--splits", cmp_splits)->check(CLI::PositiveNumber);
    cmp_cmd->add_flag("--spread", cmp_spread, "Append standard deviations over splits");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session API");
    std::string serve_host = "127.0.0.1", serve_state;
    std::optional<int> serve_port;
    std::optional<long> serve_budget;
    serve_cmd->add_option("--host", serve_host);
    serve_cmd->add_option("--port", serve_port, "Defaults to $HYPERSCEN_PORT or 8080")->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--state-dir", serve_state, "Persist sessions as JSON snapshots");
    serve_cmd->add_option("--time-budget", serve_budget, "Per-optimize limit in milliseconds")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*board_parse) {
            const auto cap = board::parse_board_config(read_file(board_in));
            std::cout << (board_xml ? board::serialize_board_config(cap) : io::dump(io::to_json(cap)));
        } else if (*ingest) {
            const auto cap = board::parse_board_config(read_file(profile_board));
            const auto trace = profiling::ingest_trace(read_file(trace_in));
            const auto p = profiling::summarize_profile(trace, board::default_quanta(cap), cap.as_allocation());
            emit(profile_out, io::dump(io::to_json(p)));
        } else if (*synth) {
            profiling::SyntheticTraceSpec spec;
            spec.cls = parse_class(synth_class);
            spec.size = synth_size;
            spec.samples = synth_samples;
            spec.seed = synth_seed;
            emit(synth_out, profiling::write_trace_csv(profiling::generate_synthetic_trace(spec)));
        } else if (*fit_cmd) {
            const auto cap = board::parse_board_config(read_file(fit_board));
            const auto p = io::profile_from_json(io::parse_json(read_file(fit_profile)));
            qos::ModelKind kind;
            if (fit_kind == "throughput") {
                kind = qos::ModelKind::Throughput;
            } else if (fit_kind == "latency") {
                kind = qos::ModelKind::Latency;
            } else {
                throw UsageError("--kind must be throughput or latency");
            }
            auto model = profiling::model_from_profile(kind, fit_anchor, p, board::default_quanta(cap));
            if (!fit_samples.empty()) {
                const auto arr = io::parse_json(read_file(fit_samples));
                if (!arr.is_array()) throw UsageError("--samples must hold a JSON array");
                std::vector<qos::AllocationSample> samples;
                for (const auto& s : arr) {
                    if (!s.is_object() || !s.contains("r") || !s.contains("q") || !s["q"].is_number()) {
                        throw UsageError("each sample needs r and a numeric q");
                    }
                    samples.push_back({io::allocation_from_json(s["r"]), s["q"].get<double>()});
                }
                model.renormalize = false;
                model = qos::calibrate_model(model, samples);
            }
            emit(fit_out, io::dump(io::to_json(model)));
        } else if (*opt_cmd) {
            const auto cap = board::parse_board_config(read_file(opt_board));
            auto specs = load_specs(opt_vms, cap);
            scenario::PlanOptions opts;
            opts.baseline = parse_baseline(opt_baseline);
            if (opt_budget) opts.time_budget = std::chrono::milliseconds(*opt_budget);
            opts.seed = opt_seed;
            opts.generated_at = generation_time();
            const auto plan = scenario::plan_scenario(std::move(specs), cap, opts);
            fs::path scenario_path(opt_out);
            if (scenario_path.extension() != ".json") scenario_path /= "scenario.json";
            if (scenario_path.has_parent_path()) fs::create_directories(scenario_path.parent_path());
            const auto launch_path = scenario_path.parent_path() / "launch.sh";
            write_file(scenario_path, scenario::write_scenario(plan.document));
            write_file(launch_path, scenario::emit_launch_script(plan.document));
            fs::permissions(launch_path, fs::perms::owner_exec | fs::perms::group_exec, fs::perm_options::add);
            if (opt_stats) {
                const json stats{{"strategy", plan.document.metadata.strategy},
                                 {"global_score", plan.document.global_score},
                                 {"nodes_visited", plan.result.nodes_visited},
                                 {"nodes_pruned", plan.result.nodes_pruned},
                                 {"truncated", plan.result.truncated}};
                std::cout << io::dump(stats);
            }
        } else if (*base_cmd) {
            const auto cap = board::parse_board_config(read_file(base_board));
            const auto specs = load_specs(base_vms, cap);
            const auto strategy = parse_baseline(base_strategy);
            if (!strategy) throw UsageError("--strategy must be equal or proportional");
            const auto quanta = board::default_quanta(cap);
            const auto allocs = *strategy == alloc::Strategy::EqualSplit ? alloc::equal_split(specs, cap, quanta)
                                                                         : alloc::proportional_split(specs, cap, quanta);
            json out = scenario::whatif(specs, allocs);
            out["strategy"] = std::string(alloc::to_string(*strategy));
            emit(base_out, io::dump(out));
        } else if (*refine_cmd) {
            std::vector<alloc::Strategy> strategies;
            const std::vector<std::pair<std::string, alloc::Strategy>> names{
                {"equal", alloc::Strategy::EqualSplit},
                {"proportional", alloc::Strategy::ProportionalSplit},
                {"optimized", alloc::Strategy::OptimizedSplit}};
            if (refine_strategies == "all") {
                for (const auto& n : names) strategies.push_back(n.second);
            } else {
                std::stringstream ss(refine_strategies);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto it = std::find_if(names.begin(), names.end(),
                                                 [&](const auto& n) { return n.first == item; });
                    if (it == names.end()) throw UsageError("unknown strategy '" + item + "'");
                    strategies.push_back(it->second);
                }
            }
            std::vector<std::vector<double>> trials(strategies.size());
            std::cout << "seed";
            for (auto s : strategies) std::cout << ',' << alloc::to_string(s);
            std::cout << '\n';
            for (std::size_t k = 0; k < refine_scenarios; ++k) {
                const auto seed = refine_seed + k;
                const auto sc = alloc::make_refinement_scenario(seed);
                const auto reports = alloc::compare_strategies(sc, strategies, refine_max);
                std::cout << seed;
                for (std::size_t i = 0; i < reports.size(); ++i) {
                    std::cout << ',' << reports[i].trials << (reports[i].satisfied ? "" : "*");
                    trials[i].push_back(static_cast<double>(reports[i].trials));
                }
                std::cout << '\n';
            }
            std::cout << "median";
            for (const auto& t : trials) std::cout << ',' << median(t);
            std::cout << '\n';
        } else if (*data_cmd) {
            const auto ds = profiling::generate_dataset(data_n, data_seed);
            emit(data_out, io::write_dataset_jsonl(ds.records));
            if (!data_oracle_out.empty()) {
                json o = json::object();
                for (const auto& [id, oracle] : ds.oracles) {
                    json gamma = json::object();
                    for (const auto& [r, g] : oracle.gamma) gamma[std::string(to_string(r))] = g;
                    o[id] = {{"truth", io::to_json(oracle.truth)}, {"gamma", gamma}, {"noise", oracle.noise}};
                }
                write_file(data_oracle_out, io::dump(o));
            }
        } else if (*cmp_cmd) {
            std::vector<profiling::DatasetRecord> records;
            if (cmp_dataset.empty()) {
                records = profiling::generate_dataset(cmp_n, cmp_seed).records;
            } else {
                records = io::read_dataset_jsonl(read_file(cmp_dataset));
            }
            const auto report = learned::compare_models(records, cmp_splits, cmp_seed);
            std::cout << learned::comparison_csv(report, cmp_spread);
        } else if (*serve_cmd) {
            service::ServiceOptions opts;
            if (!serve_state.empty()) {
                fs::create_directories(serve_state);
                opts.state_dir = serve_state;
            }
            if (serve_budget) opts.time_budget = std::chrono::milliseconds(*serve_budget);
            service::Service svc(std::move(opts));
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = serve_port ? *serve_port : service::port_from_env();
            std::fprintf(stderr, "listening on %s:%d\n", serve_host.c_str(), port);
            const bool ok = svc.listen(serve_host, port);
            g_service = nullptr;
            if (!ok) {
                std::fprintf(stderr, "error: cannot bind %s:%d\n", serve_host.c_str(), port);
                return 1;
            }
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
    return 0;
}
