#include "hyperscen/scenario.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "hyperscen/error.hpp"
#include "hyperscen/serialization.hpp"

namespace hyperscen::scenario {

using nlohmann::json;

double round6(double v) noexcept {
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;  // no "-0.0" in the canonical form
}

ScenarioDocument make_scenario(std::span<const objective::VmSpec> specs, const HardwareCapacity& cap,
                               std::span<const Allocation> allocations, Metadata metadata) {
    if (specs.size() != allocations.size()) {
        throw Error(ErrorCode::LengthMismatch, "one allocation per VM is required");
    }
    if (specs.empty()) throw Error(ErrorCode::InvalidSpec, "a scenario needs at least one VM");
    ScenarioDocument doc;
    doc.board = cap;
    doc.metadata = std::move(metadata);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        VmEntry e;
        e.vm_id = spec.vm_id;
        e.workload_class = spec.workload_class;
        e.allocation = allocations[i];
        for (const auto& [name, q] : objective::predicted_qos(spec, allocations[i])) {
            e.predicted_qos.emplace(name, q ? std::optional(round6(*q)) : std::nullopt);
        }
        e.perf_score = round6(objective::vm_perf_score(spec, allocations[i]));
        e.util_score = round6(objective::vm_util_score(spec, allocations[i]));
        e.opt_score = round6(objective::vm_opt_score(spec, allocations[i]));
        doc.vms.push_back(std::move(e));
    }
    doc.global_score = round6(objective::global_score(specs, allocations));
    return doc;
}

json to_json(const ScenarioDocument& doc) {
    json vms = json::array();
    for (const auto& vm : doc.vms) {
        json q = json::object();
        for (const auto& [name, v] : vm.predicted_qos) q[name] = v ? json(*v) : json(nullptr);
        vms.push_back({{"vm_id", vm.vm_id},
                       {"workload_class", std::string(to_string(vm.workload_class))},
                       {"allocation", io::to_json(vm.allocation)},
                       {"predicted_qos", q},
                       {"scores", {{"perf", vm.perf_score}, {"util", vm.util_score}, {"opt", vm.opt_score}}}});
    }
    const auto& m = doc.metadata;
    return {{"board", io::to_json(doc.board)},
            {"vms", vms},
            {"global_score", doc.global_score},
            {"metadata",
             {{"tool_version", m.tool_version},
              {"seed", m.seed},
              {"generated_at", m.generated_at},
              {"strategy", m.strategy},
              {"search", {{"nodes_visited", m.nodes_visited}, {"nodes_pruned", m.nodes_pruned}}},
              {"truncated", m.truncated}}}};
}

ScenarioDocument scenario_from_json(const json& j) {
    try {
        ScenarioDocument doc;
        doc.board = io::capacity_from_json(j.at("board"));
        for (const auto& v : j.at("vms")) {
            VmEntry e;
            e.vm_id = v.at("vm_id").get<std::string>();
            const auto cls = workload_class_from_string(v.at("workload_class").get<std::string>());
            if (!cls) throw Error(ErrorCode::InvalidValue, "unknown workload class", std::nullopt, "workload_class");
            e.workload_class = *cls;
            e.allocation = io::allocation_from_json(v.at("allocation"));
            for (const auto& [name, q] : v.at("predicted_qos").items()) {
                e.predicted_qos.emplace(name, q.is_null() ? std::nullopt : std::optional(q.get<double>()));
            }
            const auto& s = v.at("scores");
            e.perf_score = s.at("perf").get<double>();
            e.util_score = s.at("util").get<double>();
            e.opt_score = s.at("opt").get<double>();
            doc.vms.push_back(std::move(e));
        }
        if (doc.vms.empty()) throw Error(ErrorCode::InvalidValue, "scenario has no VMs", std::nullopt, "vms");
        doc.global_score = j.at("global_score").get<double>();
        const auto& m = j.at("metadata");
        doc.metadata.tool_version = m.at("tool_version").get<std::string>();
        doc.metadata.seed = m.at("seed").get<std::uint64_t>();
        doc.metadata.generated_at = m.at("generated_at").get<std::string>();
        doc.metadata.strategy = m.at("strategy").get<std::string>();
        doc.metadata.nodes_visited = m.at("search").at("nodes_visited").get<std::uint64_t>();
        doc.metadata.nodes_pruned = m.at("search").at("nodes_pruned").get<std::uint64_t>();
        doc.metadata.truncated = m.at("truncated").get<bool>();
        return doc;
    } catch (const json::out_of_range& e) {
        throw Error(ErrorCode::MissingField, std::string("scenario: ") + e.what());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidValue, std::string("scenario: ") + e.what());
    }
}

std::string write_scenario(const ScenarioDocument& doc) { return io::dump(to_json(doc)); }

ScenarioDocument read_scenario(std::string_view text) { return scenario_from_json(io::parse_json(text)); }

// ---------------------------------------------------------------------------
// launch script

namespace {

// VM ids are written single-quoted; embedded quotes use the '\'' idiom.
std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

std::string shell_unquote(std::string_view s) {
    std::string out;
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\'') {
            quoted = !quoted;
        } else if (c == '\\' && !quoted && i + 1 < s.size()) {
            out += s[++i];
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string emit_launch_script(const ScenarioDocument& doc) {
    const auto& b = doc.board;
    std::string out;
    out += "#!/bin/sh\n";
    out += "# Static allocation for " + std::to_string(doc.vms.size()) + " VM(s), generated by hyperscen " +
           doc.metadata.tool_version + ".\n";
    out += "# Board: " + std::to_string(b.p_cores) + " P-cores, " + std::to_string(b.e_cores) + " E-cores, " +
           std::to_string(b.memory_mib) + " MiB, " + std::to_string(b.gpu_slices) + " GPU slices.\n";
    out += "# The launch lines only echo the grant; swap in the hypervisor's own launcher.\n";
    out += "set -eu\n";
    out += "GPU_SLICE_PERCENT=" + std::to_string(b.gpu_slice_percent) + "\n";
    for (std::size_t i = 0; i < doc.vms.size(); ++i) {
        const auto& vm = doc.vms[i];
        const auto& a = vm.allocation;
        out += "\n# vm " + std::to_string(i + 1) + ": " + std::string(to_string(vm.workload_class)) + "\n";
        out += "VM_ID=" + shell_quote(vm.vm_id) + "\n";
        out += "CPUS_P=" + std::to_string(a.c_p) + " CPUS_E=" + std::to_string(a.c_e) +
               " MEM_MIB=" + std::to_string(a.mem_mib) + " GPU_SLICES=" + std::to_string(a.gpu_slices) + "\n";
        out += "echo \"launch $VM_ID: cpus_p=$CPUS_P cpus_e=$CPUS_E mem_mib=$MEM_MIB "
               "gpu=$GPU_SLICES x $GPU_SLICE_PERCENT%\"\n";
    }
    return out;
}

std::vector<LaunchEntry> parse_launch_script(std::string_view text) {
    std::vector<LaunchEntry> out;
    std::optional<std::string> pending;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.starts_with("VM_ID=")) {
            pending = shell_unquote(line.substr(6));
            continue;
        }
        if (!line.starts_with("CPUS_P=")) continue;
        if (!pending) throw Error(ErrorCode::InvalidValue, "allocation line without a VM_ID", line_no);
        Allocation a;
        const std::pair<std::string_view, std::int64_t*> fields[] = {
            {"CPUS_P=", &a.c_p}, {"CPUS_E=", &a.c_e}, {"MEM_MIB=", &a.mem_mib}, {"GPU_SLICES=", &a.gpu_slices}};
        std::string_view rest = line;
        for (const auto& [key, dst] : fields) {
            if (!rest.starts_with(key)) throw Error(ErrorCode::InvalidValue, "expected " + std::string(key), line_no);
            rest.remove_prefix(key.size());
            const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), *dst);
            if (ec != std::errc{}) throw Error(ErrorCode::InvalidValue, "bad number after " + std::string(key), line_no);
            rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()));
            if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        }
        out.push_back({std::move(*pending), a});
        pending.reset();
    }
    return out;
}

// ---------------------------------------------------------------------------
// VM inputs

VmInput vm_input_from_json(const json& j) {
    VmInput in;
    if (j.is_object() && j.contains("qos_models")) {
        in.spec = io::vm_spec_from_json(j);
        in.vm_id = in.spec->vm_id;
        in.workload_class = in.spec->workload_class;
        return in;
    }
    try {
        in.vm_id = j.at("vm_id").get<std::string>();
        const auto cls = workload_class_from_string(j.at("workload_class").get<std::string>());
        if (!cls) throw Error(ErrorCode::InvalidValue, "unknown workload class", std::nullopt, "workload_class");
        in.workload_class = *cls;
        in.anchors = j.at("anchors").get<std::map<std::string, double>>();
        if (j.contains("lambda_util")) in.lambda_util = j.at("lambda_util").get<double>();
        if (j.contains("profile")) in.profile = io::profile_from_json(j.at("profile"));
    } catch (const json::out_of_range& e) {
        throw Error(ErrorCode::MissingField, std::string("vm definition: ") + e.what());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidValue, std::string("vm definition: ") + e.what());
    }
    if (in.vm_id.empty()) throw Error(ErrorCode::InvalidSpec, "empty vm_id");
    if (in.anchors.empty()) throw Error(ErrorCode::InvalidSpec, in.vm_id + ": anchors must name at least one metric");
    for (const auto& [name, v] : in.anchors) {
        if (!(v > 0)) throw Error(ErrorCode::InvalidSpec, in.vm_id + ": anchor for " + name + " must be positive");
    }
    if (in.lambda_util < 0.0 || in.lambda_util > 1.0) {
        throw Error(ErrorCode::InvalidSpec, in.vm_id + ": lambda_util outside [0,1]");
    }
    return in;
}

json to_json(const VmInput& in) {
    if (in.spec) return io::to_json(*in.spec);
    json j = {{"vm_id", in.vm_id},
              {"workload_class", std::string(to_string(in.workload_class))},
              {"anchors", in.anchors},
              {"lambda_util", in.lambda_util}};
    if (in.profile) j["profile"] = io::to_json(*in.profile);
    return j;
}

std::vector<VmInput> vm_inputs_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::InvalidValue, "expected a JSON array of VMs");
    std::vector<VmInput> out;
    std::set<std::string> seen;
    for (const auto& v : j) {
        out.push_back(vm_input_from_json(v));
        if (!seen.insert(out.back().id()).second) {
            throw Error(ErrorCode::InvalidSpec, "duplicate vm_id " + out.back().id());
        }
    }
    return out;
}

objective::VmSpec resolve_vm(const VmInput& in, const std::optional<profiling::ProfileVector>& uploaded,
                             const HardwareCapacity& cap, const board::QuantumSet& quanta) {
    if (in.spec) return *in.spec;
    const auto& profile = uploaded ? uploaded : in.profile;
    if (!profile) throw Error(ErrorCode::InvalidSpec, in.vm_id + ": no profile uploaded");
    return objective::make_vm_spec(in.vm_id, in.workload_class, *profile, in.anchors, cap, quanta, in.lambda_util);
}

Plan plan_scenario(std::vector<objective::VmSpec> specs, const HardwareCapacity& cap, const PlanOptions& options) {
    if (specs.empty()) throw Error(ErrorCode::InvalidSpec, "a scenario needs at least one VM");
    for (const auto& s : specs) s.validate();
    const auto quanta = board::default_quanta(cap);
    Plan plan;
    plan.specs = std::move(specs);
    Metadata meta;
    meta.seed = options.seed;
    meta.generated_at = options.generated_at;
    if (options.baseline && *options.baseline != alloc::Strategy::OptimizedSplit) {
        plan.result.allocations = *options.baseline == alloc::Strategy::EqualSplit
                                      ? alloc::equal_split(plan.specs, cap, quanta)
                                      : alloc::proportional_split(plan.specs, cap, quanta);
        plan.result.best_score = objective::global_score(plan.specs, plan.result.allocations);
        meta.strategy = std::string(alloc::to_string(*options.baseline));
    } else {
        std::vector<alloc::CandidateSet> sets;
        for (const auto& s : plan.specs) sets.push_back(alloc::generate_candidates(s, cap, quanta));
        alloc::SearchOptions so;
        so.time_budget = options.time_budget;
        plan.result = alloc::backtrack_allocate(plan.specs, cap, sets, so);
        meta.strategy = "optimized";
    }
    meta.nodes_visited = plan.result.nodes_visited;
    meta.nodes_pruned = plan.result.nodes_pruned;
    meta.truncated = plan.result.truncated;
    plan.document = make_scenario(plan.specs, cap, plan.result.allocations, std::move(meta));
    return plan;
}

json whatif(std::span<const objective::VmSpec> specs, std::span<const Allocation> allocations) {
    if (specs.size() != allocations.size()) {
        throw Error(ErrorCode::LengthMismatch, "one candidate allocation per VM is required");
    }
    json vms = json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        json q = json::object();
        for (const auto& [name, v] : objective::predicted_qos(specs[i], allocations[i])) {
            q[name] = v ? json(round6(*v)) : json(nullptr);
        }
        vms.push_back({{"vm_id", specs[i].vm_id},
                       {"allocation", io::to_json(allocations[i])},
                       {"predicted_qos", q},
                       {"scores",
                        {{"perf", round6(objective::vm_perf_score(specs[i], allocations[i]))},
                         {"util", round6(objective::vm_util_score(specs[i], allocations[i]))},
                         {"opt", round6(objective::vm_opt_score(specs[i], allocations[i]))}}}});
    }
    return {{"vms", vms}, {"global_score", round6(objective::global_score(specs, allocations))}};
}

}  // namespace hyperscen::scenario
