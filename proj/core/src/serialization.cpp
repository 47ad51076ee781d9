#include "hyperscen/serialization.hpp"

#include "hyperscen/error.hpp"

namespace hyperscen::io {

namespace {

const json& member(const json& j, std::string_view key) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidValue, "expected a JSON object", std::nullopt, std::string(key));
    const auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorCode::MissingField, "missing field '" + std::string(key) + "'", std::nullopt, std::string(key));
    return *it;
}

template <class T>
T get(const json& j, std::string_view key) {
    const auto& v = member(j, key);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidValue, "field '" + std::string(key) + "' has the wrong type", std::nullopt,
                    std::string(key));
    }
}

template <class T>
T get_or(const json& j, std::string_view key, T fallback) {
    return j.is_object() && j.contains(key) ? get<T>(j, key) : fallback;
}

std::int64_t get_count(const json& j, std::string_view key) {
    const auto& v = member(j, key);
    if (!v.is_number_integer()) {
        throw Error(ErrorCode::InvalidValue, "field '" + std::string(key) + "' must be an integer", std::nullopt,
                    std::string(key));
    }
    return v.get<std::int64_t>();
}

Resource resource_key(const std::string& name) {
    const auto r = resource_from_string(name);
    if (!r) throw Error(ErrorCode::InvalidValue, "unknown resource '" + name + "'", std::nullopt, name);
    return *r;
}

json per_resource(const std::array<double, kResourceCount>& v) {
    json out = json::object();
    for (auto r : kAllResources) out[std::string(to_string(r))] = v[index_of(r)];
    return out;
}

std::array<double, kResourceCount> per_resource_from(const json& j) {
    std::array<double, kResourceCount> out{};
    if (!j.is_object()) throw Error(ErrorCode::InvalidValue, "expected an object keyed by resource");
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw Error(ErrorCode::InvalidValue, "resource value must be a number", std::nullopt, k);
        out[index_of(resource_key(k))] = v.get<double>();
    }
    return out;
}

}  // namespace

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidValue, std::string("invalid JSON: ") + e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

json to_json(const Allocation& a) {
    return {{"c_p", a.c_p}, {"c_e", a.c_e}, {"m", a.mem_mib}, {"g", a.gpu_slices}};
}

Allocation allocation_from_json(const json& j) {
    Allocation a{get_count(j, "c_p"), get_count(j, "c_e"), get_count(j, "m"), get_count(j, "g")};
    for (auto r : kAllResources) {
        if (a[r] < 0) throw Error(ErrorCode::InvalidValue, "allocation amounts must be >= 0");
    }
    return a;
}

json to_json(const HardwareCapacity& cap) {
    return {{"p_cores", cap.p_cores},         {"e_cores", cap.e_cores},
            {"memory_mib", cap.memory_mib},   {"gpu_slices", cap.gpu_slices},
            {"gpu_slice_percent", cap.gpu_slice_percent}, {"gpu_mem_mib", cap.gpu_mem_mib}};
}

HardwareCapacity capacity_from_json(const json& j) {
    HardwareCapacity cap;
    cap.p_cores = get_count(j, "p_cores");
    cap.e_cores = get_count(j, "e_cores");
    cap.memory_mib = get_count(j, "memory_mib");
    cap.gpu_slices = j.contains("gpu_slices") ? get_count(j, "gpu_slices") : 0;
    cap.gpu_slice_percent = j.contains("gpu_slice_percent") ? get_count(j, "gpu_slice_percent") : 10;
    cap.gpu_mem_mib = j.contains("gpu_mem_mib") ? get_count(j, "gpu_mem_mib") : 0;
    board::validate(cap);
    return cap;
}

json to_json(const profiling::ProfileVector& p) {
    return {
        {"cpu_p", {{"max_pct", p.cpu_p.max_pct}, {"median_pct", p.cpu_p.median_pct}}},
        {"cpu_e", {{"max_pct", p.cpu_e.max_pct}, {"median_pct", p.cpu_e.median_pct}}},
        {"mem", {{"peak_rss_mib", p.mem.peak_rss_mib}, {"wss_mib", p.mem.wss_mib}, {"swap_seen", p.mem.swap_seen}}},
        {"gpu",
         {{"max_busy_pct", p.gpu.max_busy_pct},
          {"median_busy_pct", p.gpu.median_busy_pct},
          {"peak_mem_mib", p.gpu.peak_mem_mib}}},
        {"baseline", to_json(p.baseline)},
        {"r_prof", to_json(p.r_prof)},
        {"r_min", to_json(p.r_min)},
    };
}

profiling::ProfileVector profile_from_json(const json& j) {
    profiling::ProfileVector p;
    const auto util = [](const json& u) {
        return profiling::UtilStats{get<double>(u, "max_pct"), get<double>(u, "median_pct")};
    };
    p.cpu_p = util(member(j, "cpu_p"));
    p.cpu_e = util(member(j, "cpu_e"));
    const auto& mem = member(j, "mem");
    p.mem = {get<double>(mem, "peak_rss_mib"), get<double>(mem, "wss_mib"), get<bool>(mem, "swap_seen")};
    const auto& gpu = member(j, "gpu");
    p.gpu = {get<double>(gpu, "max_busy_pct"), get<double>(gpu, "median_busy_pct"),
             get<double>(gpu, "peak_mem_mib")};
    p.baseline = allocation_from_json(member(j, "baseline"));
    p.r_prof = allocation_from_json(member(j, "r_prof"));
    p.r_min = allocation_from_json(member(j, "r_min"));
    for (auto r : kAllResources) {
        if (p.r_min[r] > p.r_prof[r]) throw Error(ErrorCode::InvalidValue, "profile r_min exceeds r_prof");
    }
    return p;
}

// ---------------------------------------------------------------------------

json to_json(const qos::QosModel& m) {
    json factors = json::object();
    for (const auto& [res, f] : m.factors) {
        factors[std::string(to_string(res))] = {{"alpha", f.alpha()}, {"r_min", f.r_min()}, {"r_prof", f.r_prof()}};
    }
    return {{"kind", std::string(qos::to_string(m.kind))},
            {"anchor", m.anchor},
            {"renormalize", m.renormalize},
            {"factors", factors}};
}

qos::QosModel qos_model_from_json(const json& j) {
    qos::QosModel m;
    const auto kind = qos::model_kind_from_string(get<std::string>(j, "kind"));
    if (!kind) throw Error(ErrorCode::InvalidValue, "model kind must be throughput or latency", std::nullopt, "kind");
    m.kind = *kind;
    m.anchor = get<double>(j, "anchor");
    m.renormalize = get_or<bool>(j, "renormalize", true);
    const auto& factors = member(j, "factors");
    if (!factors.is_object()) throw Error(ErrorCode::InvalidValue, "factors must be an object", std::nullopt, "factors");
    for (const auto& [k, f] : factors.items()) {
        try {
            m.factors.emplace(resource_key(k), qos::ImpactFactor(get<double>(f, "alpha"), get<double>(f, "r_min"),
                                                                 get<double>(f, "r_prof")));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InvalidParams) throw;
            throw Error(ErrorCode::InvalidValue, "factor " + k + ": " + e.what(), std::nullopt, k);
        }
    }
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidValue, e.what());
    }
    return m;
}

json to_json(const qos::QosMetricSpec& s) {
    return {{"name", s.name},
            {"kind", std::string(qos::to_string(s.kind))},
            {"weight", s.weight},
            {"slo_target", s.slo_target}};
}

qos::QosMetricSpec metric_spec_from_json(const json& j) {
    qos::QosMetricSpec s;
    s.name = get<std::string>(j, "name");
    const auto kind = qos::metric_kind_from_string(get<std::string>(j, "kind"));
    if (!kind) throw Error(ErrorCode::InvalidValue, "unknown metric kind", std::nullopt, "kind");
    s.kind = *kind;
    s.weight = get<double>(j, "weight");
    s.slo_target = get<double>(j, "slo_target");
    return s;
}

json to_json(const objective::Feasibility& f) {
    json out = json::object();
    for (auto r : kAllResources) {
        out[std::string(to_string(r))] = {{"min", f[r].min}, {"max", f[r].max}};
    }
    return out;
}

objective::Feasibility feasibility_from_json(const json& j) {
    objective::Feasibility f;
    if (!j.is_object()) throw Error(ErrorCode::InvalidValue, "feasibility must be an object");
    for (const auto& [k, b] : j.items()) f[resource_key(k)] = {get_count(b, "min"), get_count(b, "max")};
    return f;
}

json to_json(const objective::VmSpec& spec) {
    json metrics = json::array();
    for (const auto& m : spec.qos_metrics) metrics.push_back(to_json(m));
    json models = json::object();
    for (const auto& [name, m] : spec.qos_models) models[name] = to_json(m);
    return {{"vm_id", spec.vm_id},
            {"workload_class", std::string(to_string(spec.workload_class))},
            {"qos_metrics", metrics},
            {"util_weights", per_resource(spec.util_weights)},
            {"lambda_util", spec.lambda_util},
            {"feasibility", to_json(spec.feasibility)},
            {"qos_models", models},
            {"profile", to_json(spec.profile)}};
}

objective::VmSpec vm_spec_from_json(const json& j) {
    objective::VmSpec spec;
    spec.vm_id = get<std::string>(j, "vm_id");
    const auto cls = workload_class_from_string(get<std::string>(j, "workload_class"));
    if (!cls) throw Error(ErrorCode::InvalidValue, "unknown workload class", std::nullopt, "workload_class");
    spec.workload_class = *cls;
    const auto& metrics = member(j, "qos_metrics");
    if (!metrics.is_array()) throw Error(ErrorCode::InvalidValue, "qos_metrics must be an array");
    for (const auto& m : metrics) spec.qos_metrics.push_back(metric_spec_from_json(m));
    spec.util_weights = per_resource_from(member(j, "util_weights"));
    spec.lambda_util = get<double>(j, "lambda_util");
    spec.feasibility = feasibility_from_json(member(j, "feasibility"));
    const auto& models = member(j, "qos_models");
    if (!models.is_object()) throw Error(ErrorCode::InvalidValue, "qos_models must be an object");
    for (const auto& [name, m] : models.items()) spec.qos_models.emplace(name, qos_model_from_json(m));
    spec.profile = profile_from_json(member(j, "profile"));
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------

json to_json(const profiling::DatasetRecord& r) {
    return {{"workload_id", r.workload_id},
            {"r", to_json(r.r)},
            {"p", to_json(r.p)},
            {"qos_kind", std::string(qos::to_string(r.qos_kind))},
            {"qos_value", r.qos_value},
            {"util", per_resource(r.util)}};
}

profiling::DatasetRecord dataset_record_from_json(const json& j) {
    profiling::DatasetRecord r;
    r.workload_id = get<std::string>(j, "workload_id");
    r.r = allocation_from_json(member(j, "r"));
    r.p = profile_from_json(member(j, "p"));
    const auto kind = qos::model_kind_from_string(get<std::string>(j, "qos_kind"));
    if (!kind) throw Error(ErrorCode::InvalidValue, "unknown qos_kind", std::nullopt, "qos_kind");
    r.qos_kind = *kind;
    r.qos_value = get<double>(j, "qos_value");
    if (!(r.qos_value > 0)) throw Error(ErrorCode::InvalidValue, "qos_value must be positive", std::nullopt, "qos_value");
    r.util = per_resource_from(member(j, "util"));
    for (double u : r.util) {
        if (u < 0.0 || u > 1.0) throw Error(ErrorCode::InvalidValue, "utilization outside [0,1]", std::nullopt, "util");
    }
    return r;
}

std::string write_dataset_jsonl(std::span<const profiling::DatasetRecord> records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<profiling::DatasetRecord> read_dataset_jsonl(std::string_view text) {
    std::vector<profiling::DatasetRecord> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(dataset_record_from_json(parse_json(line)));
        } catch (const Error& e) {
            throw Error(e.code(), e.what(), line_no, e.column());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

json to_json(const learned::MlpModel& m) {
    const auto& c = m.config;
    return {{"widths", {m.net.input_width(), m.net.hidden1(), m.net.hidden2(), 1}},
            {"params", m.net.parameters()},
            {"scaler", {{"mean", m.scaler.mean}, {"scale", m.scaler.scale}}},
            {"target", {{"mean", m.target_mean}, {"scale", m.target_scale}}},
            {"config",
             {{"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"dropout", c.dropout}}}};
}

learned::MlpModel mlp_from_json(const json& j) {
    learned::MlpModel m;
    const auto widths = get<std::vector<std::size_t>>(j, "widths");
    if (widths.size() != 4 || widths[3] != 1 || widths[1] < 1 || widths[2] < 1) {
        throw Error(ErrorCode::InvalidValue, "widths must be [d_in, h1, h2, 1]", std::nullopt, "widths");
    }
    m.net = learned::Network(widths[0], widths[1], widths[2]);
    auto params = get<std::vector<double>>(j, "params");
    if (params.size() != m.net.parameter_count()) {
        throw Error(ErrorCode::InvalidValue, "parameter count does not match widths", std::nullopt, "params");
    }
    m.net.parameters() = std::move(params);
    const auto& scaler = member(j, "scaler");
    m.scaler.mean = get<std::vector<double>>(scaler, "mean");
    m.scaler.scale = get<std::vector<double>>(scaler, "scale");
    if (m.scaler.mean.size() != widths[0] || m.scaler.scale.size() != widths[0]) {
        throw Error(ErrorCode::InvalidValue, "scaler width does not match d_in", std::nullopt, "scaler");
    }
    const auto& target = member(j, "target");
    m.target_mean = get<double>(target, "mean");
    m.target_scale = get<double>(target, "scale");
    const auto& c = member(j, "config");
    m.config.hidden1 = widths[1];
    m.config.hidden2 = widths[2];
    m.config.learning_rate = get<double>(c, "learning_rate");
    m.config.beta1 = get<double>(c, "beta1");
    m.config.beta2 = get<double>(c, "beta2");
    m.config.epsilon = get<double>(c, "epsilon");
    m.config.batch_size = get<std::size_t>(c, "batch_size");
    m.config.max_epochs = get<std::size_t>(c, "max_epochs");
    m.config.patience = get<std::size_t>(c, "patience");
    m.config.dropout = get<double>(c, "dropout");
    return m;
}

json to_json(const learned::ComparisonReport& r) {
    const auto cell = [](const learned::MseCell& c) {
        return json{{"mean", c.mean}, {"stddev", c.stddev}, {"per_split", c.per_split}};
    };
    const auto row = [&](const learned::ModelRow& m) {
        return json{{"latency_train", cell(m.latency_train)},
                    {"latency_eval", cell(m.latency_eval)},
                    {"throughput_train", cell(m.throughput_train)},
                    {"throughput_eval", cell(m.throughput_eval)},
                    {"latency_gap_ratio", m.latency_gap_ratio()},
                    {"throughput_gap_ratio", m.throughput_gap_ratio()}};
    };
    return {{"splits", r.splits}, {r.parametric.model, row(r.parametric)}, {r.mlp.model, row(r.mlp)}};
}

}  // namespace hyperscen::io
