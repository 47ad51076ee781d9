#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperscen/mlp.hpp"
#include "hyperscen/objective.hpp"
#include "hyperscen/profiling.hpp"
#include "hyperscen/qos_model.hpp"
#include "hyperscen/types.hpp"

// JSON forms of the domain types. Readers throw Error(MissingField) for an
// absent key and Error(InvalidValue) for a wrong type or value; they never
// leak nlohmann exceptions.
namespace hyperscen::io {

using nlohmann::json;

/// Parse text as JSON, mapping syntax errors to InvalidValue.
json parse_json(std::string_view text);

json to_json(const Allocation& a);  // {c_p, c_e, m, g}
Allocation allocation_from_json(const json& j);

json to_json(const HardwareCapacity& cap);
HardwareCapacity capacity_from_json(const json& j);

json to_json(const profiling::ProfileVector& p);
profiling::ProfileVector profile_from_json(const json& j);

/// {kind, anchor, renormalize, factors: {resource: {alpha, r_min, r_prof}}}
json to_json(const qos::QosModel& m);
qos::QosModel qos_model_from_json(const json& j);

json to_json(const qos::QosMetricSpec& s);
qos::QosMetricSpec metric_spec_from_json(const json& j);

json to_json(const objective::Feasibility& f);
objective::Feasibility feasibility_from_json(const json& j);

json to_json(const objective::VmSpec& spec);
/// Validates the spec after reading it (InvalidSpec).
objective::VmSpec vm_spec_from_json(const json& j);

/// {workload_id, r, p, qos_kind, qos_value, util}
json to_json(const profiling::DatasetRecord& r);
profiling::DatasetRecord dataset_record_from_json(const json& j);

/// One compact JSON object per line.
std::string write_dataset_jsonl(std::span<const profiling::DatasetRecord> records);
/// Blank lines are skipped; errors carry the 1-based line number as row.
std::vector<profiling::DatasetRecord> read_dataset_jsonl(std::string_view text);

/// Checkpoint: {widths, params, scaler: {mean, scale}, target: {mean, scale}, config}.
json to_json(const learned::MlpModel& m);
learned::MlpModel mlp_from_json(const json& j);

json to_json(const learned::ComparisonReport& r);

/// Sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

}  // namespace hyperscen::io
