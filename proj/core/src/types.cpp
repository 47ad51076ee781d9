#include "hyperscen/types.hpp"

#include "hyperscen/error.hpp"

namespace hyperscen {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedXml: return "MalformedXml";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
        case ErrorCode::OutOfRangeValue: return "OutOfRangeValue";
        case ErrorCode::EmptyTrace: return "EmptyTrace";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::BelowMinimum: return "BelowMinimum";
        case ErrorCode::CalibrationOutOfRange: return "CalibrationOutOfRange";
        case ErrorCode::DegenerateSamples: return "DegenerateSamples";
        case ErrorCode::ZeroAllocation: return "ZeroAllocation";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyFeasibleSet: return "EmptyFeasibleSet";
        case ErrorCode::NoFeasibleAssignment: return "NoFeasibleAssignment";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::ZeroTotalDemand: return "ZeroTotalDemand";
        case ErrorCode::TooFewRecords: return "TooFewRecords";
        case ErrorCode::FeatureMismatch: return "FeatureMismatch";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> row,
             std::string column)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      row_(row),
      column_(std::move(column)) {}

std::string_view to_string(Resource r) noexcept {
    switch (r) {
        case Resource::PCore: return "pcore";
        case Resource::ECore: return "ecore";
        case Resource::Memory: return "memory";
        case Resource::GpuSlice: return "gpu";
    }
    return "?";
}

std::optional<Resource> resource_from_string(std::string_view name) noexcept {
    for (auto r : kAllResources) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

std::int64_t& Allocation::operator[](Resource r) noexcept {
    switch (r) {
        case Resource::PCore: return c_p;
        case Resource::ECore: return c_e;
        case Resource::Memory: return mem_mib;
        case Resource::GpuSlice: break;
    }
    return gpu_slices;
}

std::int64_t Allocation::operator[](Resource r) const noexcept {
    return const_cast<Allocation&>(*this)[r];
}

Allocation& Allocation::operator+=(const Allocation& o) noexcept {
    c_p += o.c_p;
    c_e += o.c_e;
    mem_mib += o.mem_mib;
    gpu_slices += o.gpu_slices;
    return *this;
}

Allocation& Allocation::operator-=(const Allocation& o) noexcept {
    c_p -= o.c_p;
    c_e -= o.c_e;
    mem_mib -= o.mem_mib;
    gpu_slices -= o.gpu_slices;
    return *this;
}

bool Allocation::fits_within(const Allocation& limit) const noexcept {
    return c_p <= limit.c_p && c_e <= limit.c_e && mem_mib <= limit.mem_mib &&
           gpu_slices <= limit.gpu_slices;
}

std::string to_string(const Allocation& a) {
    return "(c_p=" + std::to_string(a.c_p) + ", c_e=" + std::to_string(a.c_e) +
           ", m=" + std::to_string(a.mem_mib) + ", g=" + std::to_string(a.gpu_slices) + ")";
}

std::string_view to_string(WorkloadClass c) noexcept {
    switch (c) {
        case WorkloadClass::Gaming: return "gaming";
        case WorkloadClass::AiInference: return "ai_inference";
        case WorkloadClass::WebMicroservice: return "web_microservice";
        case WorkloadClass::RtosControl: return "rtos_control";
    }
    return "?";
}

std::optional<WorkloadClass> workload_class_from_string(std::string_view name) noexcept {
    for (auto c : kAllWorkloadClasses) {
        if (to_string(c) == name) return c;
    }
    return std::nullopt;
}

}  // namespace hyperscen
