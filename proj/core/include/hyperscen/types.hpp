#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hyperscen {

enum class Resource : std::uint8_t { PCore = 0, ECore = 1, Memory = 2, GpuSlice = 3 };

inline constexpr std::size_t kResourceCount = 4;
inline constexpr std::array<Resource, kResourceCount> kAllResources{
    Resource::PCore, Resource::ECore, Resource::Memory, Resource::GpuSlice};

constexpr std::size_t index_of(Resource r) noexcept { return static_cast<std::size_t>(r); }

// Wire names used in every JSON document ("pcore", "ecore", "memory", "gpu").
std::string_view to_string(Resource r) noexcept;
std::optional<Resource> resource_from_string(std::string_view name) noexcept;

/// One VM's resource grant: P-cores, E-cores, memory in MiB and GPU slices.
///
/// Also reused as a plain 4-vector of resource amounts (used capacity,
/// remaining capacity, demand envelopes), so it carries the componentwise
/// arithmetic the allocator needs.
struct Allocation {
    std::int64_t c_p = 0;
    std::int64_t c_e = 0;
    std::int64_t mem_mib = 0;
    std::int64_t gpu_slices = 0;

    std::int64_t& operator[](Resource r) noexcept;
    std::int64_t operator[](Resource r) const noexcept;

    Allocation& operator+=(const Allocation& o) noexcept;
    Allocation& operator-=(const Allocation& o) noexcept;
    friend Allocation operator+(Allocation a, const Allocation& b) noexcept { return a += b; }
    friend Allocation operator-(Allocation a, const Allocation& b) noexcept { return a -= b; }

    // Lexicographic on (c_p, c_e, mem_mib, gpu_slices); used for tie-breaks.
    friend auto operator<=>(const Allocation&, const Allocation&) = default;

    /// Componentwise a <= b.
    bool fits_within(const Allocation& limit) const noexcept;
};

std::string to_string(const Allocation& a);

enum class WorkloadClass : std::uint8_t { Gaming, AiInference, WebMicroservice, RtosControl };

inline constexpr std::array<WorkloadClass, 4> kAllWorkloadClasses{
    WorkloadClass::Gaming, WorkloadClass::AiInference, WorkloadClass::WebMicroservice,
    WorkloadClass::RtosControl};

std::string_view to_string(WorkloadClass c) noexcept;
std::optional<WorkloadClass> workload_class_from_string(std::string_view name) noexcept;

/// Board capacities. GPU sharing is expressed as integer SR-IOV slices, each
/// worth `gpu_slice_percent` of the device.
struct HardwareCapacity {
    std::int64_t p_cores = 0;
    std::int64_t e_cores = 0;
    std::int64_t memory_mib = 0;
    std::int64_t gpu_slices = 0;
    std::int64_t gpu_slice_percent = 10;
    std::int64_t gpu_mem_mib = 0;

    friend bool operator==(const HardwareCapacity&, const HardwareCapacity&) = default;

    Allocation as_allocation() const noexcept { return {p_cores, e_cores, memory_mib, gpu_slices}; }
};

}  // namespace hyperscen
