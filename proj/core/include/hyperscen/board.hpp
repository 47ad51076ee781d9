#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hyperscen/types.hpp"

namespace hyperscen::board {

/// Smallest allocatable unit of one resource, in that resource's native unit
/// (cores, MiB, slices).
struct ResourceQuantum {
    Resource resource;
    std::int64_t step;

    friend bool operator==(const ResourceQuantum&, const ResourceQuantum&) = default;
};

using QuantumSet = std::vector<ResourceQuantum>;

inline constexpr std::int64_t kDefaultMemoryStepMib = 128;

/// Parse the board description:
///
///   <board>
///     <cpu><pcores>6</pcores><ecores>8</ecores></cpu>
///     <memory mib="65536"/>
///     <gpu slices="10" slice_percent="10" mem_mib="16384"/>   <!-- optional -->
///   </board>
///
/// Unknown elements are ignored. Throws Error with MalformedXml, MissingField
/// or InvalidValue.
HardwareCapacity parse_board_config(std::string_view xml_text);

/// Canonical XML for `cap`; parse_board_config(serialize_board_config(c)) == c.
std::string serialize_board_config(const HardwareCapacity& cap);

/// Throws InvalidValue if `cap` breaks a capacity invariant.
void validate(const HardwareCapacity& cap);

/// {PCore:1, ECore:1, Memory:128, GpuSlice:1}; the GPU entry is omitted on
/// boards without slices. The memory step shrinks to a divisor of the total
/// when 128 MiB does not divide it.
QuantumSet default_quanta(const HardwareCapacity& cap);

/// Step for `r`, or 0 when the set has no entry for it.
std::int64_t step_of(const QuantumSet& quanta, Resource r) noexcept;

}  // namespace hyperscen::board
