#include "hyperscen/board.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <charconv>
#include <numeric>
#include <sstream>

#include "hyperscen/error.hpp"

namespace hyperscen::board {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::int64_t to_count(const std::string& raw, const std::string& field) {
    const std::string text = trim(raw);
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw Error(ErrorCode::InvalidValue, "field '" + field + "' is not an integer: '" + text + "'",
                    std::nullopt, field);
    }
    if (value < 0) {
        throw Error(ErrorCode::InvalidValue, "field '" + field + "' is negative", std::nullopt,
                    field);
    }
    return value;
}

std::int64_t required(const pt::ptree& tree, const std::string& path, const std::string& field) {
    auto node = tree.get_optional<std::string>(path);
    if (!node) {
        throw Error(ErrorCode::MissingField, "missing required element '" + field + "'",
                    std::nullopt, field);
    }
    return to_count(*node, field);
}

std::int64_t optional(const pt::ptree& tree, const std::string& path, const std::string& field,
                      std::int64_t fallback) {
    auto node = tree.get_optional<std::string>(path);
    return node ? to_count(*node, field) : fallback;
}

}  // namespace

void validate(const HardwareCapacity& cap) {
    if (cap.p_cores < 0 || cap.e_cores < 0 || cap.memory_mib < 0 || cap.gpu_slices < 0 ||
        cap.gpu_mem_mib < 0 || cap.gpu_slice_percent < 0) {
        throw Error(ErrorCode::InvalidValue, "capacities must be non-negative");
    }
    if (cap.p_cores + cap.e_cores < 1) {
        throw Error(ErrorCode::InvalidValue, "board needs at least one CPU core");
    }
    if (cap.gpu_slices > 0 && cap.gpu_slice_percent <= 0) {
        throw Error(ErrorCode::InvalidValue, "gpu slice_percent must be positive", std::nullopt,
                    "gpu.slice_percent");
    }
    if (cap.gpu_slices * cap.gpu_slice_percent > 100) {
        throw Error(ErrorCode::InvalidValue, "gpu slices x slice_percent exceeds 100%",
                    std::nullopt, "gpu.slices");
    }
}

HardwareCapacity parse_board_config(std::string_view xml_text) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml_text)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw Error(ErrorCode::MalformedXml, e.what(), e.line());
    }
    if (tree.get_child_optional("board") == boost::none) {
        throw Error(ErrorCode::MissingField, "missing root element 'board'", std::nullopt, "board");
    }
    const pt::ptree& board = tree.get_child("board");

    HardwareCapacity cap;
    cap.p_cores = required(board, "cpu.pcores", "cpu.pcores");
    cap.e_cores = required(board, "cpu.ecores", "cpu.ecores");
    cap.memory_mib = required(board, "memory.<xmlattr>.mib", "memory.mib");
    if (board.get_child_optional("gpu")) {
        cap.gpu_slices = optional(board, "gpu.<xmlattr>.slices", "gpu.slices", 0);
        cap.gpu_slice_percent =
            optional(board, "gpu.<xmlattr>.slice_percent", "gpu.slice_percent", 10);
        cap.gpu_mem_mib = optional(board, "gpu.<xmlattr>.mem_mib", "gpu.mem_mib", 0);
    }
    validate(cap);
    return cap;
}

std::string serialize_board_config(const HardwareCapacity& cap) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<board>\n"
        << "  <cpu>\n"
        << "    <pcores>" << cap.p_cores << "</pcores>\n"
        << "    <ecores>" << cap.e_cores << "</ecores>\n"
        << "  </cpu>\n"
        << "  <memory mib=\"" << cap.memory_mib << "\"/>\n";
    if (cap.gpu_slices > 0 || cap.gpu_mem_mib > 0) {
        out << "  <gpu slices=\"" << cap.gpu_slices << "\" slice_percent=\""
            << cap.gpu_slice_percent << "\" mem_mib=\"" << cap.gpu_mem_mib << "\"/>\n";
    }
    out << "</board>\n";
    return out.str();
}

QuantumSet default_quanta(const HardwareCapacity& cap) {
    std::int64_t mem_step = kDefaultMemoryStepMib;
    if (cap.memory_mib > 0 && cap.memory_mib % mem_step != 0) {
        mem_step = std::gcd(cap.memory_mib, kDefaultMemoryStepMib);
    }
    QuantumSet quanta{{Resource::PCore, 1}, {Resource::ECore, 1}, {Resource::Memory, mem_step}};
    if (cap.gpu_slices > 0) quanta.push_back({Resource::GpuSlice, 1});
    return quanta;
}

std::int64_t step_of(const QuantumSet& quanta, Resource r) noexcept {
    for (const auto& q : quanta) {
        if (q.resource == r) return q.step;
    }
    return 0;
}

}  // namespace hyperscen::board
