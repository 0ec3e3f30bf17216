#pragma once

#include <filesystem>
#include <string>

#include "knnmem/harness.hpp"

namespace knnmem {

inline constexpr char kReportHeader[] =
    "protocol,step,support_size,removed_or_added,class,per_class_size,accuracy,k,seed,"
    "generation";

/// One aggregate row per step: `class` holds the step scope and
/// `per_class_size` the "label=size;..." breakdown (labels percent-encoded
/// for '%', '=' and ';'). Each class with a measured accuracy adds a row
/// right after its step with `class` = label and a plain integer size.
std::string report_to_csv(const ProtocolReport& report);

/// Inverse of report_to_csv. A header-only document yields a report with no
/// steps (and default metadata).
ProtocolReport report_from_csv(const std::string& csv);

void emit_report(const ProtocolReport& report, const std::filesystem::path& path);
ProtocolReport read_report(const std::filesystem::path& path);

}  // namespace knnmem
