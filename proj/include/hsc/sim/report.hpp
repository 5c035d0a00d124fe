#pragma once

// Metric reports: one row per transfer, TransferMetrics field order.

#include <string>
#include <vector>

#include "hsc/sim/harness.hpp"

namespace hsc::sim {

enum class ReportFormat { csv, json };

inline constexpr const char* kCsvHeader =
    "overall_time_s,disconnect_time_s,handoff_delay_s,detection_delay_s,"
    "useless_traffic_bytes,per_interface_bytes,completed";

/// per_interface_bytes is encoded as `id:n;id:n` in id order.
std::string to_csv(const std::vector<TransferMetrics>& rows);
std::string to_json(const std::vector<TransferMetrics>& rows);
std::string render(const std::vector<TransferMetrics>& rows, ReportFormat format);

/// Seconds with fixed precision, so reports compare byte for byte.
std::string format_seconds(double seconds);

}  // namespace hsc::sim
