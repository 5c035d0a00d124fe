#include "hsc/sim/report.hpp"

#include <cstdio>

#include "json.hpp"

namespace hsc::sim {

std::string format_seconds(double seconds) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", seconds);
  return buf;
}

std::string to_csv(const std::vector<TransferMetrics>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& m : rows) {
    std::string per;
    for (const auto& [id, n] : m.per_interface_bytes) {
      if (!per.empty()) per += ';';
      per += id + ":" + std::to_string(n);
    }
    out += format_seconds(m.overall_time_s) + "," + format_seconds(m.disconnect_time_s) + "," +
           format_seconds(m.handoff_delay_s) + "," + format_seconds(m.detection_delay_s) + "," +
           std::to_string(m.useless_traffic_bytes) + "," + per + "," +
           (m.completed ? "true" : "false") + "\n";
  }
  return out;
}

std::string to_json(const std::vector<TransferMetrics>& rows) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& m : rows) {
    nlohmann::ordered_json row;
    row["overall_time_s"] = m.overall_time_s;
    row["disconnect_time_s"] = m.disconnect_time_s;
    row["handoff_delay_s"] = m.handoff_delay_s;
    row["detection_delay_s"] = m.detection_delay_s;
    row["useless_traffic_bytes"] = m.useless_traffic_bytes;
    row["per_interface_bytes"] = m.per_interface_bytes;
    row["completed"] = m.completed;
    j.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string render(const std::vector<TransferMetrics>& rows, ReportFormat format) {
  return format == ReportFormat::csv ? to_csv(rows) : to_json(rows);
}

}  // namespace hsc::sim
