#include "fedslice/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace fedslice {

std::string format_real(double value) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kKpiHeader =
    "step,cell_id,slice_id,demand_prb,requested_prb,alloc_prb,gap_prb,"
    "abs_gap_prb,reward,cqi,epsilon,congestion_flag";

void append_row(std::string& out, const KpiRecord& r) {
  out += std::to_string(r.step);
  out += ',';
  out += std::to_string(r.cell_id);
  out += ',';
  out += std::to_string(r.slice_id);
  out += ',';
  out += std::to_string(r.demand_prb);
  out += ',';
  out += std::to_string(r.requested_prb);
  out += ',';
  out += std::to_string(r.alloc_prb);
  out += ',';
  out += std::to_string(r.gap_prb);
  out += ',';
  out += std::to_string(r.abs_gap_prb);
  out += ',';
  out += format_real(r.reward);
  out += ',';
  out += std::to_string(r.cqi);
  out += ',';
  out += format_real(r.epsilon);
  out += ',';
  out += r.congestion ? '1' : '0';
  out += '\n';
}

}  // namespace

std::string kpi_csv_string(std::vector<KpiRecord> log) {
  std::stable_sort(log.begin(), log.end(),
                   [](const KpiRecord& a, const KpiRecord& b) {
                     return std::tie(a.step, a.cell_id, a.slice_id) <
                            std::tie(b.step, b.cell_id, b.slice_id);
                   });
  std::string out = kKpiHeader;
  out += '\n';
  for (const KpiRecord& r : log) append_row(out, r);
  return out;
}

void export_kpi_csv(const std::vector<KpiRecord>& log, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open for writing: " + path);
  const std::string text = kpi_csv_string(log);
  file.write(text.data(), long(text.size()));
  if (!file) throw std::runtime_error("write failed: " + path);
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["episodes"] = report.episodes;
  doc["steps_per_episode"] = report.steps_per_episode;
  doc["slices"] = nlohmann::json::array();
  for (const SliceStats& st : report.slices) {
    doc["slices"].push_back({{"cell_id", st.cell_id},
                             {"slice_id", st.slice_id},
                             {"mean_reward", st.mean_reward},
                             {"mean_gap_prb", st.mean_gap_prb},
                             {"mean_abs_gap_prb", st.mean_abs_gap_prb},
                             {"over_provision_ratio", st.over_provision_ratio},
                             {"sla_violation_ratio", st.sla_violation_ratio},
                             {"mean_alloc_prb", st.mean_alloc_prb}});
  }
  doc["cells"] = nlohmann::json::array();
  for (const CellStats& cs : report.cells) {
    doc["cells"].push_back(
        {{"cell_id", cs.cell_id}, {"jain_fairness", cs.jain_fairness}});
  }
  doc["aggregate"] = {{"mean_reward", report.mean_reward},
                      {"mean_gap_prb", report.mean_gap_prb},
                      {"mean_abs_gap_prb", report.mean_abs_gap_prb},
                      {"over_provision_ratio", report.over_provision_ratio},
                      {"sla_violation_ratio", report.sla_violation_ratio},
                      {"mean_alloc_prb", report.mean_alloc_prb}};
  return doc.dump(2) + "\n";
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out =
      "cell_id,slice_id,mean_reward,mean_gap_prb,mean_abs_gap_prb,"
      "over_provision_ratio,sla_violation_ratio,mean_alloc_prb\n";
  for (const SliceStats& st : report.slices) {
    out += std::to_string(st.cell_id);
    out += ',';
    out += std::to_string(st.slice_id);
    out += ',';
    out += format_real(st.mean_reward);
    out += ',';
    out += format_real(st.mean_gap_prb);
    out += ',';
    out += format_real(st.mean_abs_gap_prb);
    out += ',';
    out += format_real(st.over_provision_ratio);
    out += ',';
    out += format_real(st.sla_violation_ratio);
    out += ',';
    out += format_real(st.mean_alloc_prb);
    out += '\n';
  }
  return out;
}

}  // namespace fedslice
