#pragma once

#include <string>
#include <vector>

#include "fedslice/env.hpp"
#include "fedslice/harness.hpp"

namespace fedslice {

// Canonical text for a real: up to 6 significant digits, '.' separator,
// locale-independent, the same bytes on every platform.
std::string format_real(double value);

// Fixed header (step,cell_id,...,congestion_flag), one row per record,
// sorted by (step, cell_id, slice_id). Same log, same bytes.
std::string kpi_csv_string(std::vector<KpiRecord> log);
void export_kpi_csv(const std::vector<KpiRecord>& log, const std::string& path);

std::string eval_report_json(const EvalReport& report);
std::string eval_report_csv(const EvalReport& report);

}  // namespace fedslice
