#pragma once

#include <string>

#include "nowcast/eval.hpp"

namespace nowcast {

// Fixed-width text table, one row per scored entry.
std::string report_text(const EvalReport& report);
// Delimited form: model,kind,raw_mse,normalized,lead_1..lead_T
std::string report_csv(const EvalReport& report);

void write_report(const EvalReport& report, const std::string& path_prefix);

}  // namespace nowcast
