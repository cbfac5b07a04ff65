#include "nowcast/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace nowcast {

std::string report_text(const EvalReport& report) {
    std::ostringstream os;
    std::size_t name_w = 12;
    for (const auto& e : report.entries) name_w = std::max(name_w, e.name.size() + 2);
    os << std::left << std::setw(static_cast<int>(name_w)) << "model"
       << std::right << std::setw(12) << "raw_mse" << std::setw(12) << "normalized" << "\n";
    for (const auto& e : report.entries) {
        os << std::left << std::setw(static_cast<int>(name_w)) << e.name << std::right
           << std::setw(12) << std::fixed << std::setprecision(6) << e.raw_mse;
        if (e.normalized_valid)
            os << std::setw(12) << std::setprecision(3) << e.normalized;
        else
            os << std::setw(12) << "n/a";
        os << "\n";
        os.unsetf(std::ios::fixed);
        os << std::setprecision(6);
    }
    os << "samples: " << report.sample_count << "  leads: " << report.lead_count << "\n";
    if (report.persistence_undefined)
        os << "note: persistence raw MSE is zero; normalized scores are undefined\n";
    return os.str();
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "model,kind,raw_mse,normalized";
    for (int l = 1; l <= report.lead_count; ++l) os << ",lead_" << l;
    os << "\n";
    os << std::setprecision(17);
    for (const auto& e : report.entries) {
        os << e.name << ',' << e.kind << ',' << e.raw_mse << ',';
        if (e.normalized_valid) os << e.normalized;
        for (double v : e.per_lead) os << ',' << v;
        os << "\n";
    }
    return os.str();
}

void write_report(const EvalReport& report, const std::string& path_prefix) {
    {
        std::ofstream out(path_prefix + ".txt");
        if (!out) throw DataError("cannot create '" + path_prefix + ".txt'");
        out << report_text(report);
    }
    {
        std::ofstream out(path_prefix + ".csv");
        if (!out) throw DataError("cannot create '" + path_prefix + ".csv'");
        out << report_csv(report);
    }
}

}  // namespace nowcast
