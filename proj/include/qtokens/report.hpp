#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qtokens/fitting.hpp"

namespace qtokens {

struct ReportFiles {
    std::filesystem::path pred_vs_true;
    std::filesystem::path acc_vs_dq;
    std::filesystem::path q_surface;
};

std::string render_pred_vs_true(const FitReport& report);
std::string render_acc_vs_dq(const FitReport& report);
/// Scaling factor (D_q / D) over a Dr x S grid: columns dr,s,q.
std::string render_q_surface_csv(const ScalingConstants& constants);

/// Writes pred_vs_true.svg, acc_vs_dq.svg and q_surface.csv into out_dir
/// (created if missing). Needs at least 2 points.
ReportFiles write_report(const FitReport& report, const std::filesystem::path& out_dir);

}  // namespace qtokens
