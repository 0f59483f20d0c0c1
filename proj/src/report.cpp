#include "qtokens/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "qtokens/error.hpp"
#include "qtokens/svg.hpp"

namespace qtokens {
namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

void require_points(const FitReport& r) {
    if (r.points.size() < 2 || r.point_fits.size() != r.points.size())
        throw Error("need >= 2 points to plot correlation");
}

// Labels in first-appearance order.
std::vector<std::string> labels_of(const FitReport& r) {
    std::vector<std::string> out;
    for (const auto& p : r.points)
        if (std::find(out.begin(), out.end(), p.label) == out.end()) out.push_back(p.label);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string render_pred_vs_true(const FitReport& r) {
    require_points(r);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        for (double v : {r.points[i].accuracy, r.point_fits[i].predicted}) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    auto [range, step] = svg::nice_range(lo, hi);
    std::string title = "Predicted vs. true accuracy";
    if (r.pearson) title += " (Pearson r = " + svg::fmt(*r.pearson, 3) + ")";
    svg::Chart chart(title, "true accuracy", "predicted accuracy", range, range, step, step);
    chart.line({{range.lo, range.lo}, {range.hi, range.hi}}, "#999999", "y = x", true);
    const auto labels = labels_of(r);
    for (std::size_t l = 0; l < labels.size(); ++l) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < r.points.size(); ++i)
            if (r.points[i].label == labels[l]) pts.emplace_back(r.points[i].accuracy, r.point_fits[i].predicted);
        chart.scatter(pts, color(l), labels[l].empty() ? "points" : labels[l]);
    }
    return chart.render();
}

std::string render_acc_vs_dq(const FitReport& r) {
    require_points(r);
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const double dq = r.point_fits[i].d_q;
        if (!(dq > 0.0)) continue;
        xlo = std::min(xlo, std::log10(dq));
        xhi = std::max(xhi, std::log10(dq));
        ylo = std::min(ylo, r.points[i].accuracy);
        yhi = std::max(yhi, r.points[i].accuracy);
    }
    if (!std::isfinite(xlo)) throw Error("no point has a positive effective token count");

    // Model curves per model size over the observed D_q span.
    std::map<double, std::vector<std::pair<double, double>>> curves;
    for (const auto& p : r.points) curves.emplace(p.n_millions, std::vector<std::pair<double, double>>{});
    const auto& k = r.constants;
    for (auto& [n, pts] : curves) {
        for (int i = 0; i <= 60; ++i) {
            const double lx = xlo + (xhi - xlo) * i / 60.0;
            const double g = clamp_unit(k.e + k.a / std::pow(n, k.alpha) + k.b / std::pow(std::pow(10.0, lx), k.beta));
            if (!std::isfinite(g)) continue;
            pts.emplace_back(lx, g);
            ylo = std::min(ylo, g);
            yhi = std::max(yhi, g);
        }
    }
    auto [xr, xs] = svg::nice_range(xlo, xhi);
    auto [yr, ys] = svg::nice_range(ylo, yhi);
    svg::Chart chart("Accuracy vs. effective tokens", "effective tokens D_q", "average accuracy", xr, yr, xs, ys);
    chart.set_log10_x(true);
    std::size_t c = 0;
    for (const auto& [n, pts] : curves) chart.line(pts, color(c++), "model " + svg::fmt(n) + "M");
    const auto labels = labels_of(r);
    for (std::size_t l = 0; l < labels.size(); ++l) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < r.points.size(); ++i)
            if (r.points[i].label == labels[l] && r.point_fits[i].d_q > 0.0)
                pts.emplace_back(std::log10(r.point_fits[i].d_q), r.points[i].accuracy);
        chart.scatter(pts, color(c + l), labels[l].empty() ? "observed" : labels[l], 2.5);
    }
    return chart.render();
}

std::string render_q_surface_csv(const ScalingConstants& k) {
    std::string out = "dr,s,q\n";
    for (int i = 0; i <= 25; ++i) {
        const double dr = 0.25 + 0.01 * i;
        for (int j = 0; j <= 24; ++j) {
            const double s = 0.02 + 0.005 * j;
            const double q = effective_tokens({1.0, dr, s, 1.0}, k);
            out += svg::fmt(dr, 4) + "," + svg::fmt(s, 4) + "," + svg::fmt(q, 10) + "\n";
        }
    }
    return out;
}

ReportFiles write_report(const FitReport& report, const std::filesystem::path& out_dir) {
    require_points(report);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir.string());
    ReportFiles files{out_dir / "pred_vs_true.svg", out_dir / "acc_vs_dq.svg", out_dir / "q_surface.csv"};
    write_file(files.pred_vs_true, render_pred_vs_true(report));
    write_file(files.acc_vs_dq, render_acc_vs_dq(report));
    write_file(files.q_surface, render_q_surface_csv(report.constants));
    return files;
}

}  // namespace qtokens
