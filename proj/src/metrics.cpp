#include "igcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "igcn/volume.hpp"

namespace igcn {

double directed_mean_distance(const MeshGraph& a, const MeshGraph& b, kern::Exec exec) {
    if (a.vertices.empty() || b.triangles.empty())
        throw ValidationError("mean_distance: empty mesh");
    const auto d = kern::directed_surface_distances(a.vertices, b, exec);
    double acc = 0.0;
    for (double v : d) acc += v;
    return acc / static_cast<double>(d.size());
}

double mean_distance(const MeshGraph& a, const MeshGraph& b, kern::Exec exec) {
    return 0.5 * (directed_mean_distance(a, b, exec) + directed_mean_distance(b, a, exec));
}

double rmse_corresponding(const MeshGraph& a, const MeshGraph& b) {
    if (a.vertex_count() != b.vertex_count())
        throw ValidationError("rmse: vertex counts differ (no correspondence)");
    if (a.vertices.empty()) throw ValidationError("rmse: empty mesh");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        acc += norm2(a.vertices[i] - b.vertices[i]);
    return std::sqrt(acc / static_cast<double>(a.vertices.size()));
}

namespace {

void bounding_box(const MeshGraph& m, Vec3& lo, Vec3& hi) {
    lo = hi = m.vertices.front();
    for (const auto& v : m.vertices) {
        lo.x = std::min(lo.x, v.x);
        lo.y = std::min(lo.y, v.y);
        lo.z = std::min(lo.z, v.z);
        hi.x = std::max(hi.x, v.x);
        hi.y = std::max(hi.y, v.y);
        hi.z = std::max(hi.z, v.z);
    }
}

} // namespace

double dice_coefficient(const MeshGraph& a, const MeshGraph& b, double spacing_mm,
                        kern::Exec exec) {
    if (spacing_mm <= 0.0) throw ValidationError("dice: spacing must be positive");
    if (!is_watertight(a) || !is_watertight(b))
        throw ValidationError("dice: meshes must be watertight");
    Vec3 alo, ahi, blo, bhi;
    bounding_box(a, alo, ahi);
    bounding_box(b, blo, bhi);
    const Vec3 lo{std::min(alo.x, blo.x) - spacing_mm, std::min(alo.y, blo.y) - spacing_mm,
                  std::min(alo.z, blo.z) - spacing_mm};
    const Vec3 hi{std::max(ahi.x, bhi.x) + spacing_mm, std::max(ahi.y, bhi.y) + spacing_mm,
                  std::max(ahi.z, bhi.z) + spacing_mm};
    const auto cells = [&](double l, double h) {
        return std::max(1, static_cast<int>(std::ceil((h - l) / spacing_mm)));
    };
    const VoxelVolume grid({cells(lo.x, hi.x), cells(lo.y, hi.y), cells(lo.z, hi.z)},
                           {spacing_mm, spacing_mm, spacing_mm}, lo);
    const auto occ_a = kern::voxelize_parity(a, grid, exec);
    const auto occ_b = kern::voxelize_parity(b, grid, exec);
    std::size_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < occ_a.size(); ++i) {
        na += occ_a[i];
        nb += occ_b[i];
        ni += static_cast<std::size_t>(occ_a[i] & occ_b[i]);
    }
    if (na + nb == 0) throw ValidationError("dice: both occupancies are empty");
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

EvaluationReport summarize(std::vector<MetricsRow> rows,
                           const std::vector<std::string>& variant_order) {
    EvaluationReport report;
    report.rows = std::move(rows);
    for (const auto& variant : variant_order) {
        std::vector<const MetricsRow*> vs;
        for (const auto& r : report.rows)
            if (r.variant == variant) vs.push_back(&r);
        if (vs.empty()) throw ValidationError("report: no rows for variant " + variant);
        const auto stat = [&](auto field, double& mean, double& stdev) {
            double m = 0.0;
            for (const auto* r : vs) m += field(*r);
            m /= static_cast<double>(vs.size());
            double s = 0.0;
            for (const auto* r : vs) s += (field(*r) - m) * (field(*r) - m);
            mean = m;
            stdev = std::sqrt(s / static_cast<double>(vs.size()));
        };
        VariantSummary sum;
        sum.variant = variant;
        stat([](const MetricsRow& r) { return r.md_mm; }, sum.md_mean, sum.md_std);
        stat([](const MetricsRow& r) { return r.rmse_mm; }, sum.rmse_mean, sum.rmse_std);
        stat([](const MetricsRow& r) { return r.dsc_pct; }, sum.dsc_mean, sum.dsc_std);
        double t = 0.0;
        for (const auto* r : vs) t += r->forward_ms;
        sum.time_mean_ms = t / static_cast<double>(vs.size());
        report.summaries.push_back(sum);
    }
    return report;
}

void write_report_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("report: cannot write " + path.string());
    out << "sample_id,variant,md_mm,rmse_mm,dsc_pct,forward_ms\n";
    char buf[160];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.3f\n", r.sample_id,
                      r.variant.c_str(), r.md_mm, r.rmse_mm, r.dsc_pct, r.forward_ms);
        out << buf;
    }
}

std::string format_report_table(const EvaluationReport& report) {
    std::ostringstream os;
    char buf[96];
    os << "Shape reconstruction metrics (mean +- std over test samples)\n\n";
    std::snprintf(buf, sizeof(buf), "%-12s", "");
    os << buf;
    for (const auto& s : report.summaries) {
        std::snprintf(buf, sizeof(buf), "  %-18s", s.variant.c_str());
        os << buf;
    }
    os << '\n';
    const auto row = [&](const char* label, auto mean_of, auto std_of, const char* fmt) {
        std::snprintf(buf, sizeof(buf), "%-12s", label);
        os << buf;
        for (const auto& s : report.summaries) {
            char cell[48];
            std::snprintf(cell, sizeof(cell), fmt, mean_of(s), std_of(s));
            std::snprintf(buf, sizeof(buf), "  %-18s", cell);
            os << buf;
        }
        os << '\n';
    };
    row("MD [mm]", [](const VariantSummary& s) { return s.md_mean; },
        [](const VariantSummary& s) { return s.md_std; }, "%.2f +- %.2f");
    row("RMSE [mm]", [](const VariantSummary& s) { return s.rmse_mean; },
        [](const VariantSummary& s) { return s.rmse_std; }, "%.2f +- %.2f");
    row("DSC [%]", [](const VariantSummary& s) { return s.dsc_mean; },
        [](const VariantSummary& s) { return s.dsc_std; }, "%.1f +- %.1f");
    os << '\n';
    os << "Forward time [ms]:";
    for (const auto& s : report.summaries) {
        if (s.time_mean_ms > 0.0) {
            std::snprintf(buf, sizeof(buf), " %s=%.1f", s.variant.c_str(), s.time_mean_ms);
            os << buf;
        }
    }
    os << '\n';
    return os.str();
}

void write_report_table(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("report: cannot write " + path.string());
    out << format_report_table(report);
}

} // namespace igcn
