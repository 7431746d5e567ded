#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "igcn/kernels.hpp"
#include "igcn/mesh.hpp"

namespace igcn {

// Symmetric mean of the shortest point-to-surface distances: the two directed
// means (A's vertices to B's surface and vice versa), averaged.
double mean_distance(const MeshGraph& a, const MeshGraph& b,
                     kern::Exec exec = kern::default_exec());

// Directed mean only (A's vertices to B's surface).
double directed_mean_distance(const MeshGraph& a, const MeshGraph& b,
                              kern::Exec exec = kern::default_exec());

// RMSE between corresponding vertices (equal counts, shared order).
double rmse_corresponding(const MeshGraph& a, const MeshGraph& b);

// Dice overlap of voxelized occupancies on a shared grid covering both
// meshes (isotropic `spacing_mm`). Both meshes must be watertight.
double dice_coefficient(const MeshGraph& a, const MeshGraph& b, double spacing_mm,
                        kern::Exec exec = kern::default_exec());

// One metrics row of the evaluation report.
struct MetricsRow {
    int sample_id = 0;
    std::string variant;
    double md_mm = 0.0;
    double rmse_mm = 0.0;
    double dsc_pct = 0.0;
    double forward_ms = 0.0;  // 0 for the Initial column
};

struct VariantSummary {
    std::string variant;
    double md_mean = 0.0, md_std = 0.0;
    double rmse_mean = 0.0, rmse_std = 0.0;
    double dsc_mean = 0.0, dsc_std = 0.0;
    double time_mean_ms = 0.0;
};

struct EvaluationReport {
    std::vector<MetricsRow> rows;
    std::vector<VariantSummary> summaries;  // column order of the table
};

// Aggregate per-variant mean and std (population) from the rows.
EvaluationReport summarize(std::vector<MetricsRow> rows,
                           const std::vector<std::string>& variant_order);

void write_report_csv(const EvaluationReport& report, const std::filesystem::path& path);

// Text table with metric rows and one column per variant, mean +- std.
void write_report_table(const EvaluationReport& report, const std::filesystem::path& path);
std::string format_report_table(const EvaluationReport& report);

} // namespace igcn
