#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "igcn/config.hpp"
#include "igcn/metrics.hpp"
#include "igcn/model.hpp"

namespace igcn::pipeline {

struct GenDataSummary {
    int train_count = 0;
    int test_count = 0;
    std::filesystem::path manifest;
};

// Generate the synthetic dataset under config.dataset_dir and echo the
// effective config next to it.
GenDataSummary run_gen_data(const RunConfig& config);

struct TrainArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path log_csv;     // deterministic loss columns
    std::filesystem::path timing_csv;  // wall-clock sidecar
    TrainOutcome outcome;
};

// Train one variant on the train split; writes <variant>.ckpt and the CSV
// logs. Throws NumericalError after writing the last good checkpoint if
// training diverges.
TrainArtifacts run_train(const RunConfig& config, ModelVariant variant);

struct PredictArtifacts {
    std::filesystem::path obj;
    double forward_ms = 0.0;
};

PredictArtifacts run_predict(const RunConfig& config, const std::filesystem::path& checkpoint,
                             int sample_id);

struct EvalArtifacts {
    EvaluationReport report;
    std::filesystem::path csv;
    std::filesystem::path table;
};

// Metrics per test sample for the Initial column plus one column per
// checkpoint; `with_oracle` adds a ground-truth-injected column.
EvalArtifacts run_eval(const RunConfig& config,
                       const std::vector<std::filesystem::path>& checkpoints, bool with_oracle);

struct GradCheckRow {
    std::string op;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradCheckOutcome {
    std::vector<GradCheckRow> rows;
    bool all_pass = true;
};

// Finite-difference checks for every differentiable operation plus the
// end-to-end total loss on an 8-vertex mesh and a 16x16 image.
GradCheckOutcome run_gradcheck();

// Serial-vs-OpenMP kernel timings; also verifies bitwise agreement.
void run_bench(std::ostream& os, const RunConfig& config);

} // namespace igcn::pipeline
