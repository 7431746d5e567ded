#pragma once

#include <filesystem>
#include <string>

#include "igcn/model.hpp"
#include "igcn/phantom.hpp"

namespace igcn {

// Everything a pipeline run needs, with desk-scale defaults. Loaded from a
// sectioned key=value file; command-line flags override file values, and the
// effective config is echoed into every output directory.
struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = runtime default

    std::string dataset_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";

    DatasetConfig dataset;     // phantom + deformation + camera + grid + counts
    BackboneConfig backbone;
    int gcn_hidden = 128;
    int gcn_layers = 8;
    bool self_loops = true;
    bool residual_output = false;
    LossWeights loss;
    TrainingConfig train;      // epochs default 1000, lr 1e-4, dropout 0.5

    double dice_spacing_mm = 2.0;
    bool save_volumes = false;

    // Propagate the global seed into the nested configs.
    void sync() {
        dataset.seed = seed;
        train.seed = seed;
    }
};

RunConfig load_run_config(const std::filesystem::path& path);

// Round-trippable text form (same format load_run_config reads).
std::string serialize_config(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

// 640x640 DRRs at 1x1x2.5 mm grid spacing, 20 + 124 train / 15 test samples.
void apply_paper_scale(RunConfig& config);

} // namespace igcn
