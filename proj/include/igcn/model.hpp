#pragma once

// Full network: VGG-style CNN backbone over the projection image, a 1x1
// deformation-map head, warped perceptual pooling of multi-resolution
// features at projected vertex locations, and an 8-layer GCN regressing
// per-vertex 3D coordinates. Losses: position + weighted mapping and
// Laplacian regularizers, all on coordinate-normalized quantities.

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "igcn/autodiff.hpp"
#include "igcn/camera.hpp"
#include "igcn/image.hpp"
#include "igcn/mesh.hpp"
#include "igcn/phantom.hpp"

namespace igcn {

struct BackboneConfig {
    std::vector<int> stage_widths{16, 32, 64, 128};
    int convs_per_stage = 2;
    int kernel_size = 3;
    std::vector<int> exposed_stages{1, 2, 3};  // activations pooled per vertex
    int head_after_stage = 1;  // head reads the pooled output of this stage

    int feature_dim() const {
        int f = 0;
        for (int s : exposed_stages) f += stage_widths[static_cast<std::size_t>(s)];
        return f;
    }
    void validate(int image_h, int image_w) const;
};

struct LossWeights {
    double lambda_map = 10.0;
    double lambda_laplacian = 1.0;
};

enum class ModelVariant { Full, NoMapping };

inline const char* variant_name(ModelVariant v) {
    return v == ModelVariant::Full ? "full" : "no-mapping";
}
ModelVariant parse_variant(const std::string& name);

struct ModelConfig {
    BackboneConfig backbone;
    int gcn_hidden = 128;
    int gcn_layers = 8;
    ModelVariant variant = ModelVariant::Full;
    bool self_loops = true;       // A + I renormalization in the graph operator
    bool residual_output = false; // predict displacement instead of coordinates
    int image_height = 128;
    int image_width = 128;
    LossWeights loss;
    double dropout_rate = 0.5;
};

template <typename S>
struct IgcnModelT {
    ModelConfig cfg;
    ad::ParameterStore<S> params;
    std::shared_ptr<const ad::TapeSparse<S>> op;   // normalized graph operator
    std::shared_ptr<const ad::TapeSparse<S>> lap;  // umbrella Laplacian matrix
    MeshGraph initial_mesh;
    Vec3 norm_scale{1.0, 1.0, 1.0};  // per-axis |coordinate| bound of the train targets

    void build_parameters(std::uint64_t seed);
    void attach_mesh(const MeshGraph& initial);
};

using IgcnModel = IgcnModelT<float>;

// Everything the forward pass needs for one sample, already normalized.
template <typename S>
struct SampleInput {
    Tensor<S> image;        // H x W x 1
    Tensor<S> init_coords;  // n x 3
    Tensor<S> proj_points;  // n x 2, p_i in unit-square units
    bool has_target = false;
    Tensor<S> target_coords;  // n x 3
    Tensor<S> target_proj;    // n x 2, q_i
    Tensor<S> target_lap;     // n x 3, umbrella of the normalized target
};

template <typename S>
struct ForwardNodes {
    ad::NodeId pred = -1;    // n x 3 normalized coordinates
    ad::NodeId warped = -1;  // n x 2 M(p_i)
    ad::NodeId loss_pos = -1, loss_map = -1, loss_lap = -1, loss_total = -1;
};

// `param_leaves` are tape leaves in params-store order (so gradient checking
// can drive the same graph); pass a dropout generator only when training.
template <typename S>
ForwardNodes<S> igcn_forward(ad::Tape<S>& tape, const IgcnModelT<S>& model,
                             const std::vector<ad::NodeId>& param_leaves,
                             const SampleInput<S>& input, bool training, Rng* dropout_rng);

template <typename S>
std::vector<ad::NodeId> push_parameter_leaves(ad::Tape<S>& tape, const IgcnModelT<S>& model) {
    std::vector<ad::NodeId> leaves;
    leaves.reserve(model.params.count());
    for (const auto& e : model.params.entries) leaves.push_back(tape.leaf(e.value));
    return leaves;
}

template <typename S>
SampleInput<S> make_sample_input(const MeshGraph& initial, const ProjectionCamera& camera,
                                 const Image& drr, const Vec3& norm_scale,
                                 const MeshGraph* target);

// Per-axis max |coordinate| over the target meshes (the normalization bound).
Vec3 coordinate_normalization(const std::vector<const MeshGraph*>& targets);

template <typename S>
MeshGraph denormalize_prediction(const Tensor<S>& coords, const MeshGraph& connectivity,
                                 const Vec3& norm_scale);

// ---------------------------------------------------------------------------
// Training / inference (float)
// ---------------------------------------------------------------------------

struct TrainingConfig {
    int epochs = 1000;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double dropout_rate = 0.5;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs; 0 = final checkpoint only
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double total = 0.0, pos = 0.0, map = 0.0, lap = 0.0;
    double rmse_mm = 0.0;
    double wall_ms = 0.0;  // nondeterministic; logged to the timing sidecar
};

struct TrainOutcome {
    std::vector<EpochLog> logs;
    bool diverged = false;
    int last_good_epoch = 0;
};

// Batch-size-1 loop: forward, total loss, backward, Adam, in a seeded sample
// order reshuffled per epoch. On divergence the parameters are rolled back to
// the last finished epoch and `diverged` is set.
TrainOutcome train_model(IgcnModel& model, const std::vector<SampleInput<float>>& samples,
                         const TrainingConfig& cfg,
                         const std::function<void(int, const IgcnModel&)>& on_checkpoint = {});

struct Prediction {
    MeshGraph mesh;
    double forward_ms = 0.0;
};

// Deterministic eval-mode forward (dropout is the identity).
Prediction predict_mesh(const IgcnModel& model, const Image& drr,
                        const ProjectionCamera& camera);

// Model checkpoint = parameters + enough metadata to rebuild the ModelConfig.
void save_model_checkpoint(const std::filesystem::path& path, const IgcnModel& model, long step,
                           const TrainingConfig& cfg);
IgcnModel load_model_checkpoint(const std::filesystem::path& path, const MeshGraph& initial);

} // namespace igcn

#include "igcn/model_impl.hpp"
