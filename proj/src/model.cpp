#include "igcn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace igcn {

void BackboneConfig::validate(int image_h, int image_w) const {
    if (stage_widths.empty()) throw ValidationError("backbone: no stages");
    if (convs_per_stage < 1) throw ValidationError("backbone: convs_per_stage must be >= 1");
    if (kernel_size % 2 == 0 || kernel_size < 1)
        throw ValidationError("backbone: kernel size must be odd");
    if (exposed_stages.empty()) throw ValidationError("backbone: no exposed stages");
    for (int s : exposed_stages)
        if (s < 0 || s >= static_cast<int>(stage_widths.size()))
            throw ValidationError("backbone: exposed stage out of range");
    if (head_after_stage < 0 || head_after_stage >= static_cast<int>(stage_widths.size()))
        throw ValidationError("backbone: head stage out of range");
    // Each pooling halves the spatial dims; they must stay even until the last stage.
    const int pools = static_cast<int>(stage_widths.size()) - 1;
    int h = image_h, w = image_w;
    for (int s = 0; s < pools; ++s) {
        if (h % 2 != 0 || w % 2 != 0)
            throw ValidationError("backbone: image dims not divisible by the pooling stack");
        h /= 2;
        w /= 2;
    }
    if (h < 1 || w < 1) throw ValidationError("backbone: too many pooling stages");
}

ModelVariant parse_variant(const std::string& name) {
    if (name == "full") return ModelVariant::Full;
    if (name == "no-mapping" || name == "no_mapping") return ModelVariant::NoMapping;
    throw ValidationError("variant: expected 'full' or 'no-mapping', got '" + name + "'");
}

Vec3 coordinate_normalization(const std::vector<const MeshGraph*>& targets) {
    if (targets.empty()) throw ValidationError("normalization: no target meshes");
    Vec3 s{0.0, 0.0, 0.0};
    for (const MeshGraph* m : targets) {
        for (const auto& v : m->vertices) {
            s.x = std::max(s.x, std::abs(v.x));
            s.y = std::max(s.y, std::abs(v.y));
            s.z = std::max(s.z, std::abs(v.z));
        }
    }
    if (s.x <= 0.0 || s.y <= 0.0 || s.z <= 0.0)
        throw ValidationError("normalization: degenerate coordinate extents");
    return s;
}

namespace {

double sample_rmse_mm(const Tensor<float>& pred, const Tensor<float>& target,
                      const Vec3& scale) {
    const int n = pred.dim(0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = (static_cast<double>(pred.at(i, 0)) - target.at(i, 0)) * scale.x;
        const double dy = (static_cast<double>(pred.at(i, 1)) - target.at(i, 1)) * scale.y;
        const double dz = (static_cast<double>(pred.at(i, 2)) - target.at(i, 2)) * scale.z;
        acc += dx * dx + dy * dy + dz * dz;
    }
    return std::sqrt(acc / n);
}

} // namespace

TrainOutcome train_model(IgcnModel& model, const std::vector<SampleInput<float>>& samples,
                         const TrainingConfig& cfg,
                         const std::function<void(int, const IgcnModel&)>& on_checkpoint) {
    if (samples.empty()) throw ValidationError("train: empty dataset");
    if (cfg.epochs < 1) throw ValidationError("train: epochs must be >= 1");
    for (const auto& s : samples)
        if (!s.has_target) throw ValidationError("train: every sample needs a target");

    ad::AdamState<float> adam;
    adam.lr = cfg.lr;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.eps;
    adam.init(model.params);

    model.cfg.dropout_rate = cfg.dropout_rate;

    TrainOutcome outcome;
    auto good_params = model.params;
    auto good_adam = adam;

    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    const std::uint64_t order_seed = derive_seed(cfg.seed, 0x0DE4);
    const std::uint64_t dropout_seed = derive_seed(cfg.seed, 0xD709);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Deterministic per-epoch reshuffle.
        Rng order_rng(derive_seed(order_seed, static_cast<std::uint64_t>(epoch)));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[order_rng.uniform_int(0, i)]);

        EpochLog log;
        log.epoch = epoch;
        bool bad = false;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const SampleInput<float>& sample = samples[static_cast<std::size_t>(order[pos])];
            Rng dropout_rng(derive_seed(
                dropout_seed, static_cast<std::uint64_t>(epoch) * 1000003ULL + pos));
            ad::Tape<float> tape;
            const auto leaves = push_parameter_leaves(tape, model);
            ForwardNodes<float> fwd;
            try {
                fwd = igcn_forward(tape, model, leaves, sample, true, &dropout_rng);
            } catch (const NumericalError&) {
                bad = true;
                break;
            }
            const double total = tape.val(fwd.loss_total).v[0];
            if (!std::isfinite(total)) {
                bad = true;
                break;
            }
            log.total += total;
            log.pos += tape.val(fwd.loss_pos).v[0];
            if (fwd.loss_map >= 0) log.map += tape.val(fwd.loss_map).v[0];
            log.lap += tape.val(fwd.loss_lap).v[0];
            log.rmse_mm +=
                sample_rmse_mm(tape.val(fwd.pred), sample.target_coords, model.norm_scale);

            tape.backward(fwd.loss_total);
            std::vector<Tensor<float>> grads;
            grads.reserve(leaves.size());
            for (const auto id : leaves) grads.push_back(tape.grad(id));
            try {
                ad::adam_step(model.params, grads, adam);
            } catch (const NumericalError&) {
                bad = true;
                break;
            }
        }
        if (bad) {
            model.params = good_params;
            adam = good_adam;
            outcome.diverged = true;
            break;
        }
        const double inv = 1.0 / static_cast<double>(samples.size());
        log.total *= inv;
        log.pos *= inv;
        log.map *= inv;
        log.lap *= inv;
        log.rmse_mm *= inv;
        log.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        outcome.logs.push_back(log);
        outcome.last_good_epoch = epoch;
        good_params = model.params;
        good_adam = adam;
        if (on_checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            on_checkpoint(epoch, model);
    }
    return outcome;
}

Prediction predict_mesh(const IgcnModel& model, const Image& drr,
                        const ProjectionCamera& camera) {
    if (drr.width != model.cfg.image_width || drr.height != model.cfg.image_height)
        throw ValidationError("predict: image resolution does not match the model");
    const auto input = make_sample_input<float>(model.initial_mesh, camera, drr,
                                                model.norm_scale, nullptr);
    const auto t0 = std::chrono::steady_clock::now();
    ad::Tape<float> tape;
    const auto leaves = push_parameter_leaves(tape, model);
    const auto fwd = igcn_forward(tape, model, leaves, input, false, nullptr);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    Prediction out;
    out.mesh = denormalize_prediction(tape.val(fwd.pred), model.initial_mesh, model.norm_scale);
    out.forward_ms = ms;
    return out;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

} // namespace

void save_model_checkpoint(const std::filesystem::path& path, const IgcnModel& model, long step,
                           const TrainingConfig& cfg) {
    ad::CheckpointMeta meta;
    meta.step = step;
    meta.lr = cfg.lr;
    meta.beta1 = cfg.beta1;
    meta.beta2 = cfg.beta2;
    meta.eps = cfg.eps;
    char buf[128];
    meta.set("variant", variant_name(model.cfg.variant));
    meta.set("stage_widths", join_ints(model.cfg.backbone.stage_widths));
    meta.set("convs_per_stage", std::to_string(model.cfg.backbone.convs_per_stage));
    meta.set("kernel_size", std::to_string(model.cfg.backbone.kernel_size));
    meta.set("exposed_stages", join_ints(model.cfg.backbone.exposed_stages));
    meta.set("head_after_stage", std::to_string(model.cfg.backbone.head_after_stage));
    meta.set("gcn_hidden", std::to_string(model.cfg.gcn_hidden));
    meta.set("gcn_layers", std::to_string(model.cfg.gcn_layers));
    meta.set("self_loops", model.cfg.self_loops ? "1" : "0");
    meta.set("residual_output", model.cfg.residual_output ? "1" : "0");
    meta.set("image_height", std::to_string(model.cfg.image_height));
    meta.set("image_width", std::to_string(model.cfg.image_width));
    std::snprintf(buf, sizeof(buf), "%.17g", model.cfg.loss.lambda_map);
    meta.set("lambda_map", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", model.cfg.loss.lambda_laplacian);
    meta.set("lambda_laplacian", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", model.cfg.dropout_rate);
    meta.set("dropout_rate", buf);
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", model.norm_scale.x, model.norm_scale.y,
                  model.norm_scale.z);
    meta.set("norm_scale", buf);
    ad::save_checkpoint(path, model.params, meta);
}

IgcnModel load_model_checkpoint(const std::filesystem::path& path, const MeshGraph& initial) {
    auto [params, meta] = ad::load_checkpoint(path);
    const auto req = [&](const char* key) -> const std::string& {
        const std::string* v = meta.get(key);
        if (!v) throw ValidationError(std::string("checkpoint: missing meta key ") + key);
        return *v;
    };
    IgcnModel model;
    model.cfg.variant = parse_variant(req("variant"));
    model.cfg.backbone.stage_widths = split_ints(req("stage_widths"));
    model.cfg.backbone.convs_per_stage = std::stoi(req("convs_per_stage"));
    model.cfg.backbone.kernel_size = std::stoi(req("kernel_size"));
    model.cfg.backbone.exposed_stages = split_ints(req("exposed_stages"));
    model.cfg.backbone.head_after_stage = std::stoi(req("head_after_stage"));
    model.cfg.gcn_hidden = std::stoi(req("gcn_hidden"));
    model.cfg.gcn_layers = std::stoi(req("gcn_layers"));
    model.cfg.self_loops = req("self_loops") == "1";
    model.cfg.residual_output = req("residual_output") == "1";
    model.cfg.image_height = std::stoi(req("image_height"));
    model.cfg.image_width = std::stoi(req("image_width"));
    model.cfg.loss.lambda_map = std::stod(req("lambda_map"));
    model.cfg.loss.lambda_laplacian = std::stod(req("lambda_laplacian"));
    model.cfg.dropout_rate = std::stod(req("dropout_rate"));
    {
        std::istringstream ss(req("norm_scale"));
        ss >> model.norm_scale.x >> model.norm_scale.y >> model.norm_scale.z;
    }
    // Rebuild the parameter skeleton to verify shapes, then adopt the payload.
    IgcnModel skeleton;
    skeleton.cfg = model.cfg;
    skeleton.build_parameters(0);
    if (skeleton.params.count() != params.count())
        throw ValidationError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.count(); ++i) {
        if (params.entries[i].name != skeleton.params.entries[i].name ||
            params.entries[i].value.shape != skeleton.params.entries[i].value.shape)
            throw ValidationError("checkpoint: parameter layout mismatch at " +
                                  params.entries[i].name);
    }
    model.params = std::move(params);
    model.attach_mesh(initial);
    return model;
}

} // namespace igcn
