#pragma once

// Template implementations for model.hpp.

#include <cstdio>

namespace igcn {

namespace model_detail {

inline std::string conv_w(int stage, int j) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "bb.s%d.c%d.w", stage, j);
    return buf;
}
inline std::string conv_b(int stage, int j) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "bb.s%d.c%d.b", stage, j);
    return buf;
}
inline std::string gcn_w(int layer) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gcn.l%d.w", layer);
    return buf;
}

} // namespace model_detail

template <typename S>
void IgcnModelT<S>::build_parameters(std::uint64_t seed) {
    cfg.backbone.validate(cfg.image_height, cfg.image_width);
    if (cfg.gcn_layers < 1) throw ValidationError("model: gcn_layers must be >= 1");
    params = ad::ParameterStore<S>{};
    const auto& bb = cfg.backbone;
    const int k = bb.kernel_size;
    int cin = 1;
    for (std::size_t s = 0; s < bb.stage_widths.size(); ++s) {
        const int cout = bb.stage_widths[s];
        for (int j = 0; j < bb.convs_per_stage; ++j) {
            const auto wn = model_detail::conv_w(static_cast<int>(s), j);
            params.add(wn, {k, k, cin, cout});
            ad::init_uniform_fan(params, wn, k * k * cin, k * k * cout, seed);
            params.add(model_detail::conv_b(static_cast<int>(s), j), {cout});  // zeros
            cin = cout;
        }
    }
    // Deformation head starts at the identity mapping: zero weights and bias.
    const int head_cin = bb.stage_widths[static_cast<std::size_t>(bb.head_after_stage)];
    params.add("head.w", {1, 1, head_cin, 2});
    params.add("head.b", {2});
    // GCN stack: (F + 3) -> hidden x (L-1) -> 3.
    int fin = bb.feature_dim() + 3;
    for (int l = 0; l < cfg.gcn_layers; ++l) {
        const int fout = l + 1 == cfg.gcn_layers ? 3 : cfg.gcn_hidden;
        const auto wn = model_detail::gcn_w(l);
        params.add(wn, {fin, fout});
        ad::init_uniform_fan(params, wn, fin, fout, seed);
        fin = fout;
    }
}

template <typename S>
void IgcnModelT<S>::attach_mesh(const MeshGraph& initial) {
    validate_mesh(initial);
    initial_mesh = initial;
    const SparseMatrix adj = build_adjacency(initial);
    op = std::make_shared<ad::TapeSparse<S>>(
        ad::TapeSparse<S>::from(normalized_operator(adj, cfg.self_loops).m));
    lap = std::make_shared<ad::TapeSparse<S>>(ad::TapeSparse<S>::from(umbrella_matrix(initial)));
}

template <typename S>
ForwardNodes<S> igcn_forward(ad::Tape<S>& tape, const IgcnModelT<S>& model,
                             const std::vector<ad::NodeId>& param_leaves,
                             const SampleInput<S>& input, bool training, Rng* dropout_rng) {
    const ModelConfig& cfg = model.cfg;
    const auto& bb = cfg.backbone;
    if (input.image.rank() != 3 || input.image.dim(0) != cfg.image_height ||
        input.image.dim(1) != cfg.image_width || input.image.dim(2) != 1)
        throw ValidationError("forward: image resolution does not match the model");
    const auto leaf_of = [&](const std::string& name) {
        const int i = model.params.find(name);
        if (i < 0) throw ValidationError("forward: missing parameter " + name);
        return param_leaves[static_cast<std::size_t>(i)];
    };

    // Backbone: convs_per_stage 3x3 conv+ReLU blocks per stage, 2x pooling
    // between stages. Exposed activations are the pre-pool stage outputs.
    ad::NodeId x = tape.leaf(input.image);
    std::vector<ad::NodeId> exposed(bb.stage_widths.size(), -1);
    ad::NodeId head_input = -1;
    for (int s = 0; s < static_cast<int>(bb.stage_widths.size()); ++s) {
        for (int j = 0; j < bb.convs_per_stage; ++j)
            x = ad::relu(tape,
                         ad::conv2d(tape, x, leaf_of(model_detail::conv_w(s, j)),
                                    leaf_of(model_detail::conv_b(s, j)), 1));
        exposed[static_cast<std::size_t>(s)] = x;
        if (s + 1 < static_cast<int>(bb.stage_widths.size())) x = ad::max_pool2d(tape, x);
        if (s == bb.head_after_stage) head_input = x;
    }

    const ad::NodeId points = tape.leaf(input.proj_points);
    ad::NodeId warped = points;
    if (cfg.variant == ModelVariant::Full) {
        // 2-channel displacement field in normalized-image units.
        const ad::NodeId field =
            ad::conv2d(tape, head_input, leaf_of("head.w"), leaf_of("head.b"), 1);
        const auto& fshape = tape.val(field).shape;
        const ad::NodeId shift =
            ad::bilinear_gather(tape, field, points, fshape[1], fshape[0]);
        warped = ad::add(tape, points, shift);
    }

    // Perceptual pooling at the warped projections, one gather per exposed
    // stage with coordinates rescaled to that stage's resolution.
    ad::NodeId feats = -1;
    for (int s : bb.exposed_stages) {
        const ad::NodeId act = exposed[static_cast<std::size_t>(s)];
        const auto& ashape = tape.val(act).shape;
        const ad::NodeId pooled = ad::bilinear_gather(tape, act, warped, ashape[1], ashape[0]);
        feats = feats < 0 ? pooled : ad::concat(tape, feats, pooled, 1);
    }

    const ad::NodeId coords = tape.leaf(input.init_coords);
    ad::NodeId vertex_feats = ad::concat(tape, feats, coords, 1);
    if (training && cfg.dropout_rate > 0.0) {
        if (!dropout_rng) throw ValidationError("forward: training needs a dropout generator");
        vertex_feats = ad::dropout(tape, vertex_feats, cfg.dropout_rate, true, *dropout_rng);
    }

    ad::NodeId g = vertex_feats;
    for (int l = 0; l < cfg.gcn_layers; ++l)
        g = ad::graph_convolution(tape, g, model.op, leaf_of(model_detail::gcn_w(l)),
                                  l + 1 < cfg.gcn_layers);

    ForwardNodes<S> out;
    out.pred = cfg.residual_output ? ad::add(tape, coords, g) : g;
    out.warped = warped;

    if (input.has_target) {
        out.loss_pos = ad::mse_rows(tape, out.pred, input.target_coords);
        const ad::NodeId lap_pred = ad::spmm(tape, model.lap, out.pred);
        out.loss_lap = ad::mse_rows(tape, lap_pred, input.target_lap);
        std::vector<ad::NodeId> terms{out.loss_pos};
        std::vector<double> weights{1.0};
        if (cfg.variant == ModelVariant::Full) {
            out.loss_map = ad::mse_rows(tape, warped, input.target_proj);
            terms.push_back(out.loss_map);
            weights.push_back(cfg.loss.lambda_map);
        }
        terms.push_back(out.loss_lap);
        weights.push_back(cfg.loss.lambda_laplacian);
        out.loss_total = ad::weighted_sum(tape, terms, weights);
        const double total = static_cast<double>(tape.val(out.loss_total).v[0]);
        if (!std::isfinite(total)) throw NumericalError("forward: non-finite total loss");
    }
    return out;
}

template <typename S>
SampleInput<S> make_sample_input(const MeshGraph& initial, const ProjectionCamera& camera,
                                 const Image& drr, const Vec3& norm_scale,
                                 const MeshGraph* target) {
    if (norm_scale.x <= 0.0 || norm_scale.y <= 0.0 || norm_scale.z <= 0.0)
        throw ValidationError("sample: normalization scale must be positive");
    if (drr.width != camera.width || drr.height != camera.height)
        throw ValidationError("sample: image dimensions do not match the camera");
    const int n = initial.vertex_count();
    SampleInput<S> s;
    s.image = Tensor<S>({drr.height, drr.width, 1});
    for (std::size_t i = 0; i < drr.px.size(); ++i) s.image.v[i] = static_cast<S>(drr.px[i]);

    s.init_coords = Tensor<S>({n, 3});
    for (int i = 0; i < n; ++i) {
        const Vec3& v = initial.vertices[static_cast<std::size_t>(i)];
        s.init_coords.at(i, 0) = static_cast<S>(v.x / norm_scale.x);
        s.init_coords.at(i, 1) = static_cast<S>(v.y / norm_scale.y);
        s.init_coords.at(i, 2) = static_cast<S>(v.z / norm_scale.z);
    }
    s.proj_points = Tensor<S>({n, 2});
    for (int i = 0; i < n; ++i) {
        const PixelPoint p = normalize_pixel(
            project_vertex(camera, initial.vertices[static_cast<std::size_t>(i)]), camera);
        s.proj_points.at(i, 0) = static_cast<S>(p.u);
        s.proj_points.at(i, 1) = static_cast<S>(p.v);
    }

    if (target) {
        if (target->vertex_count() != n || target->triangles != initial.triangles)
            throw ValidationError("sample: target mesh must share the initial connectivity");
        s.has_target = true;
        s.target_coords = Tensor<S>({n, 3});
        for (int i = 0; i < n; ++i) {
            const Vec3& v = target->vertices[static_cast<std::size_t>(i)];
            s.target_coords.at(i, 0) = static_cast<S>(v.x / norm_scale.x);
            s.target_coords.at(i, 1) = static_cast<S>(v.y / norm_scale.y);
            s.target_coords.at(i, 2) = static_cast<S>(v.z / norm_scale.z);
        }
        s.target_proj = Tensor<S>({n, 2});
        for (int i = 0; i < n; ++i) {
            const PixelPoint q = normalize_pixel(
                project_vertex(camera, target->vertices[static_cast<std::size_t>(i)]), camera);
            s.target_proj.at(i, 0) = static_cast<S>(q.u);
            s.target_proj.at(i, 1) = static_cast<S>(q.v);
        }
        // Umbrella of the normalized target, via the shared connectivity.
        const SparseMatrix lap = umbrella_matrix(initial);
        s.target_lap = Tensor<S>({n, 3});
        std::vector<double> col(static_cast<std::size_t>(n)), res(static_cast<std::size_t>(n));
        for (int axis = 0; axis < 3; ++axis) {
            for (int i = 0; i < n; ++i)
                col[static_cast<std::size_t>(i)] =
                    static_cast<double>(s.target_coords.at(i, axis));
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int kk = lap.row_ptr[i]; kk < lap.row_ptr[i + 1]; ++kk)
                    acc += lap.vals[kk] * col[static_cast<std::size_t>(lap.col_idx[kk])];
                res[static_cast<std::size_t>(i)] = acc;
            }
            for (int i = 0; i < n; ++i)
                s.target_lap.at(i, axis) = static_cast<S>(res[static_cast<std::size_t>(i)]);
        }
    }
    return s;
}

template <typename S>
MeshGraph denormalize_prediction(const Tensor<S>& coords, const MeshGraph& connectivity,
                                 const Vec3& norm_scale) {
    if (coords.rank() != 2 || coords.dim(1) != 3 ||
        coords.dim(0) != connectivity.vertex_count())
        throw ValidationError("denormalize: coordinate shape mismatch");
    MeshGraph out;
    out.triangles = connectivity.triangles;
    out.vertices.resize(static_cast<std::size_t>(coords.dim(0)));
    for (int i = 0; i < coords.dim(0); ++i)
        out.vertices[static_cast<std::size_t>(i)] = {
            static_cast<double>(coords.at(i, 0)) * norm_scale.x,
            static_cast<double>(coords.at(i, 1)) * norm_scale.y,
            static_cast<double>(coords.at(i, 2)) * norm_scale.z};
    return out;
}

} // namespace igcn
