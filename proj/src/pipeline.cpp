#include "igcn/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "igcn/rng.hpp"

namespace igcn::pipeline {

namespace fs = std::filesystem;

GenDataSummary run_gen_data(const RunConfig& config) {
    const Dataset ds = build_dataset(config.dataset);
    write_dataset(ds, config.dataset_dir);
    write_config(config, fs::path(config.dataset_dir) / "effective_config.txt");
    if (config.save_volumes) {
        const VoxelVolume grid = make_phantom_grid(
            config.dataset.phantom, config.dataset.grid_spacing_mm,
            config.dataset.grid_margin_mm + std::abs(config.dataset.deform.translation_mean.z) +
                3.0 * config.dataset.deform.translation_sigma.z);
        save_volume(base_attenuation_volume(config.dataset.phantom, grid),
                    fs::path(config.dataset_dir) / "base_volume.hdr");
    }
    GenDataSummary summary;
    for (const auto& g : ds.samples)
        (g.record.split == "train" ? summary.train_count : summary.test_count)++;
    summary.manifest = fs::path(config.dataset_dir) / "manifest.csv";
    return summary;
}

namespace {

IgcnModel make_model(const RunConfig& config, ModelVariant variant,
                     const LoadedDataset& data) {
    IgcnModel model;
    model.cfg.backbone = config.backbone;
    model.cfg.gcn_hidden = config.gcn_hidden;
    model.cfg.gcn_layers = config.gcn_layers;
    model.cfg.variant = variant;
    model.cfg.self_loops = config.self_loops;
    model.cfg.residual_output = config.residual_output;
    model.cfg.image_height = data.camera.height;
    model.cfg.image_width = data.camera.width;
    model.cfg.loss = config.loss;
    model.cfg.dropout_rate = config.train.dropout_rate;
    model.build_parameters(config.seed);
    model.attach_mesh(data.initial);
    return model;
}

} // namespace

TrainArtifacts run_train(const RunConfig& config, ModelVariant variant) {
    const LoadedDataset data = load_dataset(config.dataset_dir);
    const auto train_records = data.split("train");
    if (train_records.empty()) throw ValidationError("train: dataset has no train split");

    IgcnModel model = make_model(config, variant, data);

    // Per-axis normalization bound from the train-split targets.
    std::vector<MeshGraph> targets;
    targets.reserve(train_records.size());
    for (const auto* r : train_records) targets.push_back(load_obj(data.dir / r->target_path));
    std::vector<const MeshGraph*> target_ptrs;
    for (const auto& t : targets) target_ptrs.push_back(&t);
    model.norm_scale = coordinate_normalization(target_ptrs);

    std::vector<SampleInput<float>> samples;
    samples.reserve(train_records.size());
    for (std::size_t i = 0; i < train_records.size(); ++i) {
        const Image drr = load_pgm16(data.dir / train_records[i]->drr_path);
        samples.push_back(
            make_sample_input<float>(data.initial, data.camera, drr, model.norm_scale,
                                     &targets[i]));
    }

    fs::create_directories(config.checkpoint_dir);
    const std::string vname = variant_name(variant);
    TrainArtifacts art;
    art.checkpoint = fs::path(config.checkpoint_dir) / (vname + ".ckpt");
    art.log_csv = fs::path(config.checkpoint_dir) / ("train_log_" + vname + ".csv");
    art.timing_csv = fs::path(config.checkpoint_dir) / ("train_timing_" + vname + ".csv");

    const auto on_checkpoint = [&](int epoch, const IgcnModel& m) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_epoch%04d.ckpt", vname.c_str(), epoch);
        save_model_checkpoint(fs::path(config.checkpoint_dir) / name, m,
                              static_cast<long>(epoch) * static_cast<long>(samples.size()),
                              config.train);
    };
    art.outcome = train_model(model, samples, config.train, on_checkpoint);

    {
        std::ofstream log(art.log_csv);
        std::ofstream timing(art.timing_csv);
        if (!log || !timing) throw ValidationError("train: cannot write logs");
        log << "epoch,total,loss_pos,loss_map,loss_laplacian,rmse_mm\n";
        timing << "epoch,wall_ms\n";
        char buf[192];
        for (const auto& e : art.outcome.logs) {
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.total,
                          e.pos, e.map, e.lap, e.rmse_mm);
            log << buf;
            std::snprintf(buf, sizeof(buf), "%d,%.3f\n", e.epoch, e.wall_ms);
            timing << buf;
        }
    }
    write_config(config, fs::path(config.checkpoint_dir) / "effective_config.txt");

    const long steps =
        static_cast<long>(art.outcome.last_good_epoch) * static_cast<long>(samples.size());
    save_model_checkpoint(art.checkpoint, model, steps, config.train);
    if (art.outcome.diverged)
        throw NumericalError("train: diverged after epoch " +
                             std::to_string(art.outcome.last_good_epoch) +
                             "; last good checkpoint written to " + art.checkpoint.string());
    return art;
}

PredictArtifacts run_predict(const RunConfig& config, const fs::path& checkpoint,
                             int sample_id) {
    const LoadedDataset data = load_dataset(config.dataset_dir);
    const SampleRecord& record = data.record_by_id(sample_id);
    const IgcnModel model = load_model_checkpoint(checkpoint, data.initial);
    const Image drr = load_pgm16(data.dir / record.drr_path);
    const Prediction pred = predict_mesh(model, drr, data.camera);

    fs::create_directories(config.report_dir);
    char name[96];
    std::snprintf(name, sizeof(name), "pred_%s_%04d.obj", variant_name(model.cfg.variant),
                  sample_id);
    PredictArtifacts art;
    art.obj = fs::path(config.report_dir) / name;
    art.forward_ms = pred.forward_ms;
    save_obj(pred.mesh, art.obj);

    const fs::path timing_path = fs::path(config.report_dir) / "predict_timing.csv";
    const bool fresh = !fs::exists(timing_path);
    std::ofstream timing(timing_path, std::ios::app);
    if (fresh) timing << "sample_id,variant,forward_ms\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.3f\n", sample_id,
                  variant_name(model.cfg.variant), pred.forward_ms);
    timing << buf;
    return art;
}

EvalArtifacts run_eval(const RunConfig& config, const std::vector<fs::path>& checkpoints,
                       bool with_oracle) {
    const LoadedDataset data = load_dataset(config.dataset_dir);
    const auto test_records = data.split("test");
    if (test_records.empty()) throw ValidationError("eval: dataset has no test split");

    std::vector<IgcnModel> models;
    std::vector<std::string> order{"Initial"};
    if (with_oracle) order.emplace_back("GroundTruth");
    for (const auto& ck : checkpoints) {
        models.push_back(load_model_checkpoint(ck, data.initial));
        const std::string name = variant_name(models.back().cfg.variant);
        for (const auto& existing : order)
            if (existing == name)
                throw ValidationError("eval: duplicate variant column '" + name + "'");
        order.push_back(name);
    }

    // Samples are independent and the models are read-only, so the test split
    // evaluates in parallel; rows land in per-sample slots to keep the report
    // order deterministic.
    const std::size_t per_sample = order.size();
    std::vector<MetricsRow> rows(test_records.size() * per_sample);
    std::vector<std::string> errors(test_records.size());
    kern::for_each_index(
        static_cast<std::int64_t>(test_records.size()), kern::default_exec(),
        [&](std::int64_t si) {
            try {
                const SampleRecord& record = *test_records[static_cast<std::size_t>(si)];
                const TrainingSample sample = data.load_sample(record);
                const auto metrics_for = [&](const MeshGraph& predicted, double ms) {
                    MetricsRow row;
                    row.sample_id = record.id;
                    row.md_mm = mean_distance(predicted, sample.target, kern::Exec::Serial);
                    row.rmse_mm = rmse_corresponding(predicted, sample.target);
                    row.dsc_pct = 100.0 * dice_coefficient(predicted, sample.target,
                                                           config.dice_spacing_mm,
                                                           kern::Exec::Serial);
                    row.forward_ms = ms;
                    return row;
                };
                MetricsRow* slot = rows.data() + static_cast<std::size_t>(si) * per_sample;
                {
                    MetricsRow row = metrics_for(sample.initial, 0.0);
                    row.variant = "Initial";
                    *slot++ = row;
                }
                if (with_oracle) {
                    MetricsRow row = metrics_for(sample.target, 0.0);
                    row.variant = "GroundTruth";
                    *slot++ = row;
                }
                for (const auto& model : models) {
                    const Prediction pred = predict_mesh(model, sample.drr, sample.camera);
                    MetricsRow row = metrics_for(pred.mesh, pred.forward_ms);
                    row.variant = variant_name(model.cfg.variant);
                    *slot++ = row;
                }
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(si)] = e.what();
            }
        });
    for (const auto& e : errors)
        if (!e.empty()) throw ValidationError("eval: " + e);

    EvalArtifacts art;
    art.report = summarize(std::move(rows), order);
    fs::create_directories(config.report_dir);
    art.csv = fs::path(config.report_dir) / "report.csv";
    art.table = fs::path(config.report_dir) / "report.txt";
    write_report_csv(art.report, art.csv);
    write_report_table(art.report, art.table);
    write_config(config, fs::path(config.report_dir) / "effective_config.txt");
    return art;
}

// ---------------------------------------------------------------------------
// Gradient-check suite
// ---------------------------------------------------------------------------

namespace {

using ad::NodeId;
using ad::Tape;
using DStore = ad::ParameterStore<double>;

void fill_uniform(Tensor<double>& t, Rng& rng, double lo, double hi) {
    for (auto& v : t.v) v = rng.uniform(lo, hi);
}

// Values bounded away from zero so ReLU kinks stay clear of the FD probes.
void fill_signed_away_from_zero(Tensor<double>& t, Rng& rng, double margin) {
    for (auto& v : t.v) {
        const double u = rng.uniform(-1.0, 1.0);
        v = u >= 0.0 ? u + margin : u - margin;
    }
}

MeshGraph cube_mesh(double half = 20.0) {
    MeshGraph m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back({(i & 1 ? half : -half), (i & 2 ? half : -half),
                              (i & 4 ? half : -half)});
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

GradCheckRow check_op(const std::string& name, DStore& params, const ad::BuildFn& build,
                      double tol, double h = 1e-5, int samples_per_param = 6) {
    const auto res = ad::gradient_check(params, build, h, 0x9c0ffee + params.count(),
                                        samples_per_param);
    GradCheckRow row;
    row.op = name;
    row.max_rel_err = res.max_rel_err;
    row.tolerance = tol;
    row.pass = res.max_rel_err < tol;
    return row;
}

GradCheckRow check_conv2d() {
    GradCheckRow worst;
    for (const int stride : {1, 2}) {
        DStore params;
        Rng rng(derive_seed(11, stride));
        params.add("x", {6, 4, 2});
        params.add("w", {3, 3, 2, 3});
        params.add("b", {3});
        fill_uniform(params["x"], rng, -1.0, 1.0);
        fill_uniform(params["w"], rng, -0.7, 0.7);
        fill_uniform(params["b"], rng, -0.3, 0.3);
        const auto row = check_op(
            "conv2d", params,
            [stride](Tape<double>& t, const std::vector<NodeId>& l) {
                return ad::sum_squares(t, ad::conv2d(t, l[0], l[1], l[2], stride));
            },
            1e-4);
        if (row.max_rel_err >= worst.max_rel_err) worst = row;
    }
    return worst;
}

GradCheckRow check_max_pool2d() {
    DStore params;
    Rng rng(23);
    params.add("x", {4, 6, 3});
    fill_uniform(params["x"], rng, 0.0, 1.0);
    return check_op(
        "max_pool2d", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::max_pool2d(t, l[0]));
        },
        1e-4);
}

GradCheckRow check_relu() {
    DStore params;
    Rng rng(29);
    params.add("x", {5, 7});
    fill_signed_away_from_zero(params["x"], rng, 0.05);
    return check_op(
        "relu", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::relu(t, l[0]));
        },
        1e-4);
}

GradCheckRow check_dense() {
    DStore params;
    Rng rng(31);
    params.add("x", {6});
    params.add("w", {6, 4});
    params.add("b", {4});
    fill_uniform(params["x"], rng, -1.0, 1.0);
    fill_uniform(params["w"], rng, -1.0, 1.0);
    fill_uniform(params["b"], rng, -1.0, 1.0);
    return check_op(
        "dense", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::dense(t, l[0], l[1], l[2]));
        },
        1e-4);
}

GradCheckRow check_concat() {
    DStore params;
    Rng rng(37);
    params.add("a", {3, 4});
    params.add("b", {3, 2});
    fill_uniform(params["a"], rng, -1.0, 1.0);
    fill_uniform(params["b"], rng, -1.0, 1.0);
    return check_op(
        "concat", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::concat(t, l[0], l[1], 1));
        },
        1e-4);
}

GradCheckRow check_dropout() {
    DStore params;
    Rng rng(41);
    params.add("x", {8, 5});
    fill_uniform(params["x"], rng, -1.0, 1.0);
    return check_op(
        "dropout", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            Rng mask_rng(777);  // same mask on every rebuild
            return ad::sum_squares(t, ad::dropout(t, l[0], 0.5, true, mask_rng));
        },
        1e-4);
}

GradCheckRow check_graph_convolution() {
    DStore params;
    Rng rng(43);
    const MeshGraph mesh = cube_mesh();
    const std::shared_ptr<const ad::TapeSparse<double>> op = std::make_shared<ad::TapeSparse<double>>(
        ad::TapeSparse<double>::from(normalized_operator(build_adjacency(mesh), true).m));
    params.add("x", {8, 4});
    params.add("w", {4, 3});
    fill_uniform(params["x"], rng, -1.0, 1.0);
    fill_uniform(params["w"], rng, -1.0, 1.0);
    return check_op(
        "graph_convolution", params,
        [op](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::graph_convolution(t, l[0], op, l[1], false));
        },
        1e-4);
}

GradCheckRow check_bilinear_sample() {
    DStore params;
    Rng rng(47);
    params.add("map", {5, 6, 3});
    params.add("points", {7, 2});
    fill_uniform(params["map"], rng, -1.0, 1.0);
    // Normalized points chosen so the scaled coordinates stay at least 0.01
    // texel away from integer grid lines and from the clamp border.
    auto& pts = params["points"];
    for (int i = 0; i < 7; ++i) {
        pts.at(i, 0) = (0.5 + 0.3 * rng.uniform(-1.0, 1.0) + i % 3 + 1.0) / 6.0;
        pts.at(i, 1) = (0.5 + 0.3 * rng.uniform(-1.0, 1.0) + i % 2 + 1.0) / 5.0;
    }
    return check_op(
        "bilinear_sample", params,
        [](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::bilinear_gather(t, l[0], l[1], 6.0, 5.0));
        },
        1e-4, 1e-6);
}

GradCheckRow check_umbrella_apply() {
    DStore params;
    Rng rng(53);
    const MeshGraph mesh = cube_mesh();
    const std::shared_ptr<const ad::TapeSparse<double>> lap = std::make_shared<ad::TapeSparse<double>>(
        ad::TapeSparse<double>::from(umbrella_matrix(mesh)));
    params.add("x", {8, 3});
    fill_uniform(params["x"], rng, -1.0, 1.0);
    return check_op(
        "umbrella_apply", params,
        [lap](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::sum_squares(t, ad::spmm(t, lap, l[0]));
        },
        1e-4);
}

GradCheckRow check_mse_rows() {
    DStore params;
    Rng rng(59);
    params.add("a", {5, 3});
    fill_uniform(params["a"], rng, -1.0, 1.0);
    Tensor<double> target({5, 3});
    fill_uniform(target, rng, -1.0, 1.0);
    return check_op(
        "mse_rows", params,
        [target](Tape<double>& t, const std::vector<NodeId>& l) {
            return ad::mse_rows(t, l[0], target);
        },
        1e-4);
}

struct TinyRig {
    IgcnModelT<double> model;
    SampleInput<double> input;
};

// 8-vertex cube and a 16x16 image; exercises every layer of the full model.
TinyRig make_tiny_rig() {
    TinyRig rig;
    rig.model.cfg.backbone.stage_widths = {2, 3, 4, 5};
    rig.model.cfg.backbone.convs_per_stage = 1;
    rig.model.cfg.backbone.exposed_stages = {1, 2, 3};
    rig.model.cfg.backbone.head_after_stage = 1;
    rig.model.cfg.gcn_hidden = 6;
    rig.model.cfg.gcn_layers = 8;
    rig.model.cfg.image_height = 16;
    rig.model.cfg.image_width = 16;
    rig.model.cfg.dropout_rate = 0.5;
    rig.model.build_parameters(0xA11CE);
    // A zero head would hide the mapping-path gradients; perturb it.
    {
        Rng rng(61);
        fill_uniform(rig.model.params["head.w"], rng, -0.05, 0.05);
        fill_uniform(rig.model.params["head.b"], rng, -0.01, 0.01);
    }
    const MeshGraph cube = cube_mesh();
    rig.model.attach_mesh(cube);

    DeformationField field;
    field.translation = {2.0, 1.0, 4.0};
    field.rbfs.push_back({{5.0, 0.0, 0.0}, 25.0, {1.5, -1.0, 2.0}});
    const MeshGraph target = apply_deformation(cube, field);
    std::vector<const MeshGraph*> tp{&target};
    rig.model.norm_scale = coordinate_normalization(tp);

    const ProjectionCamera camera = make_orthographic_camera(16, 16, 0.25);
    Image drr(16, 16);
    Rng rng(67);
    for (auto& p : drr.px) p = static_cast<float>(rng.uniform());
    rig.input = make_sample_input<double>(cube, camera, drr, rig.model.norm_scale, &target);
    return rig;
}

GradCheckRow check_end_to_end() {
    TinyRig rig = make_tiny_rig();
    const auto build = [&rig](Tape<double>& t, const std::vector<NodeId>& leaves) {
        Rng dropout_rng(4242);
        const auto fwd = igcn_forward(t, rig.model, leaves, rig.input, true, &dropout_rng);
        return fwd.loss_total;
    };
    const auto res = ad::gradient_check(rig.model.params, build, 1e-5, 0xE2E, 4);
    GradCheckRow row;
    row.op = "loss_total (end-to-end)";
    row.max_rel_err = res.max_rel_err;
    row.tolerance = 1e-3;
    row.pass = res.max_rel_err < row.tolerance;
    return row;
}

} // namespace

GradCheckOutcome run_gradcheck() {
    GradCheckOutcome outcome;
    outcome.rows.push_back(check_conv2d());
    outcome.rows.push_back(check_max_pool2d());
    outcome.rows.push_back(check_relu());
    outcome.rows.push_back(check_dense());
    outcome.rows.push_back(check_concat());
    outcome.rows.push_back(check_dropout());
    outcome.rows.push_back(check_graph_convolution());
    outcome.rows.push_back(check_bilinear_sample());
    outcome.rows.push_back(check_umbrella_apply());
    outcome.rows.push_back(check_mse_rows());
    outcome.rows.push_back(check_end_to_end());
    for (const auto& row : outcome.rows) outcome.all_pass = outcome.all_pass && row.pass;
    return outcome;
}

// ---------------------------------------------------------------------------
// Kernel benchmark
// ---------------------------------------------------------------------------

namespace {

template <typename F>
double time_ms(F&& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        best = std::min(best, ms);
    }
    return best;
}

} // namespace

void run_bench(std::ostream& os, const RunConfig& config) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-26s %12s %12s %9s %7s\n", "kernel", "serial[ms]",
                  "parallel[ms]", "speedup", "match");
    os << buf;

    const auto report = [&](const char* name, double serial_ms, double parallel_ms, bool match) {
        std::snprintf(buf, sizeof(buf), "%-26s %12.2f %12.2f %8.2fx %7s\n", name, serial_ms,
                      parallel_ms, serial_ms / parallel_ms, match ? "yes" : "NO");
        os << buf;
    };

    Rng rng(1);
    // conv2d on a desk-scale stage-1 shape.
    {
        const int h = 128, w = 128, cin = 16, cout = 16, k = 3;
        std::vector<float> x(static_cast<std::size_t>(h) * w * cin), kw(9ULL * cin * cout),
            b(cout);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : kw) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<float> ys(static_cast<std::size_t>(h) * w * cout), yp(ys.size());
        const double ts = time_ms(
            [&] { kern::conv2d_forward(x.data(), h, w, cin, kw.data(), k, cout, b.data(), 1,
                                       ys.data(), kern::Exec::Serial); },
            3);
        const double tp = time_ms(
            [&] { kern::conv2d_forward(x.data(), h, w, cin, kw.data(), k, cout, b.data(), 1,
                                       yp.data(), kern::Exec::Parallel); },
            3);
        report("conv2d fwd 128x128x16", ts, tp,
               std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0);

        std::vector<float> gxs(x.size()), gxp(x.size());
        const double bs = time_ms(
            [&] { kern::conv2d_backward_input(ys.data(), h, w, cin, kw.data(), k, cout, 1,
                                              gxs.data(), kern::Exec::Serial); },
            3);
        const double bp = time_ms(
            [&] { kern::conv2d_backward_input(ys.data(), h, w, cin, kw.data(), k, cout, 1,
                                              gxp.data(), kern::Exec::Parallel); },
            3);
        report("conv2d bwd-input", bs, bp,
               std::memcmp(gxs.data(), gxp.data(), gxs.size() * sizeof(float)) == 0);

        std::vector<float> gws(kw.size()), gwp(kw.size()), gbs(cout), gbp(cout);
        const double ws_ = time_ms(
            [&] { kern::conv2d_backward_weights(x.data(), ys.data(), h, w, cin, k, cout, 1,
                                                gws.data(), gbs.data(), kern::Exec::Serial); },
            3);
        const double wp_ = time_ms(
            [&] { kern::conv2d_backward_weights(x.data(), ys.data(), h, w, cin, k, cout, 1,
                                                gwp.data(), gbp.data(), kern::Exec::Parallel); },
            3);
        report("conv2d bwd-weights", ws_, wp_,
               std::memcmp(gws.data(), gwp.data(), gws.size() * sizeof(float)) == 0);
    }
    // Dense and sparse matmul at GCN shapes.
    {
        const int n = 450, m = 227, p = 128;
        std::vector<float> x(static_cast<std::size_t>(n) * m), w(static_cast<std::size_t>(m) * p);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<float> ys(static_cast<std::size_t>(n) * p), yp(ys.size());
        const double ts = time_ms(
            [&] { kern::matmul(x.data(), w.data(), n, m, p, ys.data(), kern::Exec::Serial); }, 5);
        const double tp = time_ms(
            [&] { kern::matmul(x.data(), w.data(), n, m, p, yp.data(), kern::Exec::Parallel); },
            5);
        report("matmul 450x227x128", ts, tp,
               std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0);
    }
    const MeshGraph organ = generate_phantom_mesh(config.dataset.phantom);
    {
        const auto opm = normalized_operator(build_adjacency(organ), true).m.cast<float>();
        const int f = 227;
        std::vector<float> x(static_cast<std::size_t>(opm.rows) * f);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<float> ys(x.size()), yp(x.size());
        const double ts = time_ms(
            [&] { kern::spmm(opm, x.data(), f, ys.data(), kern::Exec::Serial); }, 10);
        const double tp = time_ms(
            [&] { kern::spmm(opm, x.data(), f, yp.data(), kern::Exec::Parallel); }, 10);
        report("spmm operator x227", ts, tp,
               std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0);
    }
    // Geometry kernels at dataset shapes.
    const VoxelVolume grid =
        make_phantom_grid(config.dataset.phantom, config.dataset.grid_spacing_mm,
                          config.dataset.grid_margin_mm);
    {
        const VoxelVolume vol = compose_attenuation_volume(config.dataset.phantom, organ, grid);
        const ProjectionCamera cam = make_orthographic_camera(
            config.dataset.image_width, config.dataset.image_height,
            config.dataset.pixels_per_mm);
        const double step = 0.5 * std::min({vol.spacing[0], vol.spacing[1], vol.spacing[2]});
        std::vector<double> rs, rp;
        const double ts =
            time_ms([&] { rs = kern::drr_raw(vol, cam, step, kern::Exec::Serial); }, 3);
        const double tp =
            time_ms([&] { rp = kern::drr_raw(vol, cam, step, kern::Exec::Parallel); }, 3);
        report("drr raycast", ts, tp,
               std::memcmp(rs.data(), rp.data(), rs.size() * sizeof(double)) == 0);
    }
    {
        std::vector<std::uint8_t> os_, op_;
        const double ts =
            time_ms([&] { os_ = kern::voxelize_parity(organ, grid, kern::Exec::Serial); }, 3);
        const double tp =
            time_ms([&] { op_ = kern::voxelize_parity(organ, grid, kern::Exec::Parallel); }, 3);
        report("voxelize parity", ts, tp, os_ == op_);
    }
    {
        DeformationField field;
        field.translation = {3.0, 1.0, 8.0};
        const MeshGraph moved = apply_deformation(organ, field);
        std::vector<double> ds_, dp_;
        const double ts = time_ms(
            [&] {
                ds_ = kern::directed_surface_distances(organ.vertices, moved,
                                                       kern::Exec::Serial);
            },
            3);
        const double tp = time_ms(
            [&] {
                dp_ = kern::directed_surface_distances(organ.vertices, moved,
                                                       kern::Exec::Parallel);
            },
            3);
        report("point-surface distances", ts, tp, ds_ == dp_);
    }
}

} // namespace igcn::pipeline
