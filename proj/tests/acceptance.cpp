// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier criteria (training sanity, ablation direction) run real
// pipelines into ./acceptance_work, so a full run takes tens of minutes on
// one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "igcn/metrics.hpp"
#include "igcn/pipeline.hpp"

using namespace igcn;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
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

// ---------------------------------------------------------------------------
// 1. Gradient suite
// ---------------------------------------------------------------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto outcome = pipeline::run_gradcheck();
    const double elapsed = seconds_since(t0);
    double worst = 0.0;
    std::string worst_op;
    bool all = true;
    for (const auto& row : outcome.rows) {
        all = all && row.pass;
        if (row.max_rel_err > worst) {
            worst = row.max_rel_err;
            worst_op = row.op;
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%zu ops, worst rel err %.2e (%s), %.1f s",
                  outcome.rows.size(), worst, worst_op.c_str(), elapsed);
    report(1, "gradient suite under tolerance in < 2 min", all && elapsed < 120.0, detail);
}

// ---------------------------------------------------------------------------
// 2. Loss-function oracles
// ---------------------------------------------------------------------------

void criterion_loss_oracles() {
    bool ok = true;
    char detail[200];
    detail[0] = '\0';
    const auto expect = [&](const char* what, double got, double want, double tol) {
        if (std::abs(got - want) > tol) {
            ok = false;
            std::snprintf(detail, sizeof(detail), "%s: got %.12g want %.12g", what, got, want);
        }
    };

    {
        ad::Tape<double> t;
        Tensor<double> pred({2, 3}, {1, 0, 0, 0, 2, 0});
        expect("pos hand sum", t.val(ad::mse_rows(t, t.leaf(pred), Tensor<double>({2, 3}))).v[0],
               2.5, 1e-9);
        Tensor<double> base({3, 3}, {0.5, 1, 2, -1, 0, 3, 4, 4, 4});
        Tensor<double> shifted = base;
        for (int i = 0; i < 3; ++i) {
            shifted.at(i, 0) += 1.0;
            shifted.at(i, 1) += 2.0;
            shifted.at(i, 2) += 2.0;
        }
        expect("pos translation", t.val(ad::mse_rows(t, t.leaf(shifted), base)).v[0], 9.0, 1e-9);
        Tensor<double> warped({2, 2}, {0.1, 0.0, 0.0, 0.2});
        expect("map hand sum", t.val(ad::mse_rows(t, t.leaf(warped), Tensor<double>({2, 2}))).v[0],
               0.025, 1e-9);
    }
    {
        // Laplacian loss against a direct neighbor-mean evaluation.
        const MeshGraph cube = cube_mesh(1.0);
        std::vector<Vec3> perturbed = cube.vertices;
        perturbed[0] += Vec3{0.05, -0.02, 0.01};
        const auto nbrs = neighbor_lists(cube);
        const auto direct_umbrella = [&](const std::vector<Vec3>& pos) {
            std::vector<Vec3> out(pos.size());
            for (std::size_t i = 0; i < pos.size(); ++i) {
                Vec3 mean{};
                for (int j : nbrs[i]) mean += pos[j];
                out[i] = pos[i] - mean / double(nbrs[i].size());
            }
            return out;
        };
        const auto la = direct_umbrella(cube.vertices);
        const auto lb = direct_umbrella(perturbed);
        double want = 0.0;
        for (std::size_t i = 0; i < la.size(); ++i) want += norm2(lb[i] - la[i]);
        want /= double(la.size());
        // Model route: umbrella matrix + spmm + mse_rows.
        const auto lap = std::make_shared<const ad::TapeSparse<double>>(
            ad::TapeSparse<double>::from(umbrella_matrix(cube)));
        Tensor<double> coords({8, 3});
        for (int i = 0; i < 8; ++i) {
            coords.at(i, 0) = perturbed[i].x;
            coords.at(i, 1) = perturbed[i].y;
            coords.at(i, 2) = perturbed[i].z;
        }
        Tensor<double> target({8, 3});
        for (int i = 0; i < 8; ++i) {
            target.at(i, 0) = la[i].x;
            target.at(i, 1) = la[i].y;
            target.at(i, 2) = la[i].z;
        }
        ad::Tape<double> t;
        const auto got =
            t.val(ad::mse_rows(t, ad::spmm(t, lap, t.leaf(coords)), target)).v[0];
        expect("laplacian oracle", got, want, 1e-9);
    }
    {
        // Weighted total with default weights matches plain double arithmetic.
        ad::Tape<double> t;
        const LossWeights w;
        const double pos = 0.02, map = 0.001, lap = 0.005;
        const auto total = t.val(ad::weighted_sum(
            t,
            {t.leaf(Tensor<double>({1}, {pos})), t.leaf(Tensor<double>({1}, {map})),
             t.leaf(Tensor<double>({1}, {lap}))},
            {1.0, w.lambda_map, w.lambda_laplacian}))
                               .v[0];
        const double want = pos + w.lambda_map * map + w.lambda_laplacian * lap;
        if (total != want) {
            ok = false;
            std::snprintf(detail, sizeof(detail), "weighted sum: got %.17g want %.17g", total,
                          want);
        }
        expect("weighted sum value", total, 0.035, 1e-12);
    }
    if (ok) std::snprintf(detail, sizeof(detail), "hand values matched to 1e-9");
    report(2, "loss-function unit oracles", ok, detail);
}

// ---------------------------------------------------------------------------
// 3. Operator oracles
// ---------------------------------------------------------------------------

void criterion_operator_oracles() {
    bool ok = true;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "operators exact to 1e-12; 100 graphs equivariant");

    // Direct dense computation of D^-1/2 (A + I) D^-1/2 for the triangle.
    {
        MeshGraph tri;
        tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        tri.triangles = {{0, 1, 2}};
        const auto op = normalized_operator(build_adjacency(tri), true);
        double dense[3][3] = {};
        const double a_hat[3][3] = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
        double deg[3] = {3, 3, 3};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                dense[i][j] = a_hat[i][j] / std::sqrt(deg[i] * deg[j]);
        for (int i = 0; i < 3 && ok; ++i)
            for (int j = 0; j < 3 && ok; ++j)
                if (std::abs(op.m.get(i, j) - dense[i][j]) > 1e-12) {
                    ok = false;
                    std::snprintf(detail, sizeof(detail), "triangle operator (%d,%d) off", i, j);
                }
    }
    {
        const auto adj = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
        const auto op = normalized_operator(adj, true);
        for (int i = 0; i < 2 && ok; ++i)
            for (int j = 0; j < 2 && ok; ++j)
                if (std::abs(op.m.get(i, j) - 0.5) > 1e-12) {
                    ok = false;
                    std::snprintf(detail, sizeof(detail), "path operator entry off");
                }
    }
    // Permutation equivariance of the graph convolution on 100 random graphs.
    Rng rng(0xE9C);
    for (int trial = 0; trial < 100 && ok; ++trial) {
        const int n = rng.uniform_int(3, 10);
        std::vector<std::tuple<int, int, double>> tri;
        for (int i = 0; i + 1 < n; ++i) {
            tri.emplace_back(i, i + 1, 1.0);
            tri.emplace_back(i + 1, i, 1.0);
        }
        for (int extra = rng.uniform_int(0, n); extra > 0; --extra) {
            const int a = rng.uniform_int(0, n - 1), b = rng.uniform_int(0, n - 1);
            if (a == b) continue;
            tri.emplace_back(a, b, 1.0);
            tri.emplace_back(b, a, 1.0);
        }
        auto adj = SparseMatrix::from_triplets(n, n, tri);
        for (auto& v : adj.vals) v = 1.0;

        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        std::vector<std::tuple<int, int, double>> ptri;
        for (int i = 0; i < n; ++i)
            for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
                ptri.emplace_back(perm[i], perm[adj.col_idx[k]], 1.0);
        auto padj = SparseMatrix::from_triplets(n, n, ptri);
        for (auto& v : padj.vals) v = 1.0;

        const int f = 4, fo = 3;
        Tensor<double> x({n, f}), w({f, fo}), px({n, f});
        for (auto& v : x.v) v = rng.uniform(-1, 1);
        for (auto& v : w.v) v = rng.uniform(-1, 1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < f; ++j) px.at(perm[i], j) = x.at(i, j);

        const auto op = std::make_shared<const ad::TapeSparse<double>>(
            ad::TapeSparse<double>::from(normalized_operator(adj, true).m));
        const auto pop = std::make_shared<const ad::TapeSparse<double>>(
            ad::TapeSparse<double>::from(normalized_operator(padj, true).m));
        ad::Tape<double> t;
        const auto y = ad::graph_convolution(t, t.leaf(x), op, t.leaf(w), true);
        const auto py = ad::graph_convolution(t, t.leaf(px), pop, t.leaf(w), true);
        for (int i = 0; i < n && ok; ++i)
            for (int j = 0; j < fo && ok; ++j)
                if (std::abs(t.val(py).at(perm[i], j) - t.val(y).at(i, j)) > 1e-10) {
                    ok = false;
                    std::snprintf(detail, sizeof(detail), "equivariance broke on graph %d",
                                  trial);
                }
    }
    report(3, "operator oracles", ok, detail);
}

// ---------------------------------------------------------------------------
// 4. Geometry oracles
// ---------------------------------------------------------------------------

void criterion_geometry_oracles() {
    bool ok = true;
    char detail[200];

    MeshGraph sheet_a, sheet_b;
    sheet_a.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    sheet_a.triangles = {{0, 1, 2}, {0, 2, 3}};
    sheet_b = sheet_a;
    for (auto& v : sheet_b.vertices) v.z = 3.0;
    const double md = mean_distance(sheet_a, sheet_b);

    MeshGraph cube_a = cube_mesh(10.0), cube_b = cube_mesh(10.0);
    for (auto& v : cube_b.vertices) v.x += 10.0;
    const double dsc = dice_coefficient(cube_a, cube_b, 1.0);

    PhantomSpec sphere_spec;
    sphere_spec.organ_semi_axes = {20, 20, 20};
    const MeshGraph sphere = generate_phantom_mesh(sphere_spec);
    const VoxelVolume grid({26, 26, 26}, {2.0, 2.0, 2.0}, {-26, -26, -26});
    std::size_t count = 0;
    for (const auto v : voxelize_mesh(sphere, grid)) count += v;
    const double vol = double(count) * 8.0;
    const double analytic = 4.0 / 3.0 * M_PI * 8000.0;

    VoxelVolume slab({40, 25, 40}, {2.0, 2.0, 2.0}, {-40.0, -25.0, -40.0});
    for (int k = 0; k < 40; ++k)
        for (int j = 0; j < 25; ++j)
            for (int i = 0; i < 40; ++i)
                if (const Vec3 c = slab.voxel_center(i, j, k); c.y > -25.0 && c.y < 25.0)
                    slab.at(i, j, k) = 1.0f;
    const auto drr = render_drr(slab, make_orthographic_camera(16, 16, 0.25));
    const double center = drr.raw[8 * 16 + 8];

    ok = std::abs(md - 3.0) < 1e-9 && std::abs(dsc - 0.5) < 0.02 &&
         std::abs(vol - analytic) / analytic < 0.05 && std::abs(center - 50.0) / 50.0 < 0.01;
    std::snprintf(detail, sizeof(detail),
                  "sheets MD %.12g, half-cube DSC %.4f, sphere vol err %.2f%%, slab err %.3f%%",
                  md, dsc, 100.0 * std::abs(vol - analytic) / analytic,
                  100.0 * std::abs(center - 50.0) / 50.0);
    report(4, "geometry oracles", ok, detail);
}

// ---------------------------------------------------------------------------
// 5. Reduction identity
// ---------------------------------------------------------------------------

void criterion_reduction_identity() {
    ModelConfig cfg;
    cfg.backbone.stage_widths = {4, 6, 8, 10};
    cfg.backbone.convs_per_stage = 1;
    cfg.backbone.exposed_stages = {1, 2, 3};
    cfg.backbone.head_after_stage = 1;
    cfg.gcn_hidden = 12;
    cfg.image_height = 32;
    cfg.image_width = 32;
    cfg.dropout_rate = 0.5;

    PhantomSpec spec;
    spec.vertex_count = 150;
    const MeshGraph organ = generate_phantom_mesh(spec);
    const auto camera = make_orthographic_camera(32, 32, 0.2);

    IgcnModel full, nomap;
    full.cfg = cfg;
    nomap.cfg = cfg;
    nomap.cfg.variant = ModelVariant::NoMapping;
    full.build_parameters(99);
    nomap.build_parameters(99);
    full.attach_mesh(organ);
    nomap.attach_mesh(organ);
    full.norm_scale = nomap.norm_scale = {60, 50, 45};

    bool ok = true;
    for (std::uint64_t trial = 0; trial < 10 && ok; ++trial) {
        Image img(32, 32);
        Rng rng(derive_seed(0x1D, trial));
        for (auto& p : img.px) p = float(rng.uniform());
        const auto pf = predict_mesh(full, img, camera);
        const auto pn = predict_mesh(nomap, img, camera);
        for (int i = 0; i < organ.vertex_count() && ok; ++i)
            ok = std::memcmp(&pf.mesh.vertices[i], &pn.mesh.vertices[i], sizeof(Vec3)) == 0;
    }
    report(5, "zero-head full model equals no-mapping bit-for-bit on 10 inputs", ok,
           ok ? "10/10 identical" : "prediction bytes diverged");
}

// ---------------------------------------------------------------------------
// 6 + 9. Training sanity at desk scale, then the timing criterion on the
// trained model.
// ---------------------------------------------------------------------------

RunConfig desk_config(const fs::path& root) {
    RunConfig config;
    config.seed = 3;
    config.dataset_dir = (root / "desk" / "data").string();
    config.checkpoint_dir = (root / "desk" / "ckpt").string();
    config.report_dir = (root / "desk" / "reports").string();
    config.dataset.n_train = 8;
    config.dataset.n_augment = 12;
    config.dataset.n_test = 15;
    config.train.epochs = 200;
    config.sync();
    return config;
}

void criterion_training_sanity(const fs::path& root, fs::path& desk_ckpt_out,
                               RunConfig& desk_config_out) {
    const auto t0 = std::chrono::steady_clock::now();
    char detail[240];
    bool ok = true;

    RunConfig config = desk_config(root);
    desk_config_out = config;
    pipeline::run_gen_data(config);
    const auto art = pipeline::run_train(config, ModelVariant::Full);
    desk_ckpt_out = art.checkpoint;
    const double first_total = art.outcome.logs.front().total;
    const double last_total = art.outcome.logs.back().total;
    ok = ok && art.outcome.logs.size() == 200 && last_total < 0.5 * first_total;

    RunConfig overfit = config;
    overfit.dataset_dir = (root / "overfit" / "data").string();
    overfit.checkpoint_dir = (root / "overfit" / "ckpt").string();
    overfit.report_dir = (root / "overfit" / "reports").string();
    overfit.dataset.n_train = 1;
    overfit.dataset.n_augment = 0;
    overfit.dataset.n_test = 1;
    overfit.sync();
    pipeline::run_gen_data(overfit);
    const auto oart = pipeline::run_train(overfit, ModelVariant::Full);
    const double pos_first = oart.outcome.logs.front().pos;
    const double pos_last = oart.outcome.logs.back().pos;
    ok = ok && pos_last < 0.1 * pos_first;

    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 1800.0;
    std::snprintf(detail, sizeof(detail),
                  "total %.4f -> %.4f (%.0f%%), overfit L_pos %.4f -> %.4f (%.1f%%), %.0f s",
                  first_total, last_total, 100.0 * last_total / first_total, pos_first,
                  pos_last, 100.0 * pos_last / pos_first, elapsed);
    report(6, "training sanity at desk scale", ok, detail);
}

void criterion_timing(const RunConfig& config, const fs::path& checkpoint) {
    // First test-split sample of the desk dataset.
    const LoadedDataset data = load_dataset(config.dataset_dir);
    const int sample_id = data.split("test").front()->id;
    const auto art = pipeline::run_predict(config, checkpoint, sample_id);
    const bool ok = art.forward_ms > 0.0 && art.forward_ms < 200.0;
    char detail[120];
    std::snprintf(detail, sizeof(detail), "forward %.1f ms at 128x128 (logged to %s)",
                  art.forward_ms, (fs::path(config.report_dir) / "predict_timing.csv")
                                      .string()
                                      .c_str());
    report(9, "desk-scale forward under 200 ms", ok, detail);
}

// ---------------------------------------------------------------------------
// 7. Ablation direction
// ---------------------------------------------------------------------------

void criterion_ablation(const fs::path& root) {
    RunConfig config;
    config.seed = 23;
    config.dataset_dir = (root / "ablation" / "data").string();
    config.checkpoint_dir = (root / "ablation" / "ckpt").string();
    config.report_dir = (root / "ablation" / "reports").string();
    // Translation-dominant motion at a scale where feature localization
    // matters: the organ moves by most of its own extent.
    config.dataset.phantom.organ_semi_axes = {30, 24, 20};
    config.dataset.image_width = 64;
    config.dataset.image_height = 64;
    config.dataset.pixels_per_mm = 0.5;
    config.dataset.deform.rbf_count = 2;
    config.dataset.deform.rbf_amplitude_mm = 4.0;
    config.dataset.deform.rbf_width_mm = 22.0;
    config.dataset.deform.translation_mean = {0, 0, 22};
    config.dataset.deform.translation_sigma = {5, 5, 8};
    config.dataset.n_train = 8;
    config.dataset.n_augment = 24;
    config.dataset.n_test = 15;
    config.backbone.stage_widths = {8, 16, 32, 64};
    config.backbone.exposed_stages = {0, 1, 2};
    config.train.epochs = 200;
    config.sync();

    pipeline::run_gen_data(config);
    const auto full = pipeline::run_train(config, ModelVariant::Full);
    const auto nomap = pipeline::run_train(config, ModelVariant::NoMapping);
    const auto eval =
        pipeline::run_eval(config, {full.checkpoint, nomap.checkpoint}, false);

    double md_initial = 0, md_full = 0, md_nomap = 0;
    double dsc_initial = 0, dsc_full = 0, dsc_nomap = 0;
    for (const auto& s : eval.report.summaries) {
        if (s.variant == "Initial") {
            md_initial = s.md_mean;
            dsc_initial = s.dsc_mean;
        } else if (s.variant == "full") {
            md_full = s.md_mean;
            dsc_full = s.dsc_mean;
        } else if (s.variant == "no-mapping") {
            md_nomap = s.md_mean;
            dsc_nomap = s.dsc_mean;
        }
    }
    const bool ok = md_full <= md_nomap && md_nomap <= md_initial && dsc_full >= dsc_nomap &&
                    dsc_nomap >= dsc_initial;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "MD full %.2f <= no-mapping %.2f <= initial %.2f; DSC %.1f >= %.1f >= %.1f",
                  md_full, md_nomap, md_initial, dsc_full, dsc_nomap, dsc_initial);
    report(7, "ablation direction on a translation-dominant test set", ok, detail);
}

// ---------------------------------------------------------------------------
// 8. Determinism
// ---------------------------------------------------------------------------

void criterion_determinism(const fs::path& root) {
    const auto run_once = [&](const fs::path& dir) {
        RunConfig config;
        config.seed = 5;
        config.dataset_dir = (dir / "data").string();
        config.checkpoint_dir = (dir / "ckpt").string();
        config.report_dir = (dir / "reports").string();
        config.dataset.phantom.vertex_count = 150;
        config.dataset.image_width = 32;
        config.dataset.image_height = 32;
        config.dataset.pixels_per_mm = 0.125;
        config.dataset.grid_spacing_mm = {4, 4, 4};
        config.dataset.n_train = 2;
        config.dataset.n_augment = 2;
        config.dataset.n_test = 2;
        config.backbone.stage_widths = {4, 8, 12, 16};
        config.train.epochs = 3;
        config.sync();
        pipeline::run_gen_data(config);
        const auto art = pipeline::run_train(config, ModelVariant::Full);
        const int sample_id = load_dataset(config.dataset_dir).split("test").front()->id;
        const auto pred = pipeline::run_predict(config, art.checkpoint, sample_id);
        struct Outputs {
            std::string manifest, log, obj, ckpt;
        };
        return Outputs{read_bytes(fs::path(config.dataset_dir) / "manifest.csv"),
                       read_bytes(art.log_csv), read_bytes(pred.obj),
                       read_bytes(art.checkpoint)};
    };
    const auto a = run_once(root / "det_a");
    const auto b = run_once(root / "det_b");
    const bool manifests = a.manifest == b.manifest && !a.manifest.empty();
    const bool logs = a.log == b.log && !a.log.empty();
    const bool objs = a.obj == b.obj && !a.obj.empty();
    const bool ckpts = a.ckpt == b.ckpt && !a.ckpt.empty();
    char detail[160];
    std::snprintf(detail, sizeof(detail), "manifest %s, train log %s, obj %s, checkpoint %s",
                  manifests ? "identical" : "DIFFERS", logs ? "identical" : "DIFFERS",
                  objs ? "identical" : "DIFFERS", ckpts ? "identical" : "DIFFERS");
    report(8, "byte-identical reruns from one config and seed", manifests && logs && objs && ckpts,
           detail);
}

} // namespace

int main() {
    const fs::path root = "acceptance_work";
    std::error_code ec;
    fs::remove_all(root, ec);
    fs::create_directories(root);

    std::printf("acceptance suite (workspace: %s)\n", root.string().c_str());
    criterion_gradients();
    criterion_loss_oracles();
    criterion_operator_oracles();
    criterion_geometry_oracles();
    criterion_reduction_identity();

    fs::path desk_ckpt;
    RunConfig desk_cfg;
    criterion_training_sanity(root, desk_ckpt, desk_cfg);
    criterion_ablation(root);
    criterion_determinism(root);
    criterion_timing(desk_cfg, desk_ckpt);

    if (g_failures == 0)
        std::printf("all 9 criteria passed\n");
    else
        std::printf("%d criterion(s) FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
