#include <doctest.h>

#include <cstring>

#include "igcn/model.hpp"

using namespace igcn;
using ad::NodeId;
using ad::Tape;

namespace {

MeshGraph cube_mesh(double half = 20.0) {
    MeshGraph m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back({(i & 1 ? half : -half), (i & 2 ? half : -half),
                              (i & 4 ? half : -half)});
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.backbone.stage_widths = {2, 3, 4, 5};
    cfg.backbone.convs_per_stage = 1;
    cfg.backbone.exposed_stages = {1, 2, 3};
    cfg.backbone.head_after_stage = 1;
    cfg.gcn_hidden = 6;
    cfg.gcn_layers = 8;
    cfg.image_height = 16;
    cfg.image_width = 16;
    cfg.dropout_rate = 0.0;
    return cfg;
}

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& p : img.px) p = float(rng.uniform());
    return img;
}

} // namespace

TEST_CASE("position loss oracles") {
    Tape<float> t;
    // Identical arrays -> 0.
    Tensor<float> a({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.val(ad::mse_rows(t, t.leaf(a), a)).v[0] == 0.0f);
    // Uniform translation by (1, 2, 2): |t|^2 = 9.
    Tensor<float> b = a;
    for (int i = 0; i < 2; ++i) {
        b.at(i, 0) += 1;
        b.at(i, 1) += 2;
        b.at(i, 2) += 2;
    }
    const NodeId l1 = ad::mse_rows(t, t.leaf(b), a);
    CHECK(t.val(l1).v[0] == doctest::Approx(9.0).epsilon(1e-6));
    // Hand sum: offsets (1,0,0) and (0,2,0) -> (1 + 4) / 2 = 2.5.
    Tensor<float> p({2, 3}, {1, 0, 0, 0, 2, 0});
    const NodeId l2 = ad::mse_rows(t, t.leaf(p), Tensor<float>({2, 3}));
    CHECK(t.val(l2).v[0] == doctest::Approx(2.5).epsilon(1e-7));
    // Size mismatch rejected.
    CHECK_THROWS_AS(ad::mse_rows(t, t.leaf(a), Tensor<float>({3, 3})), ValidationError);
}

TEST_CASE("mapping loss oracles") {
    Tape<float> t;
    // Perfect mapping -> 0; all points off by (0.1, 0) -> 0.01.
    Tensor<float> q({3, 2}, {0.2f, 0.3f, 0.5f, 0.5f, 0.8f, 0.1f});
    Tensor<float> warped = q;
    for (int i = 0; i < 3; ++i) warped.at(i, 0) += 0.1f;
    CHECK(t.val(ad::mse_rows(t, t.leaf(q), q)).v[0] == 0.0f);
    const NodeId l = ad::mse_rows(t, t.leaf(warped), q);
    CHECK(t.val(l).v[0] == doctest::Approx(0.01).epsilon(1e-5));
    // Offsets of norm 0.1 and 0.2 -> (0.01 + 0.04) / 2 = 0.025.
    Tensor<float> w2({2, 2}, {0.1f, 0.0f, 0.0f, 0.2f});
    const NodeId l2 = ad::mse_rows(t, t.leaf(w2), Tensor<float>({2, 2}));
    CHECK(t.val(l2).v[0] == doctest::Approx(0.025).epsilon(1e-6));
}

TEST_CASE("laplacian loss: rigid translation invariance and a perturbation oracle") {
    const MeshGraph cube = cube_mesh(1.0);
    const SparseMatrix lap = umbrella_matrix(cube);
    const auto apply = [&](const std::vector<Vec3>& pos) {
        Tensor<double> out({8, 3});
        for (int i = 0; i < 8; ++i) {
            Vec3 acc{};
            for (int k = lap.row_ptr[i]; k < lap.row_ptr[i + 1]; ++k)
                acc += pos[lap.col_idx[k]] * lap.vals[k];
            out.at(i, 0) = acc.x;
            out.at(i, 1) = acc.y;
            out.at(i, 2) = acc.z;
        }
        return out;
    };
    std::vector<Vec3> translated = cube.vertices;
    for (auto& v : translated) v += Vec3{0.3, -0.7, 1.1};
    const Tensor<double> la = apply(cube.vertices);
    const Tensor<double> lb = apply(translated);
    Tape<double> t;
    const NodeId zero = ad::mse_rows(t, t.leaf(lb), la);
    CHECK(t.val(zero).v[0] == doctest::Approx(0.0).epsilon(1e-18));

    // Perturb vertex 0 by delta; loss follows by linearity of the operator.
    const Vec3 delta{0.05, -0.02, 0.01};
    std::vector<Vec3> perturbed = cube.vertices;
    perturbed[0] += delta;
    const Tensor<double> lp = apply(perturbed);
    double expected = 0.0;
    for (int i = 0; i < 8; ++i) {
        const Vec3 row = delta * lap.get(i, 0);
        expected += norm2(row);
    }
    expected /= 8.0;
    const NodeId loss = ad::mse_rows(t, t.leaf(lp), la);
    CHECK(t.val(loss).v[0] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("total loss weighting oracles") {
    Tape<double> t;
    const NodeId pos = t.leaf(Tensor<double>({1}, {1.0}));
    const NodeId map = t.leaf(Tensor<double>({1}, {1.0}));
    const NodeId lap = t.leaf(Tensor<double>({1}, {1.0}));
    // Components (1, 1, 1) with weights (10, 1) -> 12.
    CHECK(t.val(ad::weighted_sum(t, {pos, map, lap}, {1.0, 10.0, 1.0})).v[0] ==
          doctest::Approx(12.0));
    // Zero weights reduce the total to the position term.
    const NodeId p2 = t.leaf(Tensor<double>({1}, {0.73}));
    CHECK(t.val(ad::weighted_sum(t, {p2, map, lap}, {1.0, 0.0, 0.0})).v[0] ==
          doctest::Approx(0.73));
    // Defaults on components (0.02, 0.001, 0.005) -> 0.035.
    const NodeId c1 = t.leaf(Tensor<double>({1}, {0.02}));
    const NodeId c2 = t.leaf(Tensor<double>({1}, {0.001}));
    const NodeId c3 = t.leaf(Tensor<double>({1}, {0.005}));
    const LossWeights w;
    CHECK(t.val(ad::weighted_sum(t, {c1, c2, c3}, {1.0, w.lambda_map, w.lambda_laplacian}))
              .v[0] == doctest::Approx(0.035).epsilon(1e-12));
}

TEST_CASE("warp: zero field is the identity, constant field a uniform shift") {
    Tape<double> t;
    Tensor<double> points({3, 2}, {0.25, 0.5, 0.5, 0.25, 0.75, 0.75});
    const NodeId p = t.leaf(points);
    const NodeId zero_field = t.leaf(Tensor<double>({4, 4, 2}));
    const NodeId s0 = ad::bilinear_gather(t, zero_field, p, 4.0, 4.0);
    const NodeId w0 = ad::add(t, p, s0);
    CHECK(t.val(w0).v == points.v);

    Tensor<double> const_field({4, 4, 2});
    for (int i = 0; i < 16; ++i) {
        const_field.v[2 * i] = 0.1;
        const_field.v[2 * i + 1] = 0.0;
    }
    const NodeId s1 = ad::bilinear_gather(t, t.leaf(const_field), p, 4.0, 4.0);
    const NodeId w1 = ad::add(t, p, s1);
    for (int i = 0; i < 3; ++i) {
        CHECK(t.val(w1).at(i, 0) == doctest::Approx(points.at(i, 0) + 0.1).epsilon(1e-12));
        CHECK(t.val(w1).at(i, 1) == doctest::Approx(points.at(i, 1)).epsilon(1e-12));
    }

    // Linear ramp along u; the midpoint sample matches the ramp value.
    Tensor<double> ramp({1, 5, 2});
    for (int x = 0; x < 5; ++x) ramp.v[2 * x] = x / 10.0;
    Tensor<double> mid({1, 2}, {0.5, 0.0});
    const NodeId s2 = ad::bilinear_gather(t, t.leaf(ramp), t.leaf(mid), 5.0, 1.0);
    CHECK(t.val(s2).at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("perceptual pooling: constant maps, width sum, texel exactness") {
    Tape<double> t;
    Tensor<double> points({4, 2}, {0.1, 0.2, 0.6, 0.4, 0.3, 0.9, 0.5, 0.5});
    const NodeId p = t.leaf(points);
    Tensor<double> cmap({6, 6, 1});
    cmap.fill(3.25);
    const NodeId pooled = ad::bilinear_gather(t, t.leaf(cmap), p, 6.0, 6.0);
    for (int i = 0; i < 4; ++i) CHECK(t.val(pooled).at(i, 0) == doctest::Approx(3.25));

    // Two exposed stages of widths 64 and 128 -> feature dim 192.
    BackboneConfig bb;
    bb.stage_widths = {32, 64, 128};
    bb.exposed_stages = {1, 2};
    CHECK(bb.feature_dim() == 192);

    // A point exactly at a texel center reproduces the texel vector.
    Tensor<double> map({4, 4, 3});
    Rng rng(12);
    for (auto& v : map.v) v = rng.uniform(-1, 1);
    Tensor<double> at_texel({1, 2}, {2.0 / 4.0, 1.0 / 4.0});  // scales to texel (2, 1)
    const NodeId f = ad::bilinear_gather(t, t.leaf(map), t.leaf(at_texel), 4.0, 4.0);
    for (int c = 0; c < 3; ++c)
        CHECK(t.val(f).at(0, c) == doctest::Approx(map.at(1, 2, c)).epsilon(1e-14));
}

TEST_CASE("gcn stack with zero weights produces zero coordinates") {
    IgcnModelT<float> model;
    model.cfg = tiny_config();
    model.build_parameters(7);
    model.attach_mesh(cube_mesh());
    for (int l = 0; l < model.cfg.gcn_layers; ++l) {
        char name[32];
        std::snprintf(name, sizeof(name), "gcn.l%d.w", l);
        model.params[name].fill(0.0f);
    }
    model.norm_scale = {20, 20, 20};
    const auto pred = predict_mesh(model, random_image(16, 16, 5),
                                   make_orthographic_camera(16, 16, 0.25));
    for (const auto& v : pred.mesh.vertices) CHECK(norm(v) == 0.0);
    CHECK(pred.mesh.vertex_count() == 8);
    CHECK(pred.mesh.triangles == model.initial_mesh.triangles);
}

TEST_CASE("full model with zero head matches no-mapping bitwise") {
    const MeshGraph cube = cube_mesh();
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        IgcnModelT<float> full, nomap;
        full.cfg = tiny_config();
        nomap.cfg = tiny_config();
        nomap.cfg.variant = ModelVariant::NoMapping;
        full.build_parameters(33);
        nomap.build_parameters(33);
        full.attach_mesh(cube);
        nomap.attach_mesh(cube);
        full.norm_scale = nomap.norm_scale = {25, 25, 25};
        const Image drr = random_image(16, 16, 100 + trial);
        const auto pf = predict_mesh(full, drr, camera);
        const auto pn = predict_mesh(nomap, drr, camera);
        for (int i = 0; i < 8; ++i) {
            CHECK(pf.mesh.vertices[i].x == pn.mesh.vertices[i].x);
            CHECK(pf.mesh.vertices[i].y == pn.mesh.vertices[i].y);
            CHECK(pf.mesh.vertices[i].z == pn.mesh.vertices[i].z);
        }
    }
}

TEST_CASE("predictions are equivariant to vertex relabeling") {
    const MeshGraph cube = cube_mesh();
    const std::vector<int> perm{3, 0, 5, 1, 7, 2, 6, 4};
    MeshGraph permuted;
    permuted.vertices.resize(8);
    for (int i = 0; i < 8; ++i) permuted.vertices[perm[i]] = cube.vertices[i];
    for (const auto& t : cube.triangles)
        permuted.triangles.push_back({perm[t[0]], perm[t[1]], perm[t[2]]});

    IgcnModelT<float> a, b;
    a.cfg = b.cfg = tiny_config();
    a.build_parameters(55);
    b.build_parameters(55);
    a.attach_mesh(cube);
    b.attach_mesh(permuted);
    a.norm_scale = b.norm_scale = {25, 25, 25};
    const Image drr = random_image(16, 16, 9);
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    const auto pa = predict_mesh(a, drr, camera);
    const auto pb = predict_mesh(b, drr, camera);
    for (int i = 0; i < 8; ++i)
        CHECK(norm(pb.mesh.vertices[perm[i]] - pa.mesh.vertices[i]) < 1e-5);
}

TEST_CASE("predict is deterministic and validates the resolution") {
    IgcnModelT<float> model;
    model.cfg = tiny_config();
    model.cfg.dropout_rate = 0.5;  // ignored in eval mode
    model.build_parameters(3);
    model.attach_mesh(cube_mesh());
    model.norm_scale = {25, 25, 25};
    const Image drr = random_image(16, 16, 77);
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    const auto p1 = predict_mesh(model, drr, camera);
    const auto p2 = predict_mesh(model, drr, camera);
    for (int i = 0; i < 8; ++i)
        CHECK(std::memcmp(&p1.mesh.vertices[i], &p2.mesh.vertices[i], sizeof(Vec3)) == 0);
    CHECK(p1.forward_ms > 0.0);
    CHECK_THROWS_AS(predict_mesh(model, random_image(32, 32, 1),
                                 make_orthographic_camera(32, 32, 0.25)),
                    ValidationError);
}

TEST_CASE("constant image yields spatially constant interior activations") {
    // Translation invariance of the conv stack away from the padded border.
    IgcnModelT<float> model;
    model.cfg = tiny_config();
    model.build_parameters(21);
    model.attach_mesh(cube_mesh());
    model.norm_scale = {25, 25, 25};
    Image constant(16, 16);
    for (auto& p : constant.px) p = 0.6f;
    const auto input = make_sample_input<float>(model.initial_mesh,
                                                make_orthographic_camera(16, 16, 0.25),
                                                constant, model.norm_scale, nullptr);
    Tape<float> tape;
    const auto leaves = push_parameter_leaves(tape, model);
    const NodeId conv = ad::conv2d(tape, tape.leaf(input.image),
                                   leaves[model.params.find("bb.s0.c0.w")],
                                   leaves[model.params.find("bb.s0.c0.b")], 1);
    const NodeId act = ad::relu(tape, conv);
    const auto& v = tape.val(act);
    for (int c = 0; c < 2; ++c) {
        const float ref = v.at(8, 8, c);
        for (int y = 1; y < 15; ++y)
            for (int x = 1; x < 15; ++x)
                CHECK(v.at(y, x, c) == doctest::Approx(ref).epsilon(1e-6));
    }
}

TEST_CASE("training: lr 0 freezes parameters; reruns are bit-identical; loss drops") {
    const MeshGraph cube = cube_mesh();
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    DeformationField field;
    field.translation = {1.0, 0.5, 3.0};
    const MeshGraph target = apply_deformation(cube, field);
    std::vector<const MeshGraph*> tp{&target};
    const Vec3 scale = coordinate_normalization(tp);

    std::vector<SampleInput<float>> samples;
    samples.push_back(
        make_sample_input<float>(cube, camera, random_image(16, 16, 31), scale, &target));

    const auto make = [&](ModelVariant variant) {
        IgcnModelT<float> m;
        m.cfg = tiny_config();
        m.cfg.variant = variant;
        m.build_parameters(17);
        m.attach_mesh(cube);
        m.norm_scale = scale;
        return m;
    };

    TrainingConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 0.0;
    cfg.dropout_rate = 0.0;
    cfg.seed = 2;
    {
        IgcnModel frozen = make(ModelVariant::Full);
        const auto before = frozen.params.entries[0].value.v;
        const auto out = train_model(frozen, samples, cfg);
        CHECK(out.logs.size() == 5);
        CHECK(frozen.params.entries[0].value.v == before);
        CHECK(out.logs.front().total == doctest::Approx(out.logs.back().total).epsilon(1e-7));
    }
    cfg.lr = 5e-3;
    cfg.epochs = 40;
    {
        IgcnModel m1 = make(ModelVariant::Full);
        IgcnModel m2 = make(ModelVariant::Full);
        const auto o1 = train_model(m1, samples, cfg);
        const auto o2 = train_model(m2, samples, cfg);
        REQUIRE(o1.logs.size() == o2.logs.size());
        for (std::size_t i = 0; i < o1.logs.size(); ++i)
            CHECK(o1.logs[i].total == o2.logs[i].total);  // bitwise determinism
        CHECK(o1.logs.back().pos < o1.logs.front().pos);  // single-sample overfit trend
        IgcnModel m3 = make(ModelVariant::NoMapping);
        const auto o3 = train_model(m3, samples, cfg);
        for (const auto& log : o3.logs) CHECK(log.map == 0.0);
    }
}

TEST_CASE("divergence rolls parameters back to the last finished epoch") {
    const MeshGraph cube = cube_mesh();
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    DeformationField field;
    field.translation = {1.0, 0.5, 3.0};
    const MeshGraph target = apply_deformation(cube, field);
    std::vector<const MeshGraph*> tp{&target};
    const Vec3 scale = coordinate_normalization(tp);
    std::vector<SampleInput<float>> samples;
    samples.push_back(
        make_sample_input<float>(cube, camera, random_image(16, 16, 31), scale, &target));

    IgcnModelT<float> model;
    model.cfg = tiny_config();
    model.build_parameters(17);
    model.attach_mesh(cube);
    model.norm_scale = scale;

    TrainingConfig cfg;
    cfg.epochs = 10;
    cfg.lr = 1e12;  // blows the parameters up within an epoch or two
    cfg.dropout_rate = 0.0;
    cfg.seed = 4;
    const auto out = train_model(model, samples, cfg);
    CHECK(out.diverged);
    CHECK(out.last_good_epoch < 10);
    CHECK(int(out.logs.size()) == out.last_good_epoch);
    // Parameters stay finite after the rollback.
    for (const auto& e : model.params.entries)
        for (const float v : e.value.v) CHECK(std::isfinite(v));
}

TEST_CASE("model checkpoint round trip preserves parameters and config") {
    const auto dir = std::filesystem::temp_directory_path() / "igcn_model_ckpt";
    std::filesystem::create_directories(dir);
    IgcnModel model;
    model.cfg = tiny_config();
    model.cfg.variant = ModelVariant::NoMapping;
    model.cfg.residual_output = true;
    model.build_parameters(13);
    model.attach_mesh(cube_mesh());
    model.norm_scale = {11, 22, 33};
    TrainingConfig tc;
    tc.lr = 2e-4;
    save_model_checkpoint(dir / "m.ckpt", model, 640, tc);
    const IgcnModel loaded = load_model_checkpoint(dir / "m.ckpt", cube_mesh());
    CHECK(loaded.cfg.variant == ModelVariant::NoMapping);
    CHECK(loaded.cfg.residual_output);
    CHECK(loaded.cfg.backbone.stage_widths == model.cfg.backbone.stage_widths);
    CHECK(loaded.norm_scale.y == doctest::Approx(22.0));
    REQUIRE(loaded.params.count() == model.params.count());
    for (std::size_t i = 0; i < model.params.count(); ++i)
        CHECK(loaded.params.entries[i].value.v == model.params.entries[i].value.v);
}

TEST_CASE("sample input validation") {
    const MeshGraph cube = cube_mesh();
    const auto camera = make_orthographic_camera(16, 16, 0.25);
    const Image drr = random_image(16, 16, 1);
    MeshGraph bad_target = cube;
    bad_target.triangles[0] = {0, 1, 2};
    CHECK_THROWS_AS(make_sample_input<float>(cube, camera, drr, {1, 1, 1}, &bad_target),
                    ValidationError);
    CHECK_THROWS_AS(make_sample_input<float>(cube, camera, drr, {0, 1, 1}, nullptr),
                    ValidationError);
    const Image wrong(8, 8);
    CHECK_THROWS_AS(make_sample_input<float>(cube, camera, wrong, {1, 1, 1}, nullptr),
                    ValidationError);
}
