#include <doctest.h>

#include <cmath>

#include "igcn/metrics.hpp"
#include "igcn/phantom.hpp"

using namespace igcn;

namespace {

MeshGraph cube_at(double half, const Vec3& center) {
    MeshGraph m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back(center + Vec3{(i & 1 ? half : -half), (i & 2 ? half : -half),
                                           (i & 4 ? half : -half)});
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

MeshGraph unit_sheet(double z) {
    MeshGraph m;
    m.vertices = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

} // namespace

TEST_CASE("mean distance: identical meshes give zero") {
    const MeshGraph m = generate_phantom_mesh(PhantomSpec{});
    CHECK(mean_distance(m, m) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mean distance between parallel unit sheets equals the offset") {
    const MeshGraph a = unit_sheet(0.0);
    const MeshGraph b = unit_sheet(3.0);
    CHECK(mean_distance(a, b) == doctest::Approx(3.0).epsilon(1e-9));
    // Symmetry of the aggregate.
    CHECK(mean_distance(a, b) == doctest::Approx(mean_distance(b, a)).epsilon(1e-12));
}

TEST_CASE("mean distance between concentric spheres is the radial offset") {
    PhantomSpec inner, outer;
    inner.organ_semi_axes = {30, 30, 30};
    outer.organ_semi_axes = {32, 32, 32};
    const MeshGraph a = generate_phantom_mesh(inner);
    const MeshGraph b = generate_phantom_mesh(outer);
    CHECK(mean_distance(a, b) == doctest::Approx(2.0).epsilon(0.05));  // +- 0.1 mm
}

TEST_CASE("rmse oracles and error handling") {
    const MeshGraph m = generate_phantom_mesh(PhantomSpec{});
    CHECK(rmse_corresponding(m, m) == 0.0);
    DeformationField field;
    field.translation = {1.0, 2.0, 2.0};
    const MeshGraph moved = apply_deformation(m, field);
    CHECK(rmse_corresponding(m, moved) == doctest::Approx(3.0).epsilon(1e-12));

    MeshGraph a, b;
    a.vertices = {{0, 0, 0}, {0, 0, 0}};
    a.triangles = {{0, 1, 0}};  // connectivity unused by rmse
    b.vertices = {{1, 0, 0}, {0, 2, 0}};
    b.triangles = a.triangles;
    CHECK(rmse_corresponding(a, b) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));

    MeshGraph c = b;
    c.vertices.push_back({0, 0, 0});
    CHECK_THROWS_AS(rmse_corresponding(a, c), ValidationError);
}

TEST_CASE("rmse dominates the directed mean surface distance") {
    const MeshGraph m = generate_phantom_mesh(PhantomSpec{});
    DeformationField field;
    field.translation = {2.0, -1.0, 6.0};
    field.rbfs.push_back({{10, 0, 0}, 30.0, {3.0, 1.0, -2.0}});
    const MeshGraph moved = apply_deformation(m, field);
    CHECK(rmse_corresponding(m, moved) >= directed_mean_distance(m, moved) - 1e-12);
}

TEST_CASE("dice: identical, disjoint, and half-overlapping volumes") {
    const MeshGraph a = cube_at(10.0, {0, 0, 0});
    CHECK(dice_coefficient(a, a, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

    const MeshGraph far = cube_at(10.0, {100, 0, 0});
    CHECK(dice_coefficient(a, far, 2.0) == doctest::Approx(0.0));

    // Shift by half the side: overlap volume is half of each cube.
    const MeshGraph half = cube_at(10.0, {10.0, 0, 0});
    CHECK(dice_coefficient(a, half, 1.0) == doctest::Approx(0.5).epsilon(0.04));  // +- 0.02
    CHECK(dice_coefficient(a, half, 1.0) ==
          doctest::Approx(dice_coefficient(half, a, 1.0)).epsilon(1e-12));
}

TEST_CASE("dice is invariant under a shared rigid transform") {
    const MeshGraph a = cube_at(10.0, {0, 0, 0});
    const MeshGraph b = cube_at(10.0, {10.0, 0, 0});
    const double base = dice_coefficient(a, b, 1.0);
    const double angle = 0.6;
    const auto rotate = [&](MeshGraph m) {
        for (auto& v : m.vertices) {
            const double x = v.x * std::cos(angle) - v.y * std::sin(angle) + 7.0;
            const double y = v.x * std::sin(angle) + v.y * std::cos(angle) - 3.0;
            v.x = x;
            v.y = y;
            v.z += 5.0;
        }
        return m;
    };
    const double moved = dice_coefficient(rotate(a), rotate(b), 1.0);
    CHECK(moved == doctest::Approx(base).epsilon(0.04));
}

TEST_CASE("dice rejects open meshes") {
    MeshGraph open_mesh;
    open_mesh.vertices = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}};
    open_mesh.triangles = {{0, 1, 2}};
    const MeshGraph a = cube_at(10.0, {0, 0, 0});
    CHECK_THROWS_AS(dice_coefficient(a, open_mesh, 1.0), ValidationError);
}

TEST_CASE("report aggregation and table formatting") {
    std::vector<MetricsRow> rows;
    for (int s = 0; s < 3; ++s) {
        rows.push_back({s, "Initial", 5.0 + s, 10.0, 80.0, 0.0});
        rows.push_back({s, "full", 2.0, 4.0 + s, 90.0 + s, 12.5});
    }
    const auto report = summarize(std::move(rows), {"Initial", "full"});
    REQUIRE(report.summaries.size() == 2);
    CHECK(report.rows.size() == 6);
    CHECK(report.summaries[0].variant == "Initial");
    CHECK(report.summaries[0].md_mean == doctest::Approx(6.0));
    CHECK(report.summaries[0].md_std == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(report.summaries[1].rmse_mean == doctest::Approx(5.0));
    CHECK(report.summaries[1].time_mean_ms == doctest::Approx(12.5));
    const std::string table = format_report_table(report);
    CHECK(table.find("MD [mm]") != std::string::npos);
    CHECK(table.find("RMSE [mm]") != std::string::npos);
    CHECK(table.find("DSC [%]") != std::string::npos);
    CHECK(table.find("Initial") != std::string::npos);
    CHECK(table.find("full") != std::string::npos);
    CHECK_THROWS_AS(summarize({}, {"missing"}), ValidationError);
}
