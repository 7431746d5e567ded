#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "igcn/config.hpp"

using namespace igcn;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "igcn_cfg_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream out(path);
    out << text;
    return path;
}

} // namespace

TEST_CASE("config round trip: serialize, load, serialize again") {
    RunConfig config;
    config.seed = 1234;
    config.dataset.n_train = 5;
    config.backbone.stage_widths = {8, 16, 32};
    config.backbone.exposed_stages = {1, 2};
    config.train.epochs = 77;
    config.loss.lambda_map = 3.5;
    config.sync();
    const std::string text = serialize_config(config);
    const auto path = write_temp("roundtrip.cfg", text);
    const RunConfig loaded = load_run_config(path);
    CHECK(serialize_config(loaded) == text);
    CHECK(loaded.seed == 1234);
    CHECK(loaded.dataset.seed == 1234);
    CHECK(loaded.train.seed == 1234);
    CHECK(loaded.backbone.stage_widths == std::vector<int>{8, 16, 32});
    CHECK(loaded.train.epochs == 77);
    CHECK(loaded.loss.lambda_map == doctest::Approx(3.5));
}

TEST_CASE("config parser: comments, spacing, and overrides") {
    const auto path = write_temp("style.cfg",
                                 "# a comment\n"
                                 "[run]\n"
                                 "seed = 9  # trailing comment\n"
                                 "\n"
                                 "[train]\n"
                                 "  epochs=42\n"
                                 "lr = 0.001\n");
    const RunConfig c = load_run_config(path);
    CHECK(c.seed == 9);
    CHECK(c.train.epochs == 42);
    CHECK(c.train.lr == doctest::Approx(1e-3));
    // Untouched keys keep their defaults.
    CHECK(c.train.dropout_rate == doctest::Approx(0.5));
    CHECK(c.loss.lambda_map == doctest::Approx(10.0));
    CHECK(c.gcn_layers == 8);
}

TEST_CASE("config parser rejects unknown keys and malformed values") {
    CHECK_THROWS_AS(load_run_config(write_temp("bad1.cfg", "[run]\nseeed = 3\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_run_config(write_temp("bad2.cfg", "[train]\nepochs = banana\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_run_config(write_temp("bad3.cfg", "[deform\nrbf_count = 1\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/igcn.cfg"), ValidationError);
}

TEST_CASE("paper-scale preset") {
    RunConfig c;
    apply_paper_scale(c);
    CHECK(c.dataset.image_width == 640);
    CHECK(c.dataset.image_height == 640);
    CHECK(c.dataset.grid_spacing_mm == std::array<double, 3>{1.0, 1.0, 2.5});
    CHECK(c.dataset.n_train + c.dataset.n_augment == 144);
    CHECK(c.dataset.n_test == 15);
}

TEST_CASE("defaults match the training recipe") {
    const RunConfig c;
    CHECK(c.train.epochs == 1000);
    CHECK(c.train.lr == doctest::Approx(1e-4));
    CHECK(c.train.dropout_rate == doctest::Approx(0.5));
    CHECK(c.loss.lambda_map == doctest::Approx(10.0));
    CHECK(c.loss.lambda_laplacian == doctest::Approx(1.0));
    CHECK(c.gcn_layers == 8);
    CHECK(c.dataset.phantom.vertex_count == 450);
}
