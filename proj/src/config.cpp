#include "igcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace igcn {

namespace {

double to_double(const std::string& v) {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
    if (pos != v.size()) throw ValidationError("config: malformed number '" + v + "'");
    return d;
}

int to_int(const std::string& v) { return static_cast<int>(to_double(v)); }

std::uint64_t to_u64(const std::string& v) { return std::stoull(v); }

bool to_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ValidationError("config: malformed boolean '" + v + "'");
}

Vec3 to_vec3(const std::string& v) {
    std::stringstream ss(v);
    std::string item;
    double parts[3];
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, item, ',')) throw ValidationError("config: expected 3 values");
        parts[i] = to_double(item);
    }
    return {parts[0], parts[1], parts[2]};
}

std::array<double, 3> to_arr3(const std::string& v) {
    const Vec3 w = to_vec3(v);
    return {w.x, w.y, w.z};
}

std::vector<int> to_ints(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
    if (out.empty()) throw ValidationError("config: expected integer list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
        {"run.threads", [](RunConfig& c, const std::string& v) { c.threads = to_int(v); }},
        {"paths.dataset_dir", [](RunConfig& c, const std::string& v) { c.dataset_dir = v; }},
        {"paths.checkpoint_dir", [](RunConfig& c, const std::string& v) { c.checkpoint_dir = v; }},
        {"paths.report_dir", [](RunConfig& c, const std::string& v) { c.report_dir = v; }},

        {"phantom.organ_semi_axes",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.organ_semi_axes = to_vec3(v); }},
        {"phantom.organ_exponent_ns",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.organ_exponent_ns = to_double(v); }},
        {"phantom.organ_exponent_ew",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.organ_exponent_ew = to_double(v); }},
        {"phantom.vertex_count",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.vertex_count = to_int(v); }},
        {"phantom.body_semi_axis_x",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.body_semi_axis_x = to_double(v); }},
        {"phantom.body_semi_axis_y",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.body_semi_axis_y = to_double(v); }},
        {"phantom.body_center_y",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.body_center_y = to_double(v); }},
        {"phantom.body_attenuation",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.body_attenuation = to_double(v); }},
        {"phantom.spine_center_y",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.spine_center_y = to_double(v); }},
        {"phantom.spine_radius",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.spine_radius = to_double(v); }},
        {"phantom.spine_attenuation",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.spine_attenuation = to_double(v); }},
        {"phantom.organ_attenuation",
         [](RunConfig& c, const std::string& v) { c.dataset.phantom.organ_attenuation = to_double(v); }},

        {"camera.image_width",
         [](RunConfig& c, const std::string& v) { c.dataset.image_width = to_int(v); }},
        {"camera.image_height",
         [](RunConfig& c, const std::string& v) { c.dataset.image_height = to_int(v); }},
        {"camera.pixels_per_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.pixels_per_mm = to_double(v); }},

        {"volume.spacing_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.grid_spacing_mm = to_arr3(v); }},
        {"volume.margin_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.grid_margin_mm = to_double(v); }},
        {"volume.drr_step_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.drr_step_mm = to_double(v); }},

        {"deform.rbf_count",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.rbf_count = to_int(v); }},
        {"deform.rbf_amplitude_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.rbf_amplitude_mm = to_double(v); }},
        {"deform.rbf_width_mm",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.rbf_width_mm = to_double(v); }},
        {"deform.translation_mean",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.translation_mean = to_vec3(v); }},
        {"deform.translation_sigma",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.translation_sigma = to_vec3(v); }},
        {"deform.max_retries",
         [](RunConfig& c, const std::string& v) { c.dataset.deform.max_retries = to_int(v); }},

        {"dataset.n_train",
         [](RunConfig& c, const std::string& v) { c.dataset.n_train = to_int(v); }},
        {"dataset.n_augment",
         [](RunConfig& c, const std::string& v) { c.dataset.n_augment = to_int(v); }},
        {"dataset.n_test", [](RunConfig& c, const std::string& v) { c.dataset.n_test = to_int(v); }},
        {"dataset.save_volumes",
         [](RunConfig& c, const std::string& v) { c.save_volumes = to_bool(v); }},

        {"backbone.stage_widths",
         [](RunConfig& c, const std::string& v) { c.backbone.stage_widths = to_ints(v); }},
        {"backbone.convs_per_stage",
         [](RunConfig& c, const std::string& v) { c.backbone.convs_per_stage = to_int(v); }},
        {"backbone.kernel_size",
         [](RunConfig& c, const std::string& v) { c.backbone.kernel_size = to_int(v); }},
        {"backbone.exposed_stages",
         [](RunConfig& c, const std::string& v) { c.backbone.exposed_stages = to_ints(v); }},
        {"backbone.head_after_stage",
         [](RunConfig& c, const std::string& v) { c.backbone.head_after_stage = to_int(v); }},

        {"model.gcn_hidden", [](RunConfig& c, const std::string& v) { c.gcn_hidden = to_int(v); }},
        {"model.gcn_layers", [](RunConfig& c, const std::string& v) { c.gcn_layers = to_int(v); }},
        {"model.self_loops",
         [](RunConfig& c, const std::string& v) { c.self_loops = to_bool(v); }},
        {"model.residual_output",
         [](RunConfig& c, const std::string& v) { c.residual_output = to_bool(v); }},

        {"loss.lambda_map",
         [](RunConfig& c, const std::string& v) { c.loss.lambda_map = to_double(v); }},
        {"loss.lambda_laplacian",
         [](RunConfig& c, const std::string& v) { c.loss.lambda_laplacian = to_double(v); }},

        {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_int(v); }},
        {"train.lr", [](RunConfig& c, const std::string& v) { c.train.lr = to_double(v); }},
        {"train.dropout",
         [](RunConfig& c, const std::string& v) { c.train.dropout_rate = to_double(v); }},
        {"train.checkpoint_every",
         [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = to_int(v); }},

        {"eval.dice_spacing_mm",
         [](RunConfig& c, const std::string& v) { c.dice_spacing_mm = to_double(v); }},
    };
    return table;
}

} // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path.string());
    RunConfig config;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config: malformed section at line " +
                                      std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: expected key = value at line " +
                                  std::to_string(lineno));
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        const std::string full = section + "." + key;
        const auto it = setters().find(full);
        if (it == setters().end())
            throw ValidationError("config: unknown key '" + full + "' at line " +
                                  std::to_string(lineno));
        try {
            it->second(config, value);
        } catch (const std::exception& e) {
            throw ValidationError("config: bad value for '" + full + "': " + e.what());
        }
    }
    config.sync();
    return config;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    char buf[256];
    const auto num = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
        os << buf;
    };
    const auto vec = [&](const char* key, const Vec3& v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g,%.17g,%.17g\n", key, v.x, v.y, v.z);
        os << buf;
    };
    const auto ints = [&](const char* key, const std::vector<int>& v) {
        os << key << " = ";
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        os << '\n';
    };
    os << "[run]\n";
    os << "seed = " << c.seed << '\n';
    os << "threads = " << c.threads << "\n\n";
    os << "[paths]\n";
    os << "dataset_dir = " << c.dataset_dir << '\n';
    os << "checkpoint_dir = " << c.checkpoint_dir << '\n';
    os << "report_dir = " << c.report_dir << "\n\n";
    os << "[phantom]\n";
    vec("organ_semi_axes", c.dataset.phantom.organ_semi_axes);
    num("organ_exponent_ns", c.dataset.phantom.organ_exponent_ns);
    num("organ_exponent_ew", c.dataset.phantom.organ_exponent_ew);
    os << "vertex_count = " << c.dataset.phantom.vertex_count << '\n';
    num("body_semi_axis_x", c.dataset.phantom.body_semi_axis_x);
    num("body_semi_axis_y", c.dataset.phantom.body_semi_axis_y);
    num("body_center_y", c.dataset.phantom.body_center_y);
    num("body_attenuation", c.dataset.phantom.body_attenuation);
    num("spine_center_y", c.dataset.phantom.spine_center_y);
    num("spine_radius", c.dataset.phantom.spine_radius);
    num("spine_attenuation", c.dataset.phantom.spine_attenuation);
    num("organ_attenuation", c.dataset.phantom.organ_attenuation);
    os << '\n';
    os << "[camera]\n";
    os << "image_width = " << c.dataset.image_width << '\n';
    os << "image_height = " << c.dataset.image_height << '\n';
    num("pixels_per_mm", c.dataset.pixels_per_mm);
    os << '\n';
    os << "[volume]\n";
    std::snprintf(buf, sizeof(buf), "spacing_mm = %.17g,%.17g,%.17g\n",
                  c.dataset.grid_spacing_mm[0], c.dataset.grid_spacing_mm[1],
                  c.dataset.grid_spacing_mm[2]);
    os << buf;
    num("margin_mm", c.dataset.grid_margin_mm);
    num("drr_step_mm", c.dataset.drr_step_mm);
    os << '\n';
    os << "[deform]\n";
    os << "rbf_count = " << c.dataset.deform.rbf_count << '\n';
    num("rbf_amplitude_mm", c.dataset.deform.rbf_amplitude_mm);
    num("rbf_width_mm", c.dataset.deform.rbf_width_mm);
    vec("translation_mean", c.dataset.deform.translation_mean);
    vec("translation_sigma", c.dataset.deform.translation_sigma);
    os << "max_retries = " << c.dataset.deform.max_retries << "\n\n";
    os << "[dataset]\n";
    os << "n_train = " << c.dataset.n_train << '\n';
    os << "n_augment = " << c.dataset.n_augment << '\n';
    os << "n_test = " << c.dataset.n_test << '\n';
    os << "save_volumes = " << (c.save_volumes ? 1 : 0) << "\n\n";
    os << "[backbone]\n";
    ints("stage_widths", c.backbone.stage_widths);
    os << "convs_per_stage = " << c.backbone.convs_per_stage << '\n';
    os << "kernel_size = " << c.backbone.kernel_size << '\n';
    ints("exposed_stages", c.backbone.exposed_stages);
    os << "head_after_stage = " << c.backbone.head_after_stage << "\n\n";
    os << "[model]\n";
    os << "gcn_hidden = " << c.gcn_hidden << '\n';
    os << "gcn_layers = " << c.gcn_layers << '\n';
    os << "self_loops = " << (c.self_loops ? 1 : 0) << '\n';
    os << "residual_output = " << (c.residual_output ? 1 : 0) << "\n\n";
    os << "[loss]\n";
    num("lambda_map", c.loss.lambda_map);
    num("lambda_laplacian", c.loss.lambda_laplacian);
    os << '\n';
    os << "[train]\n";
    os << "epochs = " << c.train.epochs << '\n';
    num("lr", c.train.lr);
    num("dropout", c.train.dropout_rate);
    os << "checkpoint_every = " << c.train.checkpoint_every << "\n\n";
    os << "[eval]\n";
    num("dice_spacing_mm", c.dice_spacing_mm);
    return os.str();
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("config: cannot write " + path.string());
    out << serialize_config(config);
}

void apply_paper_scale(RunConfig& config) {
    config.dataset.image_width = 640;
    config.dataset.image_height = 640;
    config.dataset.pixels_per_mm = 2.0;
    config.dataset.grid_spacing_mm = {1.0, 1.0, 2.5};
    config.dataset.n_train = 20;
    config.dataset.n_augment = 124;
    config.dataset.n_test = 15;
    config.dice_spacing_mm = 1.0;
}

} // namespace igcn
