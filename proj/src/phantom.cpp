#include "igcn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "igcn/rng.hpp"

namespace igcn {

void validate_spec(const PhantomSpec& spec) {
    if (spec.organ_semi_axes.x <= 0.0 || spec.organ_semi_axes.y <= 0.0 ||
        spec.organ_semi_axes.z <= 0.0)
        throw ValidationError("phantom: organ semi-axes must be positive");
    if (spec.organ_exponent_ns <= 0.0 || spec.organ_exponent_ew <= 0.0)
        throw ValidationError("phantom: organ exponents must be positive");
    if (spec.vertex_count < 10) throw ValidationError("phantom: vertex count too small");
    if (spec.body_semi_axis_x <= 0.0 || spec.body_semi_axis_y <= 0.0)
        throw ValidationError("phantom: body semi-axes must be positive");
    if (spec.spine_radius <= 0.0) throw ValidationError("phantom: spine radius must be positive");
    // Organ is centered at the origin; it must fit inside the body section.
    const double rx = spec.organ_semi_axes.x / spec.body_semi_axis_x;
    const double ry = (std::abs(spec.body_center_y) + spec.organ_semi_axes.y) /
                      spec.body_semi_axis_y;
    if (rx >= 1.0 || ry >= 1.0)
        throw ValidationError("phantom: organ is not contained in the body section");
}

Vec3 displacement_at(const DeformationField& field, const Vec3& p) {
    Vec3 d = field.translation;
    for (const auto& rbf : field.rbfs) {
        if (rbf.width <= 0.0) throw ValidationError("deformation: rbf width must be positive");
        const double r2 = norm2(p - rbf.center);
        d += rbf.amplitude * std::exp(-r2 / (2.0 * rbf.width * rbf.width));
    }
    return d;
}

namespace {

double signed_pow(double w, double m) {
    return w >= 0.0 ? std::pow(w, m) : -std::pow(-w, m);
}

} // namespace

MeshGraph generate_phantom_mesh(const PhantomSpec& spec) {
    validate_spec(spec);
    // Ring/segment counts chosen so rings*segments + 2 ~ vertex_count with the
    // rings/segments ratio of the default 450-vertex layout.
    const int target = spec.vertex_count - 2;
    int segments = std::max(4, static_cast<int>(std::lround(std::sqrt(target / 1.75))));
    int rings = std::max(3, static_cast<int>(std::lround(static_cast<double>(target) / segments)));

    const double m1 = 2.0 / spec.organ_exponent_ns;
    const double m2 = 2.0 / spec.organ_exponent_ew;
    const Vec3 ax = spec.organ_semi_axes;

    MeshGraph mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(rings) * segments + 2);
    for (int r = 0; r < rings; ++r) {
        const double u = -M_PI / 2.0 + M_PI * (r + 1) / (rings + 1);
        const double cu = std::cos(u), su = std::sin(u);
        for (int s = 0; s < segments; ++s) {
            const double v = 2.0 * M_PI * s / segments - M_PI;
            const double cv = std::cos(v), sv = std::sin(v);
            mesh.vertices.push_back({ax.x * signed_pow(cu, m1) * signed_pow(cv, m2),
                                     ax.y * signed_pow(cu, m1) * signed_pow(sv, m2),
                                     ax.z * signed_pow(su, m1)});
        }
    }
    const int south = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back({0.0, 0.0, -ax.z});
    const int north = south + 1;
    mesh.vertices.push_back({0.0, 0.0, ax.z});

    const auto ring_vertex = [&](int r, int s) { return r * segments + (s % segments); };
    for (int s = 0; s < segments; ++s) {
        mesh.triangles.push_back({south, ring_vertex(0, s + 1), ring_vertex(0, s)});
        mesh.triangles.push_back({north, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
    }
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
            const int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
            mesh.triangles.push_back({a, b, d});
            mesh.triangles.push_back({a, d, c});
        }
    }
    validate_mesh(mesh);
    return mesh;
}

MeshGraph apply_deformation(const MeshGraph& mesh, const DeformationField& field) {
    MeshGraph out;
    out.triangles = mesh.triangles;
    out.vertices.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) out.vertices.push_back(v + displacement_at(field, v));
    for (const auto& t : mesh.triangles) {
        const Vec3 n0 = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                              mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        const Vec3 n1 = cross(out.vertices[t[1]] - out.vertices[t[0]],
                              out.vertices[t[2]] - out.vertices[t[0]]);
        if (dot(n0, n1) <= 0.0)
            throw ExcessiveDeformationError("deformation: triangle flip detected");
    }
    return out;
}

std::vector<std::uint8_t> voxelize_mesh(const MeshGraph& mesh, const VoxelVolume& grid,
                                        kern::Exec exec) {
    return kern::voxelize_parity(mesh, grid, exec);
}

VoxelVolume make_phantom_grid(const PhantomSpec& spec, std::array<double, 3> spacing_mm,
                              double margin_mm) {
    if (spacing_mm[0] <= 0.0 || spacing_mm[1] <= 0.0 || spacing_mm[2] <= 0.0)
        throw ValidationError("grid: spacing must be positive");
    const double x_half = spec.body_semi_axis_x + spacing_mm[0];
    const double y_lo = spec.body_center_y - spec.body_semi_axis_y - spacing_mm[1];
    const double y_hi = spec.body_center_y + spec.body_semi_axis_y + spacing_mm[1];
    const double z_half = spec.organ_semi_axes.z + margin_mm;
    const int nx = static_cast<int>(std::ceil(2.0 * x_half / spacing_mm[0]));
    const int ny = static_cast<int>(std::ceil((y_hi - y_lo) / spacing_mm[1]));
    const int nz = static_cast<int>(std::ceil(2.0 * z_half / spacing_mm[2]));
    return VoxelVolume({nx, ny, nz}, spacing_mm,
                       {-nx * spacing_mm[0] / 2.0, y_lo, -nz * spacing_mm[2] / 2.0});
}

VoxelVolume base_attenuation_volume(const PhantomSpec& spec, const VoxelVolume& grid) {
    VoxelVolume vol(grid.dims, grid.spacing, grid.origin);
    for (int k = 0; k < vol.dims[2]; ++k) {
        for (int j = 0; j < vol.dims[1]; ++j) {
            for (int i = 0; i < vol.dims[0]; ++i) {
                const Vec3 c = vol.voxel_center(i, j, k);
                float a = 0.0f;
                const double ex = c.x / spec.body_semi_axis_x;
                const double ey = (c.y - spec.body_center_y) / spec.body_semi_axis_y;
                if (ex * ex + ey * ey <= 1.0) a += static_cast<float>(spec.body_attenuation);
                const double sx = c.x, sy = c.y - spec.spine_center_y;
                if (sx * sx + sy * sy <= spec.spine_radius * spec.spine_radius)
                    a += static_cast<float>(spec.spine_attenuation);
                vol.at(i, j, k) = a;
            }
        }
    }
    return vol;
}

VoxelVolume compose_attenuation_volume(const PhantomSpec& spec, const MeshGraph& organ,
                                       const VoxelVolume& grid) {
    VoxelVolume vol = base_attenuation_volume(spec, grid);
    const auto occ = voxelize_mesh(organ, grid);
    for (std::size_t i = 0; i < occ.size(); ++i)
        if (occ[i]) vol.values[i] += static_cast<float>(spec.organ_attenuation);
    return vol;
}

ProjectionCamera make_orthographic_camera(int width, int height, double pixels_per_mm) {
    if (width <= 0 || height <= 0 || pixels_per_mm <= 0.0)
        throw ValidationError("camera: bad orthographic parameters");
    ProjectionCamera c;
    c.width = width;
    c.height = height;
    c.at(0, 0) = pixels_per_mm;
    c.at(0, 3) = width / 2.0;
    c.at(1, 2) = -pixels_per_mm;
    c.at(1, 3) = height / 2.0;
    c.at(2, 3) = 1.0;
    return c;
}

DrrResult render_drr(const VoxelVolume& volume, const ProjectionCamera& camera, double max_step,
                     kern::Exec exec) {
    if (max_step <= 0.0)
        max_step = 0.5 * std::min({volume.spacing[0], volume.spacing[1], volume.spacing[2]});
    DrrResult out;
    out.raw = kern::drr_raw(volume, camera, max_step, exec);
    out.raw_min = *std::min_element(out.raw.begin(), out.raw.end());
    out.raw_max = *std::max_element(out.raw.begin(), out.raw.end());
    out.display = Image(camera.height, camera.width);
    const double span = out.raw_max - out.raw_min;
    for (std::size_t i = 0; i < out.raw.size(); ++i)
        out.display.px[i] =
            span > 0.0 ? static_cast<float>((out.raw[i] - out.raw_min) / span) : 0.0f;
    return out;
}

namespace {

DeformationField sample_field(const DeformConfig& cfg, const PhantomSpec& spec, Rng& rng,
                              bool translation_only) {
    DeformationField field;
    field.translation = {rng.normal(cfg.translation_mean.x, cfg.translation_sigma.x),
                         rng.normal(cfg.translation_mean.y, cfg.translation_sigma.y),
                         rng.normal(cfg.translation_mean.z, cfg.translation_sigma.z)};
    if (!translation_only) {
        for (int k = 0; k < cfg.rbf_count; ++k) {
            RbfDisplacement rbf;
            rbf.center = {rng.uniform(-spec.organ_semi_axes.x, spec.organ_semi_axes.x),
                          rng.uniform(-spec.organ_semi_axes.y, spec.organ_semi_axes.y),
                          rng.uniform(-spec.organ_semi_axes.z, spec.organ_semi_axes.z)};
            rbf.width = cfg.rbf_width_mm;
            rbf.amplitude = {rng.normal(0.0, cfg.rbf_amplitude_mm),
                             rng.normal(0.0, cfg.rbf_amplitude_mm),
                             rng.normal(0.0, cfg.rbf_amplitude_mm)};
            field.rbfs.push_back(rbf);
        }
    }
    return field;
}

std::string format_rbfs(const std::vector<RbfDisplacement>& rbfs) {
    std::string out;
    char buf[256];
    for (std::size_t i = 0; i < rbfs.size(); ++i) {
        const auto& r = rbfs[i];
        std::snprintf(buf, sizeof(buf), "%s%.9g:%.9g:%.9g:%.9g:%.9g:%.9g:%.9g",
                      i == 0 ? "" : "|", r.center.x, r.center.y, r.center.z, r.width,
                      r.amplitude.x, r.amplitude.y, r.amplitude.z);
        out += buf;
    }
    return out;
}

std::vector<RbfDisplacement> parse_rbfs(const std::string& text) {
    std::vector<RbfDisplacement> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, '|')) {
        std::replace(item.begin(), item.end(), ':', ' ');
        std::istringstream fs(item);
        RbfDisplacement r;
        if (!(fs >> r.center.x >> r.center.y >> r.center.z >> r.width >> r.amplitude.x >>
              r.amplitude.y >> r.amplitude.z))
            throw ValidationError("manifest: malformed rbf field");
        out.push_back(r);
    }
    return out;
}

} // namespace

Dataset build_dataset(const DatasetConfig& config, kern::Exec exec) {
    validate_spec(config.phantom);
    if (config.n_train < 0 || config.n_augment < 0 || config.n_test <= 0)
        throw ValidationError("dataset: sample counts must be positive");
    if (config.n_train + config.n_augment <= 0)
        throw ValidationError("dataset: empty training split");

    Dataset ds;
    ds.initial = generate_phantom_mesh(config.phantom);
    ds.camera = make_orthographic_camera(config.image_width, config.image_height,
                                         config.pixels_per_mm);
    const VoxelVolume grid =
        make_phantom_grid(config.phantom, config.grid_spacing_mm,
                          config.grid_margin_mm + std::abs(config.deform.translation_mean.z) +
                              3.0 * config.deform.translation_sigma.z);
    const VoxelVolume base = base_attenuation_volume(config.phantom, grid);

    struct Plan {
        std::string split, kind;
        std::uint64_t stream;
    };
    std::vector<Plan> plans;
    for (int i = 0; i < config.n_train; ++i)
        plans.push_back({"train", "deform", static_cast<std::uint64_t>(i)});
    for (int i = 0; i < config.n_augment; ++i)
        plans.push_back({"train", "translate", 1000000ULL + static_cast<std::uint64_t>(i)});
    for (int i = 0; i < config.n_test; ++i)
        plans.push_back({"test", "deform", 2000000ULL + static_cast<std::uint64_t>(i)});

    const int total = static_cast<int>(plans.size());
    ds.samples.resize(static_cast<std::size_t>(total));
    std::vector<std::string> errors(static_cast<std::size_t>(total));

    kern::for_each_index(total, exec, [&](std::int64_t idx) {
        const Plan& plan = plans[static_cast<std::size_t>(idx)];
        try {
            Rng rng(derive_seed(config.seed, plan.stream));
            MeshGraph target;
            DeformationField field;
            bool ok = false;
            for (int attempt = 0; attempt <= config.deform.max_retries; ++attempt) {
                field = sample_field(config.deform, config.phantom, rng,
                                     plan.kind == "translate");
                try {
                    target = apply_deformation(ds.initial, field);
                    ok = true;
                    break;
                } catch (const ExcessiveDeformationError&) {
                    continue;
                }
            }
            if (!ok)
                throw ExcessiveDeformationError(
                    "dataset: retries exhausted while sampling a valid deformation");

            VoxelVolume vol = base;
            const auto occ = voxelize_mesh(target, grid, kern::Exec::Serial);
            for (std::size_t i = 0; i < occ.size(); ++i)
                if (occ[i]) vol.values[i] += static_cast<float>(config.phantom.organ_attenuation);
            const DrrResult drr =
                render_drr(vol, ds.camera, config.drr_step_mm, kern::Exec::Serial);

            GeneratedSample& g = ds.samples[static_cast<std::size_t>(idx)];
            g.target = std::move(target);
            g.drr = drr.display;
            g.record.id = static_cast<int>(idx);
            g.record.split = plan.split;
            g.record.kind = plan.kind;
            g.record.translation = field.translation;
            g.record.rbfs = field.rbfs;
            g.record.drr_raw_min = drr.raw_min;
            g.record.drr_raw_max = drr.raw_max;
            char name[64];
            std::snprintf(name, sizeof(name), "target_%04d.obj", g.record.id);
            g.record.target_path = name;
            std::snprintf(name, sizeof(name), "drr_%04d.pgm", g.record.id);
            g.record.drr_path = name;
            g.record.initial_path = "initial.obj";
            g.record.camera_path = "camera.txt";
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(idx)] = e.what();
        }
    });

    for (const auto& e : errors)
        if (!e.empty()) throw ValidationError("dataset: " + e);
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_obj(dataset.initial, dir / "initial.obj");
    save_camera(dataset.camera, dir / "camera.txt");
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw ValidationError("dataset: cannot write manifest");
    manifest << "id,split,kind,initial,target,drr,camera,tx,ty,tz,rbfs,drr_raw_min,drr_raw_max\n";
    char buf[256];
    for (const auto& g : dataset.samples) {
        save_obj(g.target, dir / g.record.target_path);
        save_pgm16(g.drr, dir / g.record.drr_path);
        const auto& r = g.record;
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g", r.translation.x, r.translation.y,
                      r.translation.z);
        manifest << r.id << ',' << r.split << ',' << r.kind << ',' << r.initial_path << ','
                 << r.target_path << ',' << r.drr_path << ',' << r.camera_path << ',' << buf
                 << ',' << format_rbfs(r.rbfs) << ',';
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r.drr_raw_min, r.drr_raw_max);
        manifest << buf;
    }
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.csv");
    if (!in) throw ValidationError("dataset: cannot open manifest in " + dir.string());
    LoadedDataset ds;
    ds.dir = dir;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 13) throw ValidationError("manifest: malformed row");
        SampleRecord r;
        r.id = std::stoi(fields[0]);
        r.split = fields[1];
        r.kind = fields[2];
        r.initial_path = fields[3];
        r.target_path = fields[4];
        r.drr_path = fields[5];
        r.camera_path = fields[6];
        r.translation = {std::stod(fields[7]), std::stod(fields[8]), std::stod(fields[9])};
        r.rbfs = parse_rbfs(fields[10]);
        r.drr_raw_min = std::stod(fields[11]);
        r.drr_raw_max = std::stod(fields[12]);
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) throw ValidationError("manifest: no samples");
    ds.initial = load_obj(dir / ds.records.front().initial_path);
    ds.camera = load_camera(dir / ds.records.front().camera_path);
    return ds;
}

TrainingSample LoadedDataset::load_sample(const SampleRecord& record) const {
    TrainingSample s;
    s.initial = initial;
    s.camera = camera;
    s.target = load_obj(dir / record.target_path);
    s.drr = load_pgm16(dir / record.drr_path);
    return s;
}

std::vector<const SampleRecord*> LoadedDataset::split(const std::string& name) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
        if (r.split == name) out.push_back(&r);
    return out;
}

const SampleRecord& LoadedDataset::record_by_id(int id) const {
    for (const auto& r : records)
        if (r.id == id) return r;
    throw ValidationError("dataset: no sample with id " + std::to_string(id));
}

} // namespace igcn
