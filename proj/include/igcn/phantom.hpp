#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "igcn/camera.hpp"
#include "igcn/image.hpp"
#include "igcn/kernels.hpp"
#include "igcn/mesh.hpp"
#include "igcn/volume.hpp"

namespace igcn {

// Rejected deformations (triangle flips) raise this; the dataset builder
// resamples a bounded number of times before giving up.
struct ExcessiveDeformationError : ValidationError {
    using ValidationError::ValidationError;
};

// Synthetic stand-in for the clinical anatomy: a superellipsoid organ inside
// an elliptic body cylinder with a high-attenuation spine rod.
struct PhantomSpec {
    Vec3 organ_semi_axes{45.0, 35.0, 30.0};  // mm
    double organ_exponent_ns = 2.0;          // 2 = ellipsoid; >2 boxier, <2 pointier
    double organ_exponent_ew = 2.0;
    int vertex_count = 450;

    double body_semi_axis_x = 130.0;
    double body_semi_axis_y = 90.0;
    double body_center_y = 20.0;
    double body_attenuation = 0.010;  // per mm

    double spine_center_y = 60.0;
    double spine_radius = 12.0;
    double spine_attenuation = 0.040;

    double organ_attenuation = 0.020;

    std::uint64_t seed = 0;  // deformation sampling only; geometry is deterministic
};

void validate_spec(const PhantomSpec& spec);

// Gaussian radial-basis displacement bump.
struct RbfDisplacement {
    Vec3 center;
    double width = 30.0;  // mm, > 0
    Vec3 amplitude;       // mm
};

// Global translation plus a sum of local Gaussian bumps.
struct DeformationField {
    Vec3 translation;
    std::vector<RbfDisplacement> rbfs;
};

Vec3 displacement_at(const DeformationField& field, const Vec3& p);

// Closed, connected, manifold triangulation of the organ superellipsoid with
// approximately spec.vertex_count vertices.
MeshGraph generate_phantom_mesh(const PhantomSpec& spec);

// v -> v + t + sum_k a_k exp(-|v - c_k|^2 / (2 w_k^2)); connectivity is
// preserved. Throws ExcessiveDeformationError if any triangle flips.
MeshGraph apply_deformation(const MeshGraph& mesh, const DeformationField& field);

// Occupancy by odd crossing parity at voxel centers (see kern::voxelize_parity).
std::vector<std::uint8_t> voxelize_mesh(const MeshGraph& mesh, const VoxelVolume& grid,
                                        kern::Exec exec = kern::default_exec());

// Grid covering the body section and the organ's z extent plus margins.
VoxelVolume make_phantom_grid(const PhantomSpec& spec, std::array<double, 3> spacing_mm,
                              double margin_mm);

// Body + spine background only (no organ).
VoxelVolume base_attenuation_volume(const PhantomSpec& spec, const VoxelVolume& grid);

// Body + spine + organ occupancy attenuation, summed where overlapping.
VoxelVolume compose_attenuation_volume(const PhantomSpec& spec, const MeshGraph& organ,
                                       const VoxelVolume& grid);

// Orthographic projection along +y: u = s x + W/2, v = -s z + H/2.
ProjectionCamera make_orthographic_camera(int width, int height, double pixels_per_mm);

struct DrrResult {
    Image display;            // min-max normalized to [0, 1]
    std::vector<double> raw;  // line integrals before normalization
    double raw_min = 0.0;
    double raw_max = 0.0;
};

// Ray-cast line integrals; step defaults to half the smallest grid spacing.
DrrResult render_drr(const VoxelVolume& volume, const ProjectionCamera& camera,
                     double max_step = 0.0, kern::Exec exec = kern::default_exec());

// One (initial, target, image) pair with shared vertex correspondence.
struct TrainingSample {
    MeshGraph initial;
    MeshGraph target;
    Image drr;
    ProjectionCamera camera;
};

struct SampleRecord {
    int id = 0;
    std::string split;  // "train" | "test"
    std::string kind;   // "deform" | "translate"
    std::string initial_path, target_path, drr_path, camera_path;
    Vec3 translation;
    std::vector<RbfDisplacement> rbfs;
    double drr_raw_min = 0.0, drr_raw_max = 0.0;
};

struct DeformConfig {
    int rbf_count = 3;
    double rbf_amplitude_mm = 4.0;
    double rbf_width_mm = 30.0;
    Vec3 translation_mean{0.0, 0.0, 10.0};  // craniocaudal-dominant by default
    Vec3 translation_sigma{2.0, 2.0, 5.0};
    int max_retries = 20;
};

struct DatasetConfig {
    PhantomSpec phantom;
    DeformConfig deform;
    int image_width = 128;
    int image_height = 128;
    double pixels_per_mm = 0.5;
    std::array<double, 3> grid_spacing_mm{2.0, 2.0, 2.0};
    double grid_margin_mm = 25.0;
    double drr_step_mm = 0.0;  // 0 = auto
    int n_train = 8;    // locally deformed + translated training samples
    int n_augment = 12; // translation-only augmentation samples
    int n_test = 15;
    std::uint64_t seed = 0;
};

struct GeneratedSample {
    SampleRecord record;
    MeshGraph target;
    Image drr;
};

struct Dataset {
    MeshGraph initial;
    ProjectionCamera camera;
    std::vector<GeneratedSample> samples;
};

// Deterministic given the seed: each sample owns a generator derived from
// (seed, split, index), so parallel and serial generation agree.
Dataset build_dataset(const DatasetConfig& config, kern::Exec exec = kern::default_exec());

// On-disk layout: initial.obj, camera.txt, target_####.obj, drr_####.pgm,
// manifest.csv, all under `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct LoadedDataset {
    MeshGraph initial;
    ProjectionCamera camera;
    std::vector<SampleRecord> records;
    std::filesystem::path dir;

    TrainingSample load_sample(const SampleRecord& record) const;
    std::vector<const SampleRecord*> split(const std::string& name) const;
    const SampleRecord& record_by_id(int id) const;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

} // namespace igcn
