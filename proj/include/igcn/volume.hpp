#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "igcn/common.hpp"
#include "igcn/geometry.hpp"

namespace igcn {

// Scalar attenuation grid. `origin` is the corner of voxel (0,0,0); the
// center of voxel (i,j,k) sits at origin + (i+0.5, j+0.5, k+0.5) * spacing.
struct VoxelVolume {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    Vec3 origin;
    std::vector<float> values;

    VoxelVolume() = default;
    VoxelVolume(std::array<int, 3> d, std::array<double, 3> s, Vec3 o)
        : dims(d), spacing(s), origin(o),
          values(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0.0f) {
        if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0)
            throw ValidationError("volume: dims must be positive");
        if (s[0] <= 0.0 || s[1] <= 0.0 || s[2] <= 0.0)
            throw ValidationError("volume: spacing must be positive");
    }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    float& at(int i, int j, int k) { return values[index(i, j, k)]; }
    float at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 voxel_center(int i, int j, int k) const {
        return {origin.x + (i + 0.5) * spacing[0], origin.y + (j + 0.5) * spacing[1],
                origin.z + (k + 0.5) * spacing[2]};
    }

    Vec3 extent_max() const {
        return {origin.x + dims[0] * spacing[0], origin.y + dims[1] * spacing[1],
                origin.z + dims[2] * spacing[2]};
    }

    // Border-extend trilinear interpolation at a world-space point.
    double sample(const Vec3& p) const;
};

// Raw little-endian float32 payload plus a sidecar text header
// (<stem>.hdr next to <stem>.raw).
VoxelVolume load_volume(const std::filesystem::path& header_path);
void save_volume(const VoxelVolume& volume, const std::filesystem::path& header_path);

} // namespace igcn
