#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "igcn/common.hpp"
#include "igcn/geometry.hpp"

namespace igcn {

// Continuous pixel coordinates, origin at the top-left corner, u rightward,
// v downward. Points may lie outside the image; sampling clamps.
struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
};

// 3x4 projection from mm space to pixels plus the image dimensions.
// Orthographic cameras carry a [0 0 0 1] bottom row.
struct ProjectionCamera {
    std::array<double, 12> m{};  // row-major
    int width = 0;
    int height = 0;

    double at(int r, int c) const { return m[static_cast<std::size_t>(r) * 4 + c]; }
    double& at(int r, int c) { return m[static_cast<std::size_t>(r) * 4 + c]; }
};

PixelPoint project_vertex(const ProjectionCamera& camera, const Vec3& p);
std::vector<PixelPoint> project_vertices(const ProjectionCamera& camera,
                                         const std::vector<Vec3>& positions);

// Unit-square coordinates (u/width, v/height).
PixelPoint normalize_pixel(const PixelPoint& p, const ProjectionCamera& camera);

// Ray through pixel (u, v): unit direction, so the ray parameter is mm.
struct Ray {
    Vec3 origin;
    Vec3 dir;
};
Ray camera_ray(const ProjectionCamera& camera, double u, double v);

// Plain text serialization: 12 numbers row-major, then "width height".
ProjectionCamera load_camera(const std::filesystem::path& path);
void save_camera(const ProjectionCamera& camera, const std::filesystem::path& path);

// Bilinear footprint at (x, y) on a W x H grid with texels at integer
// coordinates. Coordinates clamp to [0, W-1] x [0, H-1]; inside the clamp
// region the coordinate gradient is zero in the clamped direction.
struct BilinearFoot {
    int x0 = 0, y0 = 0;      // low corner texel
    double fx = 0.0, fy = 0.0;  // fractional offsets in [0, 1]
    bool clamped_x = false, clamped_y = false;
};

BilinearFoot bilinear_foot(double x, double y, int width, int height);

// The four corner texels of a footprint (x0 already <= width-2 when width > 1).
inline void bilinear_corners(const BilinearFoot& f, int width, int height, int& x1, int& y1) {
    x1 = f.x0 + 1 < width ? f.x0 + 1 : f.x0;
    y1 = f.y0 + 1 < height ? f.y0 + 1 : f.y0;
}

// Interpolate C channels at one footprint. `map` is H x W x C row-major.
template <typename S>
inline void bilinear_fetch(const S* map, int width, int height, int channels,
                           const BilinearFoot& f, S* out) {
    int x1 = 0, y1 = 0;
    bilinear_corners(f, width, height, x1, y1);
    const std::size_t r00 = (static_cast<std::size_t>(f.y0) * width + f.x0) * channels;
    const std::size_t r01 = (static_cast<std::size_t>(f.y0) * width + x1) * channels;
    const std::size_t r10 = (static_cast<std::size_t>(y1) * width + f.x0) * channels;
    const std::size_t r11 = (static_cast<std::size_t>(y1) * width + x1) * channels;
    const S fx = static_cast<S>(f.fx), fy = static_cast<S>(f.fy);
    for (int c = 0; c < channels; ++c) {
        const S top = map[r00 + c] * (S(1) - fx) + map[r01 + c] * fx;
        const S bot = map[r10 + c] * (S(1) - fx) + map[r11 + c] * fx;
        out[c] = top * (S(1) - fy) + bot * fy;
    }
}

// Single-channel convenience used by the geometry-side code.
template <typename S>
inline S bilinear_sample(const S* map, int height, int width, double x, double y) {
    const BilinearFoot f = bilinear_foot(x, y, width, height);
    S out;
    bilinear_fetch(map, width, height, 1, f, &out);
    return out;
}

} // namespace igcn
