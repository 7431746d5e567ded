#include "igcn/camera.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace igcn {

PixelPoint project_vertex(const ProjectionCamera& camera, const Vec3& p) {
    const auto row = [&](int r) {
        return camera.at(r, 0) * p.x + camera.at(r, 1) * p.y + camera.at(r, 2) * p.z +
               camera.at(r, 3);
    };
    const double w = row(2);
    if (std::abs(w) < 1e-9)
        throw ValidationError("project: point at or behind the camera plane (w' ~ 0)");
    return {row(0) / w, row(1) / w};
}

std::vector<PixelPoint> project_vertices(const ProjectionCamera& camera,
                                         const std::vector<Vec3>& positions) {
    std::vector<PixelPoint> out;
    out.reserve(positions.size());
    for (const auto& p : positions) out.push_back(project_vertex(camera, p));
    return out;
}

PixelPoint normalize_pixel(const PixelPoint& p, const ProjectionCamera& camera) {
    if (camera.width <= 0 || camera.height <= 0)
        throw ValidationError("normalize_pixel: camera dimensions must be positive");
    return {p.u / camera.width, p.v / camera.height};
}

namespace {

bool is_orthographic(const ProjectionCamera& c) {
    return std::abs(c.at(2, 0)) < 1e-12 && std::abs(c.at(2, 1)) < 1e-12 &&
           std::abs(c.at(2, 2)) < 1e-12;
}

Vec3 row_xyz(const ProjectionCamera& c, int r) {
    return {c.at(r, 0), c.at(r, 1), c.at(r, 2)};
}

// Invert the left 3x3 block.
bool invert3(const std::array<double, 9>& a, std::array<double, 9>& inv) {
    const double det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                       a[2] * (a[3] * a[7] - a[4] * a[6]);
    if (std::abs(det) < 1e-14) return false;
    const double d = 1.0 / det;
    inv[0] = (a[4] * a[8] - a[5] * a[7]) * d;
    inv[1] = (a[2] * a[7] - a[1] * a[8]) * d;
    inv[2] = (a[1] * a[5] - a[2] * a[4]) * d;
    inv[3] = (a[5] * a[6] - a[3] * a[8]) * d;
    inv[4] = (a[0] * a[8] - a[2] * a[6]) * d;
    inv[5] = (a[2] * a[3] - a[0] * a[5]) * d;
    inv[6] = (a[3] * a[7] - a[4] * a[6]) * d;
    inv[7] = (a[1] * a[6] - a[0] * a[7]) * d;
    inv[8] = (a[0] * a[4] - a[1] * a[3]) * d;
    return true;
}

} // namespace

Ray camera_ray(const ProjectionCamera& camera, double u, double v) {
    if (is_orthographic(camera)) {
        const double w = camera.at(2, 3);
        if (std::abs(w) < 1e-12) throw ValidationError("camera_ray: degenerate w row");
        const Vec3 r0 = row_xyz(camera, 0), r1 = row_xyz(camera, 1);
        const double a = u * w - camera.at(0, 3);
        const double b = v * w - camera.at(1, 3);
        // Minimum-norm solution of the 2x3 system [r0; r1] X = (a, b).
        const double g00 = dot(r0, r0), g01 = dot(r0, r1), g11 = dot(r1, r1);
        const double det = g00 * g11 - g01 * g01;
        if (std::abs(det) < 1e-14) throw ValidationError("camera_ray: degenerate projection rows");
        const double c0 = (g11 * a - g01 * b) / det;
        const double c1 = (g00 * b - g01 * a) / det;
        Ray ray;
        ray.origin = r0 * c0 + r1 * c1;
        ray.dir = normalized(cross(r0, r1));
        return ray;
    }
    std::array<double, 9> p{camera.at(0, 0), camera.at(0, 1), camera.at(0, 2),
                            camera.at(1, 0), camera.at(1, 1), camera.at(1, 2),
                            camera.at(2, 0), camera.at(2, 1), camera.at(2, 2)};
    std::array<double, 9> inv{};
    if (!invert3(p, inv)) throw ValidationError("camera_ray: singular projection matrix");
    const auto mul = [&](const Vec3& x) {
        return Vec3{inv[0] * x.x + inv[1] * x.y + inv[2] * x.z,
                    inv[3] * x.x + inv[4] * x.y + inv[5] * x.z,
                    inv[6] * x.x + inv[7] * x.y + inv[8] * x.z};
    };
    Ray ray;
    ray.origin = mul(Vec3{-camera.at(0, 3), -camera.at(1, 3), -camera.at(2, 3)});
    ray.dir = normalized(mul(Vec3{u, v, 1.0}));
    return ray;
}

ProjectionCamera load_camera(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("camera: cannot open " + path.string());
    ProjectionCamera c;
    for (auto& x : c.m)
        if (!(in >> x)) throw ValidationError("camera: truncated matrix");
    if (!(in >> c.width >> c.height)) throw ValidationError("camera: missing dimensions");
    if (c.width <= 0 || c.height <= 0) throw ValidationError("camera: bad dimensions");
    return c;
}

void save_camera(const ProjectionCamera& camera, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("camera: cannot write " + path.string());
    char buf[64];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g%c", camera.at(r, c), c == 3 ? '\n' : ' ');
            out << buf;
        }
    }
    out << camera.width << ' ' << camera.height << '\n';
}

BilinearFoot bilinear_foot(double x, double y, int width, int height) {
    if (width <= 0 || height <= 0) throw ValidationError("bilinear: empty map");
    BilinearFoot f;
    const double xmax = static_cast<double>(width - 1);
    const double ymax = static_cast<double>(height - 1);
    if (x < 0.0) { x = 0.0; f.clamped_x = true; }
    if (x > xmax) { x = xmax; f.clamped_x = true; }
    if (y < 0.0) { y = 0.0; f.clamped_y = true; }
    if (y > ymax) { y = ymax; f.clamped_y = true; }
    f.x0 = static_cast<int>(std::floor(x));
    f.y0 = static_cast<int>(std::floor(y));
    if (f.x0 >= width - 1) f.x0 = width > 1 ? width - 2 : 0;
    if (f.y0 >= height - 1) f.y0 = height > 1 ? height - 2 : 0;
    f.fx = width > 1 ? x - f.x0 : 0.0;
    f.fy = height > 1 ? y - f.y0 : 0.0;
    return f;
}

} // namespace igcn
