#include "igcn/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <omp.h>
#include <cmath>
#include <limits>

namespace igcn::kern {

namespace {
// The OpenMP path only pays off with real threads; on a single hardware
// thread the serial reference is the faster default.
Exec initial_exec() {
    return omp_get_max_threads() > 1 ? Exec::Parallel : Exec::Serial;
}
std::atomic<Exec> g_default_exec{initial_exec()};
}

Exec default_exec() { return g_default_exec.load(); }
void set_default_exec(Exec exec) { g_default_exec.store(exec); }

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson-style barycentric region walk.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + ab * v;
    }

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + ac * w;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return a + ab * v + ac * w;
}

std::vector<double> directed_surface_distances(const std::vector<Vec3>& queries,
                                               const MeshGraph& mesh, Exec exec) {
    if (mesh.triangles.empty()) throw ValidationError("distance: empty mesh");
    std::vector<double> out(queries.size(), 0.0);
    for_each_index(static_cast<std::int64_t>(queries.size()), exec, [&](std::int64_t qi) {
        const Vec3& p = queries[static_cast<std::size_t>(qi)];
        double best = std::numeric_limits<double>::max();
        for (const auto& t : mesh.triangles) {
            const Vec3 cp = closest_point_on_triangle(p, mesh.vertices[t[0]],
                                                      mesh.vertices[t[1]], mesh.vertices[t[2]]);
            best = std::min(best, norm2(p - cp));
        }
        out[static_cast<std::size_t>(qi)] = std::sqrt(best);
    });
    return out;
}

namespace {

// Clip a ray against the volume's axis-aligned box; returns false on miss.
bool clip_ray_aabb(const Ray& ray, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::max();
    t1 = std::numeric_limits<double>::max();
    const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
    const double d[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
    const double lov[3] = {lo.x, lo.y, lo.z};
    const double hiv[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (o[a] < lov[a] || o[a] > hiv[a]) return false;
            continue;
        }
        double ta = (lov[a] - o[a]) / d[a];
        double tb = (hiv[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 < t1;
}

} // namespace

std::vector<double> drr_raw(const VoxelVolume& volume, const ProjectionCamera& camera,
                            double max_step, Exec exec) {
    if (camera.width <= 0 || camera.height <= 0)
        throw ValidationError("drr: camera dimensions must be positive");
    if (max_step <= 0.0) throw ValidationError("drr: step must be positive");
    const Vec3 lo = volume.origin;
    const Vec3 hi = volume.extent_max();
    std::vector<double> img(static_cast<std::size_t>(camera.width) * camera.height, 0.0);
    for_each_index(static_cast<std::int64_t>(img.size()), exec, [&](std::int64_t p) {
        const int py = static_cast<int>(p / camera.width);
        const int px = static_cast<int>(p % camera.width);
        const Ray ray = camera_ray(camera, static_cast<double>(px), static_cast<double>(py));
        double t0 = 0.0, t1 = 0.0;
        if (!clip_ray_aabb(ray, lo, hi, t0, t1)) return;
        const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / max_step)));
        const double h = (t1 - t0) / steps;
        double acc = 0.5 * (volume.sample(ray.origin + ray.dir * t0) +
                            volume.sample(ray.origin + ray.dir * t1));
        for (int s = 1; s < steps; ++s)
            acc += volume.sample(ray.origin + ray.dir * (t0 + h * s));
        img[static_cast<std::size_t>(p)] = acc * h;
    });
    return img;
}

namespace {

// PNPOLY crossing test in the (y, z) plane; half-open edge rule keeps parity
// consistent across triangles sharing an edge.
bool point_in_projected_triangle(double py, double pz, const Vec3& a, const Vec3& b,
                                 const Vec3& c) {
    const double vy[3] = {a.y, b.y, c.y};
    const double vz[3] = {a.z, b.z, c.z};
    bool inside = false;
    for (int i = 0, j = 2; i < 3; j = i++) {
        if (((vz[i] > pz) != (vz[j] > pz)) &&
            (py < (vy[j] - vy[i]) * (pz - vz[i]) / (vz[j] - vz[i]) + vy[i]))
            inside = !inside;
    }
    return inside;
}

} // namespace

std::vector<std::uint8_t> voxelize_parity(const MeshGraph& mesh, const VoxelVolume& grid,
                                          Exec exec) {
    if (!is_watertight(mesh)) throw ValidationError("voxelize: mesh is not watertight");
    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    std::vector<std::uint8_t> occ(static_cast<std::size_t>(nx) * ny * nz, 0);

    // Bucket triangles by the (y, z) rays their projection can cross.
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(ny) * nz);
    for (int ti = 0; ti < mesh.triangle_count(); ++ti) {
        const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const double ymin = std::min({a.y, b.y, c.y}), ymax = std::max({a.y, b.y, c.y});
        const double zmin = std::min({a.z, b.z, c.z}), zmax = std::max({a.z, b.z, c.z});
        // Center cy(j) = origin.y + (j + 0.5) sy in [ymin, ymax].
        int j0 = static_cast<int>(std::floor((ymin - grid.origin.y) / grid.spacing[1] - 0.5));
        int j1 = static_cast<int>(std::ceil((ymax - grid.origin.y) / grid.spacing[1] - 0.5));
        int k0 = static_cast<int>(std::floor((zmin - grid.origin.z) / grid.spacing[2] - 0.5));
        int k1 = static_cast<int>(std::ceil((zmax - grid.origin.z) / grid.spacing[2] - 0.5));
        j0 = std::max(j0, 0);
        k0 = std::max(k0, 0);
        j1 = std::min(j1, ny - 1);
        k1 = std::min(k1, nz - 1);
        for (int k = k0; k <= k1; ++k)
            for (int j = j0; j <= j1; ++j)
                buckets[static_cast<std::size_t>(k) * ny + j].push_back(ti);
    }

    for_each_index(static_cast<std::int64_t>(ny) * nz, exec, [&](std::int64_t r) {
        const int j = static_cast<int>(r % ny);
        const int k = static_cast<int>(r / ny);
        const auto& bucket = buckets[static_cast<std::size_t>(k) * ny + j];
        if (bucket.empty()) return;
        const double cy = grid.origin.y + (j + 0.5) * grid.spacing[1];
        const double cz = grid.origin.z + (k + 0.5) * grid.spacing[2];
        std::vector<double> crossings;
        for (int ti : bucket) {
            const auto& t = mesh.triangles[static_cast<std::size_t>(ti)];
            const Vec3& a = mesh.vertices[t[0]];
            const Vec3& b = mesh.vertices[t[1]];
            const Vec3& c = mesh.vertices[t[2]];
            if (!point_in_projected_triangle(cy, cz, a, b, c)) continue;
            const Vec3 n = cross(b - a, c - a);
            if (std::abs(n.x) < 1e-30) continue;  // ray parallel to the triangle plane
            const double x = a.x - (n.y * (cy - a.y) + n.z * (cz - a.z)) / n.x;
            crossings.push_back(x);
        }
        if (crossings.empty()) return;
        std::sort(crossings.begin(), crossings.end());
        std::uint8_t* row = occ.data() + (static_cast<std::size_t>(k) * ny + j) * nx;
        const auto mark_centers_between = [&](double xa, double xb) {
            int i0 = static_cast<int>(std::floor((xa - grid.origin.x) / grid.spacing[0] - 0.5)) + 1;
            int i1 = static_cast<int>(std::ceil((xb - grid.origin.x) / grid.spacing[0] - 0.5)) - 1;
            i0 = std::max(i0, 0);
            i1 = std::min(i1, nx - 1);
            for (int i = i0; i <= i1; ++i) {
                const double cx = grid.origin.x + (i + 0.5) * grid.spacing[0];
                if (cx > xa && cx < xb) row[i] = 1;
            }
        };
        if (crossings.size() % 2 == 0) {
            for (std::size_t s = 0; s + 1 < crossings.size(); s += 2)
                mark_centers_between(crossings[s], crossings[s + 1]);
        } else {
            // Degenerate crossing count: fall back to per-center parity.
            for (int i = 0; i < nx; ++i) {
                const double cx = grid.origin.x + (i + 0.5) * grid.spacing[0];
                int count = 0;
                for (double x : crossings)
                    if (x > cx) ++count;
                if (count % 2 == 1) row[i] = 1;
            }
        }
    });
    return occ;
}

} // namespace igcn::kern
