#pragma once

// Compute kernels behind the network and geometry code. Every kernel has a
// serial reference path and an OpenMP path partitioned over output elements,
// so the two produce bit-identical results; tests assert exact agreement and
// the `bench` command times both. Accumulations inside one output element
// always run in a fixed order -- no reductions across threads -- which keeps
// results independent of the thread count.

#include <omp.h>

#include <cstdint>
#include <vector>

#include "igcn/camera.hpp"
#include "igcn/common.hpp"
#include "igcn/geometry.hpp"
#include "igcn/mesh.hpp"
#include "igcn/sparse.hpp"
#include "igcn/volume.hpp"

namespace igcn::kern {

enum class Exec { Serial, Parallel };

// Process-wide default used by production call sites (CLI --serial flips it).
Exec default_exec();
void set_default_exec(Exec exec);

// Both execution modes run the same outlined loop body; the serial reference
// is the one-thread schedule. A shared body (rather than two separately
// compiled loops) is what makes serial/parallel agreement bitwise.
template <typename F>
inline void for_each_index(std::int64_t n, Exec exec, F&& body) {
    const int threads = exec == Exec::Parallel ? omp_get_max_threads() : 1;
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

inline int conv_out_dim(int in, int stride) { return (in + stride - 1) / stride; }

// Channel-block width: one 16-lane float vector. The hot loops accumulate a
// fixed-size block in registers and use `omp simd` so the compiler vectorizes
// exactly the independent-accumulator loop (outer-loop vectorization of these
// kernels degenerates into permute chains).
inline constexpr int kLane = 16;

// ---------------------------------------------------------------------------
// Dense network kernels (templated: float for training, double for checks).
// Layouts: x H x W x Cin, w kh x kw x Cin x Cout, y Ho x Wo x Cout, row-major.
// Same padding of (k-1)/2 on each side.
// ---------------------------------------------------------------------------

template <typename S>
void conv2d_forward(const S* x, int h, int w, int cin, const S* kernel, int k, int cout,
                    const S* bias, int stride, S* y, Exec exec) {
    if (k % 2 == 0) throw ValidationError("conv2d: kernel size must be odd");
    if (stride != 1 && stride != 2) throw ValidationError("conv2d: stride must be 1 or 2");
    const int ho = conv_out_dim(h, stride), wo = conv_out_dim(w, stride);
    const int pad = (k - 1) / 2;
    for_each_index(static_cast<std::int64_t>(ho) * wo, exec, [&](std::int64_t p) {
        const int oy = static_cast<int>(p / wo), ox = static_cast<int>(p % wo);
        S* yrow = y + p * cout;
        int cb = 0;
        for (; cb + kLane <= cout; cb += kLane) {
            S acc[kLane];
#pragma omp simd
            for (int c = 0; c < kLane; ++c) acc[c] = bias ? bias[cb + c] : S(0);
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const S* xrow = x + (static_cast<std::int64_t>(iy) * w + ix) * cin;
                    const S* wrow =
                        kernel + (static_cast<std::int64_t>(ky) * k + kx) * cin * cout + cb;
                    for (int ci = 0; ci < cin; ++ci) {
                        const S xv = xrow[ci];
                        const S* wk = wrow + static_cast<std::int64_t>(ci) * cout;
#pragma omp simd
                        for (int c = 0; c < kLane; ++c) acc[c] += xv * wk[c];
                    }
                }
            }
            for (int c = 0; c < kLane; ++c) yrow[cb + c] = acc[c];
        }
        for (; cb < cout; ++cb) {
            S acc = bias ? bias[cb] : S(0);
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const S* xrow = x + (static_cast<std::int64_t>(iy) * w + ix) * cin;
                    const S* wrow =
                        kernel + (static_cast<std::int64_t>(ky) * k + kx) * cin * cout + cb;
                    for (int ci = 0; ci < cin; ++ci)
                        acc += xrow[ci] * wrow[static_cast<std::int64_t>(ci) * cout];
                }
            }
            yrow[cb] = acc;
        }
    });
}

template <typename S>
void conv2d_backward_input(const S* gy, int h, int w, int cin, const S* kernel, int k, int cout,
                           int stride, S* gx, Exec exec) {
    const int ho = conv_out_dim(h, stride), wo = conv_out_dim(w, stride);
    const int pad = (k - 1) / 2;
    // Transposed kernel block (ky, kx, co, ci) so the inner accumulation runs
    // over independent, contiguous ci lanes.
    std::vector<S> wt(static_cast<std::size_t>(k) * k * cout * cin);
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
            for (int ci = 0; ci < cin; ++ci)
                for (int c = 0; c < cout; ++c)
                    wt[((static_cast<std::size_t>(ky) * k + kx) * cout + c) * cin + ci] =
                        kernel[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + c];
    const S* wtp = wt.data();
    for_each_index(static_cast<std::int64_t>(h) * w, exec, [&](std::int64_t p) {
        const int iy = static_cast<int>(p / w), ix = static_cast<int>(p % w);
        S* gxrow = gx + p * cin;
        int ib = 0;
        for (; ib + kLane <= cin; ib += kLane) {
            S acc[kLane] = {};
            for (int ky = 0; ky < k; ++ky) {
                const int ny = iy + pad - ky;
                if (ny < 0 || ny % stride != 0) continue;
                const int oy = ny / stride;
                if (oy >= ho) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int nx = ix + pad - kx;
                    if (nx < 0 || nx % stride != 0) continue;
                    const int ox = nx / stride;
                    if (ox >= wo) continue;
                    const S* grow = gy + (static_cast<std::int64_t>(oy) * wo + ox) * cout;
                    const S* wrow =
                        wtp + (static_cast<std::int64_t>(ky) * k + kx) * cout * cin + ib;
                    for (int c = 0; c < cout; ++c) {
                        const S gv = grow[c];
                        const S* wk = wrow + static_cast<std::int64_t>(c) * cin;
#pragma omp simd
                        for (int ci = 0; ci < kLane; ++ci) acc[ci] += gv * wk[ci];
                    }
                }
            }
            for (int ci = 0; ci < kLane; ++ci) gxrow[ib + ci] = acc[ci];
        }
        for (; ib < cin; ++ib) {
            S acc = S(0);
            for (int ky = 0; ky < k; ++ky) {
                const int ny = iy + pad - ky;
                if (ny < 0 || ny % stride != 0) continue;
                const int oy = ny / stride;
                if (oy >= ho) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int nx = ix + pad - kx;
                    if (nx < 0 || nx % stride != 0) continue;
                    const int ox = nx / stride;
                    if (ox >= wo) continue;
                    const S* grow = gy + (static_cast<std::int64_t>(oy) * wo + ox) * cout;
                    const S* wrow =
                        wtp + (static_cast<std::int64_t>(ky) * k + kx) * cout * cin + ib;
                    for (int c = 0; c < cout; ++c)
                        acc += grow[c] * wrow[static_cast<std::int64_t>(c) * cin];
                }
            }
            gxrow[ib] = acc;
        }
    });
}

template <typename S>
void conv2d_backward_weights(const S* x, const S* gy, int h, int w, int cin, int k, int cout,
                             int stride, S* gw, S* gb, Exec exec) {
    const int ho = conv_out_dim(h, stride), wo = conv_out_dim(w, stride);
    const int pad = (k - 1) / 2;
    // One thread owns one gw row (ky, kx, ci, :), so writes never collide.
    for_each_index(static_cast<std::int64_t>(k) * k * cin, exec, [&](std::int64_t t) {
        const int ci = static_cast<int>(t % cin);
        const int kx = static_cast<int>((t / cin) % k);
        const int ky = static_cast<int>(t / (static_cast<std::int64_t>(cin) * k));
        S* gwrow = gw + t * cout;
        int cb = 0;
        for (; cb + kLane <= cout; cb += kLane) {
            S acc[kLane] = {};
            for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const S xv = x[(static_cast<std::int64_t>(iy) * w + ix) * cin + ci];
                    const S* grow =
                        gy + (static_cast<std::int64_t>(oy) * wo + ox) * cout + cb;
#pragma omp simd
                    for (int c = 0; c < kLane; ++c) acc[c] += xv * grow[c];
                }
            }
            for (int c = 0; c < kLane; ++c) gwrow[cb + c] = acc[c];
        }
        for (; cb < cout; ++cb) {
            S acc = S(0);
            for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    acc += x[(static_cast<std::int64_t>(iy) * w + ix) * cin + ci] *
                           gy[(static_cast<std::int64_t>(oy) * wo + ox) * cout + cb];
                }
            }
            gwrow[cb] = acc;
        }
    });
    if (gb) {
        for (int c = 0; c < cout; ++c) gb[c] = S(0);
        const std::int64_t pixels = static_cast<std::int64_t>(ho) * wo;
        for (std::int64_t p = 0; p < pixels; ++p)
            for (int c = 0; c < cout; ++c) gb[c] += gy[p * cout + c];
    }
}

namespace detail {

// One output row of row_out = sum_k scale(k) * rows[k], accumulated in
// register blocks of kLane lanes with a scalar tail.
template <typename S, typename ScaleAt, typename RowAt>
inline void accumulate_row(S* out, int width, int terms, const ScaleAt& scale_at,
                           const RowAt& row_at) {
    int jb = 0;
    for (; jb + kLane <= width; jb += kLane) {
        S acc[kLane] = {};
        for (int kk = 0; kk < terms; ++kk) {
            const S sv = scale_at(kk);
            const S* row = row_at(kk) + jb;
#pragma omp simd
            for (int j = 0; j < kLane; ++j) acc[j] += sv * row[j];
        }
        for (int j = 0; j < kLane; ++j) out[jb + j] = acc[j];
    }
    for (; jb < width; ++jb) {
        S acc = S(0);
        for (int kk = 0; kk < terms; ++kk) acc += scale_at(kk) * row_at(kk)[jb];
        out[jb] = acc;
    }
}

} // namespace detail

// y = x (n x m) * w (m x p)
template <typename S>
void matmul(const S* x, const S* w, int n, int m, int p, S* y, Exec exec) {
    for_each_index(n, exec, [&](std::int64_t i) {
        const S* xrow = x + i * m;
        detail::accumulate_row(
            y + i * p, p, m, [&](int kk) { return xrow[kk]; },
            [&](int kk) { return w + static_cast<std::int64_t>(kk) * p; });
    });
}

// y = x^T (m x n) * t (n x p); parallel over rows of the m x p output.
template <typename S>
void matmul_tn(const S* x, const S* t, int n, int m, int p, S* y, Exec exec) {
    for_each_index(m, exec, [&](std::int64_t kk) {
        detail::accumulate_row(
            y + kk * p, p, n, [&](int i) { return x[static_cast<std::int64_t>(i) * m + kk]; },
            [&](int i) { return t + static_cast<std::int64_t>(i) * p; });
    });
}

// y = t (n x p) * w^T, with w stored row-major m x p. Transposing w up front
// turns the inner loop into independent contiguous accumulators.
template <typename S>
void matmul_nt(const S* t, const S* w, int n, int p, int m, S* y, Exec exec) {
    std::vector<S> wt(static_cast<std::size_t>(p) * m);
    for (int kk = 0; kk < m; ++kk)
        for (int j = 0; j < p; ++j)
            wt[static_cast<std::size_t>(j) * m + kk] = w[static_cast<std::size_t>(kk) * p + j];
    const S* wtp = wt.data();
    for_each_index(n, exec, [&](std::int64_t i) {
        const S* trow = t + i * p;
        detail::accumulate_row(
            y + i * m, m, p, [&](int j) { return trow[j]; },
            [&](int j) { return wtp + static_cast<std::int64_t>(j) * m; });
    });
}

// y = M (sparse n x n) * x (n x f)
template <typename S>
void spmm(const SparseMatrixT<S>& msp, const S* x, int f, S* y, Exec exec) {
    for_each_index(msp.rows, exec, [&](std::int64_t i) {
        const int lo = msp.row_ptr[i];
        detail::accumulate_row(
            y + i * f, f, msp.row_ptr[i + 1] - lo,
            [&](int kk) { return msp.vals[lo + kk]; },
            [&](int kk) {
                return x + static_cast<std::int64_t>(msp.col_idx[lo + kk]) * f;
            });
    });
}

// 2x2/stride-2 max pooling; argmax stores the flat input pixel index per
// output element for backward routing (first index wins ties).
template <typename S>
void maxpool2_forward(const S* x, int h, int w, int c, S* y, int* argmax, Exec exec) {
    if (h % 2 != 0 || w % 2 != 0) throw ValidationError("max_pool2d: spatial dims must be even");
    const int ho = h / 2, wo = w / 2;
    for_each_index(static_cast<std::int64_t>(ho) * wo, exec, [&](std::int64_t p) {
        const int oy = static_cast<int>(p / wo), ox = static_cast<int>(p % wo);
        for (int ch = 0; ch < c; ++ch) {
            S best = x[((static_cast<std::int64_t>(2 * oy)) * w + 2 * ox) * c + ch];
            int besti = (2 * oy) * w + 2 * ox;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int iy = 2 * oy + dy, ix = 2 * ox + dx;
                    const S v = x[(static_cast<std::int64_t>(iy) * w + ix) * c + ch];
                    if (v > best) {
                        best = v;
                        besti = iy * w + ix;
                    }
                }
            }
            y[p * c + ch] = best;
            argmax[p * c + ch] = besti;
        }
    });
}

template <typename S>
void maxpool2_backward(const S* gy, const int* argmax, int ho, int wo, int c, S* gx,
                       std::int64_t gx_size, Exec exec) {
    for_each_index(gx_size, exec, [&](std::int64_t i) { gx[i] = S(0); });
    // Windows are disjoint, so scattering per output element cannot collide.
    for_each_index(static_cast<std::int64_t>(ho) * wo, exec, [&](std::int64_t p) {
        for (int ch = 0; ch < c; ++ch)
            gx[static_cast<std::int64_t>(argmax[p * c + ch]) * c + ch] += gy[p * c + ch];
    });
}

// ---------------------------------------------------------------------------
// Geometry kernels (double precision).
// ---------------------------------------------------------------------------

// Closest point on triangle (a, b, c) to p; exact region decomposition.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Shortest distance from each query point to the surface of `mesh`.
std::vector<double> directed_surface_distances(const std::vector<Vec3>& queries,
                                               const MeshGraph& mesh, Exec exec);

// Per-pixel line integral of attenuation (mm-weighted, trapezoidal rule with
// step <= max_step). No display normalization here.
std::vector<double> drr_raw(const VoxelVolume& volume, const ProjectionCamera& camera,
                            double max_step, Exec exec);

// Odd crossing parity along +x rays through voxel centers. Requires a closed
// mesh; a mesh outside the grid yields zero occupancy.
std::vector<std::uint8_t> voxelize_parity(const MeshGraph& mesh, const VoxelVolume& grid,
                                          Exec exec);

} // namespace igcn::kern
