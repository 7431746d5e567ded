#pragma once

// Minimal reverse-mode tape. Nodes record cached forward values plus a
// backward closure; creation order is the topological order, and backward()
// visits nodes exactly once in reverse. Templated on the scalar so training
// runs in float and gradient checks run in double.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "igcn/camera.hpp"
#include "igcn/common.hpp"
#include "igcn/kernels.hpp"
#include "igcn/rng.hpp"
#include "igcn/sparse.hpp"
#include "igcn/tensor.hpp"

namespace igcn::ad {

using NodeId = int;

template <typename S>
class Tape {
public:
    using Backward = std::function<void(Tape&, NodeId self)>;

    NodeId leaf(Tensor<S> value) { return emplace(std::move(value), nullptr); }

    NodeId emplace(Tensor<S> value, Backward back) {
        Node node;
        node.value = std::move(value);
        node.grad = Tensor<S>(node.value.shape);
        node.back = std::move(back);
        nodes_.push_back(std::move(node));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    const Tensor<S>& val(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor<S>& grad(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Seed d(output)/d(output) = 1 and sweep the tape in reverse.
    void backward(NodeId output) {
        if (val(output).size() != 1) throw ValidationError("backward: output must be scalar");
        for (auto& n : nodes_) n.grad.fill(S(0));
        grad(output).v[0] = S(1);
        for (NodeId id = output; id >= 0; --id) {
            auto& node = nodes_[static_cast<std::size_t>(id)];
            if (node.back) node.back(*this, id);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;
        Backward back;
    };
    std::vector<Node> nodes_;
};

// Sparse operator plus its transpose, cast once to the tape scalar.
template <typename S>
struct TapeSparse {
    SparseMatrixT<S> m;
    SparseMatrixT<S> mt;

    static TapeSparse from(const SparseMatrix& src) {
        TapeSparse ts;
        ts.m = src.cast<S>();
        ts.mt = src.transposed().cast<S>();
        return ts;
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Cross-correlation with same padding of (k-1)/2; stride 1 preserves the
// spatial dims. x is H x W x Cin, kernel k x k x Cin x Cout, bias Cout.
template <typename S>
NodeId conv2d(Tape<S>& tape, NodeId x, NodeId w, NodeId b, int stride) {
    const auto& xv = tape.val(x);
    const auto& wv = tape.val(w);
    if (xv.rank() != 3 || wv.rank() != 4)
        throw ValidationError("conv2d: expected H x W x Cin input, k x k x Cin x Cout kernel");
    const int h = xv.dim(0), wd = xv.dim(1), cin = xv.dim(2);
    const int k = wv.dim(0), cout = wv.dim(3);
    if (wv.dim(1) != k || wv.dim(2) != cin) throw ValidationError("conv2d: kernel shape mismatch");
    if (tape.val(b).size() != cout) throw ValidationError("conv2d: bias shape mismatch");
    const int ho = kern::conv_out_dim(h, stride), wo = kern::conv_out_dim(wd, stride);
    Tensor<S> y({ho, wo, cout});
    kern::conv2d_forward(xv.data(), h, wd, cin, wv.data(), k, cout, tape.val(b).data(), stride,
                         y.data(), kern::default_exec());
    return tape.emplace(std::move(y), [=](Tape<S>& t, NodeId self) {
        const S* gy = t.grad(self).data();
        {
            std::vector<S> gx(static_cast<std::size_t>(h) * wd * cin);
            kern::conv2d_backward_input(gy, h, wd, cin, t.val(w).data(), k, cout, stride,
                                        gx.data(), kern::default_exec());
            auto& dst = t.grad(x);
            for (std::size_t i = 0; i < gx.size(); ++i) dst.v[i] += gx[i];
        }
        {
            std::vector<S> gw(static_cast<std::size_t>(k) * k * cin * cout);
            std::vector<S> gb(static_cast<std::size_t>(cout));
            kern::conv2d_backward_weights(t.val(x).data(), gy, h, wd, cin, k, cout, stride,
                                          gw.data(), gb.data(), kern::default_exec());
            auto& dw = t.grad(w);
            for (std::size_t i = 0; i < gw.size(); ++i) dw.v[i] += gw[i];
            auto& db = t.grad(b);
            for (std::size_t i = 0; i < gb.size(); ++i) db.v[i] += gb[i];
        }
    });
}

template <typename S>
NodeId relu(Tape<S>& tape, NodeId x) {
    Tensor<S> y = tape.val(x);
    for (auto& v : y.v) v = v > S(0) ? v : S(0);
    return tape.emplace(std::move(y), [x](Tape<S>& t, NodeId self) {
        const auto& xv = t.val(x);
        const auto& gy = t.grad(self);
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < gx.v.size(); ++i)
            if (xv.v[i] > S(0)) gx.v[i] += gy.v[i];
    });
}

// 2x2 window, stride 2; gradient routes to the argmax (first index on ties).
template <typename S>
NodeId max_pool2d(Tape<S>& tape, NodeId x) {
    const auto& xv = tape.val(x);
    if (xv.rank() != 3) throw ValidationError("max_pool2d: expected H x W x C input");
    const int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
    const int ho = h / 2, wo = w / 2;
    Tensor<S> y({ho, wo, c});
    auto argmax = std::make_shared<std::vector<int>>(y.v.size());
    kern::maxpool2_forward(xv.data(), h, w, c, y.data(), argmax->data(), kern::default_exec());
    return tape.emplace(std::move(y), [x, argmax, ho, wo, c](Tape<S>& t, NodeId self) {
        auto& gx = t.grad(x);
        std::vector<S> scratch(gx.v.size());
        kern::maxpool2_backward(t.grad(self).data(), argmax->data(), ho, wo, c, scratch.data(),
                                static_cast<std::int64_t>(scratch.size()), kern::default_exec());
        for (std::size_t i = 0; i < scratch.size(); ++i) gx.v[i] += scratch[i];
    });
}

// y (n x p) = x (n x m) * w (m x p)
template <typename S>
NodeId matmul(Tape<S>& tape, NodeId x, NodeId w) {
    const auto& xv = tape.val(x);
    const auto& wv = tape.val(w);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
        throw ValidationError("matmul: shape mismatch");
    const int n = xv.dim(0), m = xv.dim(1), p = wv.dim(1);
    Tensor<S> y({n, p});
    kern::matmul(xv.data(), wv.data(), n, m, p, y.data(), kern::default_exec());
    return tape.emplace(std::move(y), [x, w, n, m, p](Tape<S>& t, NodeId self) {
        const S* gy = t.grad(self).data();
        {
            std::vector<S> gx(static_cast<std::size_t>(n) * m);
            kern::matmul_nt(gy, t.val(w).data(), n, p, m, gx.data(), kern::default_exec());
            auto& dst = t.grad(x);
            for (std::size_t i = 0; i < gx.size(); ++i) dst.v[i] += gx[i];
        }
        {
            std::vector<S> gw(static_cast<std::size_t>(m) * p);
            kern::matmul_tn(t.val(x).data(), gy, n, m, p, gw.data(), kern::default_exec());
            auto& dst = t.grad(w);
            for (std::size_t i = 0; i < gw.size(); ++i) dst.v[i] += gw[i];
        }
    });
}

// Affine map of a single feature vector: y (p) = x (m) w (m x p) + b (p).
template <typename S>
NodeId dense(Tape<S>& tape, NodeId x, NodeId w, NodeId b) {
    const auto& xv = tape.val(x);
    const auto& wv = tape.val(w);
    if (xv.rank() != 1 || wv.rank() != 2 || xv.dim(0) != wv.dim(0))
        throw ValidationError("dense: shape mismatch");
    const int m = wv.dim(0), p = wv.dim(1);
    if (tape.val(b).size() != p) throw ValidationError("dense: bias shape mismatch");
    Tensor<S> y({p});
    kern::matmul(xv.data(), wv.data(), 1, m, p, y.data(), kern::Exec::Serial);
    for (int j = 0; j < p; ++j) y.v[j] += tape.val(b).v[j];
    return tape.emplace(std::move(y), [x, w, b, m, p](Tape<S>& t, NodeId self) {
        const S* gy = t.grad(self).data();
        auto& gx = t.grad(x);
        const auto& wv2 = t.val(w);
        for (int i = 0; i < m; ++i) {
            S acc = S(0);
            for (int j = 0; j < p; ++j) acc += gy[j] * wv2.v[static_cast<std::size_t>(i) * p + j];
            gx.v[i] += acc;
        }
        auto& gw = t.grad(w);
        const auto& xv2 = t.val(x);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p; ++j)
                gw.v[static_cast<std::size_t>(i) * p + j] += xv2.v[i] * gy[j];
        auto& gb = t.grad(b);
        for (int j = 0; j < p; ++j) gb.v[j] += gy[j];
    });
}

// Same data, new shape; gradients pass through untouched.
template <typename S>
NodeId reshape(Tape<S>& tape, NodeId x, std::vector<int> shape) {
    if (Tensor<S>::numel(shape) != tape.val(x).size())
        throw ValidationError("reshape: element count mismatch");
    Tensor<S> y(std::move(shape), tape.val(x).v);
    return tape.emplace(std::move(y), [x](Tape<S>& t, NodeId self) {
        const auto& gy = t.grad(self);
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
    });
}

// Concatenate along `axis`; all other dims must match.
template <typename S>
NodeId concat(Tape<S>& tape, NodeId a, NodeId b, int axis) {
    const auto& av = tape.val(a);
    const auto& bv = tape.val(b);
    if (av.rank() != bv.rank() || axis < 0 || axis >= av.rank())
        throw ValidationError("concat: rank/axis mismatch");
    for (int d = 0; d < av.rank(); ++d)
        if (d != axis && av.dim(d) != bv.dim(d)) throw ValidationError("concat: shape mismatch");
    std::vector<int> shape = av.shape;
    shape[axis] += bv.dim(axis);
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= av.dim(d);
    for (int d = axis + 1; d < av.rank(); ++d) inner *= av.dim(d);
    const std::int64_t wa = av.dim(axis) * inner, wb = bv.dim(axis) * inner;
    Tensor<S> y(shape);
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(av.data() + o * wa, wa, y.data() + o * (wa + wb));
        std::copy_n(bv.data() + o * wb, wb, y.data() + o * (wa + wb) + wa);
    }
    return tape.emplace(std::move(y), [a, b, outer, wa, wb](Tape<S>& t, NodeId self) {
        const S* gy = t.grad(self).data();
        auto& ga = t.grad(a);
        auto& gb = t.grad(b);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t i = 0; i < wa; ++i) ga.v[o * wa + i] += gy[o * (wa + wb) + i];
            for (std::int64_t i = 0; i < wb; ++i) gb.v[o * wb + i] += gy[o * (wa + wb) + wa + i];
        }
    });
}

// Inverted dropout: zero with probability `rate`, survivors scaled by
// 1/(1-rate). Identity in eval mode and at rate 0.
template <typename S>
NodeId dropout(Tape<S>& tape, NodeId x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) {
        Tensor<S> y = tape.val(x);
        return tape.emplace(std::move(y), [x](Tape<S>& t, NodeId self) {
            const auto& gy = t.grad(self);
            auto& gx = t.grad(x);
            for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
        });
    }
    const S scale = static_cast<S>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<S>>(tape.val(x).v.size());
    for (auto& m : *mask) m = rng.uniform() < rate ? S(0) : scale;
    Tensor<S> y = tape.val(x);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= (*mask)[i];
    return tape.emplace(std::move(y), [x, mask](Tape<S>& t, NodeId self) {
        const auto& gy = t.grad(self);
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i] * (*mask)[i];
    });
}

// y = M x for a fixed sparse operator (not a tape value).
template <typename S>
NodeId spmm(Tape<S>& tape, const std::shared_ptr<const TapeSparse<S>>& op, NodeId x) {
    const auto& xv = tape.val(x);
    if (xv.rank() != 2 || xv.dim(0) != op->m.rows)
        throw ValidationError("spmm: operator size does not match input rows");
    const int f = xv.dim(1);
    Tensor<S> y({op->m.rows, f});
    kern::spmm(op->m, xv.data(), f, y.data(), kern::default_exec());
    return tape.emplace(std::move(y), [op, x, f](Tape<S>& t, NodeId self) {
        std::vector<S> gx(t.grad(x).v.size());
        kern::spmm(op->mt, t.grad(self).data(), f, gx.data(), kern::default_exec());
        auto& dst = t.grad(x);
        for (std::size_t i = 0; i < gx.size(); ++i) dst.v[i] += gx[i];
    });
}

// One graph-convolution layer sigma(M X W); identity or ReLU activation.
template <typename S>
NodeId graph_convolution(Tape<S>& tape, NodeId x, const std::shared_ptr<const TapeSparse<S>>& op,
                         NodeId w, bool relu_activation) {
    const NodeId y = spmm(tape, op, matmul(tape, x, w));
    return relu_activation ? relu(tape, y) : y;
}

// Sample C channels at n points. Points are rows (u, v) in normalized units;
// they are scaled by (scale_x, scale_y) into the map's texel space and
// clamped. Differentiable in both the map and the points.
template <typename S>
NodeId bilinear_gather(Tape<S>& tape, NodeId map, NodeId points, double scale_x, double scale_y) {
    const auto& mv = tape.val(map);
    const auto& pv = tape.val(points);
    if (mv.rank() != 3) throw ValidationError("bilinear: expected H x W x C map");
    if (pv.rank() != 2 || pv.dim(1) != 2) throw ValidationError("bilinear: expected n x 2 points");
    const int h = mv.dim(0), w = mv.dim(1), c = mv.dim(2);
    const int n = pv.dim(0);
    Tensor<S> y({n, c});
    auto feet = std::make_shared<std::vector<BilinearFoot>>(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double px = static_cast<double>(pv.at(i, 0)) * scale_x;
        const double py = static_cast<double>(pv.at(i, 1)) * scale_y;
        (*feet)[i] = bilinear_foot(px, py, w, h);
        bilinear_fetch(mv.data(), w, h, c, (*feet)[i], y.data() + static_cast<std::size_t>(i) * c);
    }
    return tape.emplace(std::move(y), [map, points, feet, h, w, c, n, scale_x, scale_y](
                                          Tape<S>& t, NodeId self) {
        const auto& gy = t.grad(self);
        const auto& mv2 = t.val(map);
        auto& gmap = t.grad(map);
        auto& gpts = t.grad(points);
        for (int i = 0; i < n; ++i) {
            const BilinearFoot& f = (*feet)[i];
            int x1 = 0, y1 = 0;
            bilinear_corners(f, w, h, x1, y1);
            const std::size_t r00 = (static_cast<std::size_t>(f.y0) * w + f.x0) * c;
            const std::size_t r01 = (static_cast<std::size_t>(f.y0) * w + x1) * c;
            const std::size_t r10 = (static_cast<std::size_t>(y1) * w + f.x0) * c;
            const std::size_t r11 = (static_cast<std::size_t>(y1) * w + x1) * c;
            const S fx = static_cast<S>(f.fx), fy = static_cast<S>(f.fy);
            S du = S(0), dv = S(0);
            for (int ch = 0; ch < c; ++ch) {
                const S g = gy.v[static_cast<std::size_t>(i) * c + ch];
                gmap.v[r00 + ch] += g * (S(1) - fx) * (S(1) - fy);
                gmap.v[r01 + ch] += g * fx * (S(1) - fy);
                gmap.v[r10 + ch] += g * (S(1) - fx) * fy;
                gmap.v[r11 + ch] += g * fx * fy;
                du += g * ((S(1) - fy) * (mv2.v[r01 + ch] - mv2.v[r00 + ch]) +
                           fy * (mv2.v[r11 + ch] - mv2.v[r10 + ch]));
                dv += g * ((S(1) - fx) * (mv2.v[r10 + ch] - mv2.v[r00 + ch]) +
                           fx * (mv2.v[r11 + ch] - mv2.v[r01 + ch]));
            }
            if (!f.clamped_x) gpts.at(i, 0) += du * static_cast<S>(scale_x);
            if (!f.clamped_y) gpts.at(i, 1) += dv * static_cast<S>(scale_y);
        }
    });
}

template <typename S>
NodeId add(Tape<S>& tape, NodeId a, NodeId b) {
    const auto& av = tape.val(a);
    const auto& bv = tape.val(b);
    if (av.shape != bv.shape) throw ValidationError("add: shape mismatch");
    Tensor<S> y = av;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += bv.v[i];
    return tape.emplace(std::move(y), [a, b](Tape<S>& t, NodeId self) {
        const auto& gy = t.grad(self);
        auto& ga = t.grad(a);
        auto& gb = t.grad(b);
        for (std::size_t i = 0; i < gy.v.size(); ++i) {
            ga.v[i] += gy.v[i];
            gb.v[i] += gy.v[i];
        }
    });
}

// Mean over rows of squared row differences: (1/n) sum_i |a_i - t_i|^2.
template <typename S>
NodeId mse_rows(Tape<S>& tape, NodeId a, const Tensor<S>& target) {
    const auto& av = tape.val(a);
    if (av.shape != target.shape || av.rank() != 2)
        throw ValidationError("loss: prediction/target size mismatch");
    const int n = av.dim(0);
    double acc = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
        const double d = static_cast<double>(av.v[i]) - static_cast<double>(target.v[i]);
        acc += d * d;
    }
    Tensor<S> y({1});
    y.v[0] = static_cast<S>(acc / n);
    auto tgt = std::make_shared<Tensor<S>>(target);
    return tape.emplace(std::move(y), [a, tgt, n](Tape<S>& t, NodeId self) {
        const S g = t.grad(self).v[0];
        const auto& av2 = t.val(a);
        auto& ga = t.grad(a);
        const S scale = g * S(2) / static_cast<S>(n);
        for (std::size_t i = 0; i < ga.v.size(); ++i)
            ga.v[i] += scale * (av2.v[i] - tgt->v[i]);
    });
}

// Scalar sum of squared entries; the reduction used to scalarize op outputs
// in gradient checks.
template <typename S>
NodeId sum_squares(Tape<S>& tape, NodeId x) {
    const auto& xv = tape.val(x);
    double acc = 0.0;
    for (const S v : xv.v) acc += static_cast<double>(v) * static_cast<double>(v);
    Tensor<S> y({1});
    y.v[0] = static_cast<S>(acc);
    return tape.emplace(std::move(y), [x](Tape<S>& t, NodeId self) {
        const S g = t.grad(self).v[0];
        const auto& xv2 = t.val(x);
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += S(2) * xv2.v[i] * g;
    });
}

// Scalar weighted sum of scalar nodes.
template <typename S>
NodeId weighted_sum(Tape<S>& tape, const std::vector<NodeId>& terms,
                    const std::vector<double>& weights) {
    if (terms.size() != weights.size() || terms.empty())
        throw ValidationError("weighted_sum: mismatched terms");
    double acc = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (tape.val(terms[i]).size() != 1)
            throw ValidationError("weighted_sum: terms must be scalar");
        acc += weights[i] * static_cast<double>(tape.val(terms[i]).v[0]);
    }
    Tensor<S> y({1});
    y.v[0] = static_cast<S>(acc);
    return tape.emplace(std::move(y), [terms, weights](Tape<S>& t, NodeId self) {
        const S g = t.grad(self).v[0];
        for (std::size_t i = 0; i < terms.size(); ++i)
            t.grad(terms[i]).v[0] += g * static_cast<S>(weights[i]);
    });
}

// ---------------------------------------------------------------------------
// Parameters, Adam, gradient checking
// ---------------------------------------------------------------------------

template <typename S>
struct ParameterStore {
    struct Entry {
        std::string name;
        Tensor<S> value;
    };
    std::vector<Entry> entries;

    int add(const std::string& name, std::vector<int> shape) {
        if (find(name) >= 0) throw ValidationError("params: duplicate name " + name);
        entries.push_back({name, Tensor<S>(std::move(shape))});
        return static_cast<int>(entries.size()) - 1;
    }

    int find(const std::string& name) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].name == name) return static_cast<int>(i);
        return -1;
    }

    Tensor<S>& operator[](const std::string& name) {
        const int i = find(name);
        if (i < 0) throw ValidationError("params: unknown name " + name);
        return entries[static_cast<std::size_t>(i)].value;
    }
    const Tensor<S>& at(const std::string& name) const {
        const int i = find(name);
        if (i < 0) throw ValidationError("params: unknown name " + name);
        return entries[static_cast<std::size_t>(i)].value;
    }

    std::size_t count() const { return entries.size(); }
};

namespace detail {
inline std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}
} // namespace detail

// Uniform +-sqrt(6 / (fan_in + fan_out)), seeded by (seed, name) so the same
// name always draws the same weights regardless of creation order.
template <typename S>
void init_uniform_fan(ParameterStore<S>& params, const std::string& name, int fan_in, int fan_out,
                      std::uint64_t seed) {
    Rng rng(derive_seed(seed, detail::name_hash(name)));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : params[name].v) v = static_cast<S>(rng.uniform(-bound, bound));
}

template <typename S>
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Tensor<S>> m;
    std::vector<Tensor<S>> v;

    void init(const ParameterStore<S>& params) {
        m.clear();
        v.clear();
        for (const auto& e : params.entries) {
            m.emplace_back(e.value.shape);
            v.emplace_back(e.value.shape);
        }
        step_count = 0;
    }
};

// One Adam update with bias correction. Gradients are per-entry tensors in
// store order; non-finite gradients abort naming the parameter.
template <typename S>
void adam_step(ParameterStore<S>& params, const std::vector<Tensor<S>>& grads,
               AdamState<S>& state) {
    if (grads.size() != params.count()) throw ValidationError("adam: gradient count mismatch");
    if (state.m.size() != params.count()) throw ValidationError("adam: state not initialized");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape != params.entries[i].value.shape)
            throw ValidationError("adam: gradient shape mismatch for " + params.entries[i].name);
        for (const S g : grads[i].v)
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericalError("adam: non-finite gradient for parameter '" +
                                     params.entries[i].name + "'");
    }
    state.step_count += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& p = params.entries[i].value;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.v.size(); ++j) {
            const double g = static_cast<double>(grads[i].v[j]);
            const double mj = state.beta1 * static_cast<double>(m.v[j]) + (1.0 - state.beta1) * g;
            const double vj =
                state.beta2 * static_cast<double>(v.v[j]) + (1.0 - state.beta2) * g * g;
            m.v[j] = static_cast<S>(mj);
            v.v[j] = static_cast<S>(vj);
            const double update = state.lr * (mj / c1) / (std::sqrt(vj / c2) + state.eps);
            p.v[j] = static_cast<S>(static_cast<double>(p.v[j]) - update);
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference checking (double precision)
// ---------------------------------------------------------------------------

// Builds a scalar graph from parameter leaves. The callable receives the tape
// and one leaf per store entry (in order) and returns the output node.
using BuildFn = std::function<NodeId(Tape<double>&, const std::vector<NodeId>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
};

// Compares reverse-mode gradients against central differences on a random
// subsample of coordinates per parameter. Relative error uses
// |a - f| / max(|a|, |f|, floor).
GradCheckResult gradient_check(ParameterStore<double>& params, const BuildFn& build, double h,
                               std::uint64_t seed, int samples_per_param,
                               double denom_floor = 1e-6);

// ---------------------------------------------------------------------------
// Checkpoints: text header (names, shapes, hyperparameters, step, metadata)
// followed by a little-endian float32 payload of the values in header order.
// ---------------------------------------------------------------------------

struct CheckpointMeta {
    long step = 0;
    double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::pair<std::string, std::string>> extra;  // ordered key/value pairs

    const std::string* get(const std::string& key) const {
        for (const auto& [k, v] : extra)
            if (k == key) return &v;
        return nullptr;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : extra)
            if (k == key) {
                v = value;
                return;
            }
        extra.emplace_back(key, value);
    }
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& params,
                     const CheckpointMeta& meta);
std::pair<ParameterStore<float>, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& path);

} // namespace igcn::ad
