#pragma once

#include <algorithm>
#include <tuple>
#include <vector>

#include "igcn/common.hpp"

namespace igcn {

// Compressed sparse rows built from a row-major-sorted coordinate list, so
// iteration order is deterministic. Duplicate entries are summed.
template <typename S>
struct SparseMatrixT {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;  // size rows + 1
    std::vector<int> col_idx;
    std::vector<S> vals;

    static SparseMatrixT from_triplets(int rows, int cols,
                                       std::vector<std::tuple<int, int, S>> entries) {
        for (const auto& [i, j, v] : entries) {
            (void)v;
            if (i < 0 || i >= rows || j < 0 || j >= cols)
                throw ValidationError("sparse: entry index out of range");
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b));
        });
        SparseMatrixT m;
        m.rows = rows;
        m.cols = cols;
        m.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& [i, j, v] = entries[k];
            if (!m.col_idx.empty() && std::get<0>(entries[k - 1]) == i &&
                std::get<1>(entries[k - 1]) == j) {
                m.vals.back() += v;  // coalesce duplicates
            } else {
                m.col_idx.push_back(j);
                m.vals.push_back(v);
                m.row_ptr[static_cast<std::size_t>(i) + 1]++;
            }
        }
        for (int i = 0; i < rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
        return m;
    }

    std::size_t nnz() const { return col_idx.size(); }

    S get(int i, int j) const {
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            if (col_idx[k] == j) return vals[k];
        return S(0);
    }

    SparseMatrixT transposed() const {
        std::vector<std::tuple<int, int, S>> tr;
        tr.reserve(nnz());
        for (int i = 0; i < rows; ++i)
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                tr.emplace_back(col_idx[k], i, vals[k]);
        return from_triplets(cols, rows, std::move(tr));
    }

    bool is_symmetric(S tol = S(0)) const {
        const SparseMatrixT t = transposed();
        if (t.col_idx != col_idx || t.row_ptr != row_ptr) return false;
        for (std::size_t k = 0; k < vals.size(); ++k) {
            const S d = vals[k] - t.vals[k];
            if ((d < 0 ? -d : d) > tol) return false;
        }
        return true;
    }

    template <typename T>
    SparseMatrixT<T> cast() const {
        SparseMatrixT<T> out;
        out.rows = rows;
        out.cols = cols;
        out.row_ptr = row_ptr;
        out.col_idx = col_idx;
        out.vals.resize(vals.size());
        for (std::size_t k = 0; k < vals.size(); ++k) out.vals[k] = static_cast<T>(vals[k]);
        return out;
    }
};

using SparseMatrix = SparseMatrixT<double>;

// Normalized graph operator of the GCN layers: n and the (symmetric) matrix.
struct GraphOperator {
    int n = 0;
    SparseMatrix m;
};

} // namespace igcn
