#include "igcn/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "igcn/common.hpp"

namespace igcn {

void validate_mesh(const MeshGraph& mesh) {
    const int n = mesh.vertex_count();
    if (n == 0) throw ValidationError("mesh: no vertices");
    if (mesh.triangles.empty()) throw ValidationError("mesh: no triangles");
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k)
            if (t[k] < 0 || t[k] >= n)
                throw ValidationError("mesh: triangle index out of range");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw ValidationError("mesh: degenerate triangle (repeated index)");
    }
    // Connectivity via BFS over triangle edges.
    const auto nbrs = neighbor_lists(mesh);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int w : nbrs[u]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++reached;
                stack.push_back(w);
            }
        }
    }
    if (reached != n) throw ValidationError("mesh: graph is not connected");
}

SparseMatrix build_adjacency(const MeshGraph& mesh) {
    const int n = mesh.vertex_count();
    std::set<std::pair<int, int>> edges;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (a < 0 || a >= n || b < 0 || b >= n)
                throw ValidationError("adjacency: triangle index out of range");
            if (a == b) throw ValidationError("adjacency: degenerate edge");
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    std::vector<std::tuple<int, int, double>> tri;
    tri.reserve(edges.size() * 2);
    for (const auto& [a, b] : edges) {
        tri.emplace_back(a, b, 1.0);
        tri.emplace_back(b, a, 1.0);
    }
    return SparseMatrix::from_triplets(n, n, std::move(tri));
}

std::vector<std::vector<int>> neighbor_lists(const MeshGraph& mesh) {
    const int n = mesh.vertex_count();
    std::vector<std::set<int>> sets(static_cast<std::size_t>(n));
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            sets[a].insert(b);
            sets[b].insert(a);
        }
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

GraphOperator normalized_operator(const SparseMatrix& adjacency, bool self_loops) {
    if (adjacency.rows != adjacency.cols)
        throw ValidationError("normalized_operator: adjacency must be square");
    const int n = adjacency.rows;
    std::vector<double> degree(static_cast<std::size_t>(n), self_loops ? 1.0 : 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = adjacency.row_ptr[i]; k < adjacency.row_ptr[i + 1]; ++k)
            degree[i] += adjacency.vals[k];
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (degree[i] <= 0.0)
            throw ValidationError("normalized_operator: isolated vertex with self-loops disabled");
        inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
    }
    std::vector<std::tuple<int, int, double>> tri;
    tri.reserve(adjacency.nnz() + static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (self_loops) tri.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
        for (int k = adjacency.row_ptr[i]; k < adjacency.row_ptr[i + 1]; ++k) {
            const int j = adjacency.col_idx[k];
            tri.emplace_back(i, j, adjacency.vals[k] * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    GraphOperator op;
    op.n = n;
    op.m = SparseMatrix::from_triplets(n, n, std::move(tri));
    return op;
}

std::vector<Vec3> umbrella_laplacian(const MeshGraph& mesh, const std::vector<Vec3>& positions) {
    if (static_cast<int>(positions.size()) != mesh.vertex_count())
        throw ValidationError("umbrella: one position row per vertex required");
    const auto nbrs = neighbor_lists(mesh);
    std::vector<Vec3> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (nbrs[i].empty()) throw ValidationError("umbrella: isolated vertex");
        Vec3 mean{};
        for (int j : nbrs[i]) mean += positions[j];
        out[i] = positions[i] - mean / static_cast<double>(nbrs[i].size());
    }
    return out;
}

SparseMatrix umbrella_matrix(const MeshGraph& mesh) {
    const auto nbrs = neighbor_lists(mesh);
    const int n = mesh.vertex_count();
    std::vector<std::tuple<int, int, double>> tri;
    for (int i = 0; i < n; ++i) {
        if (nbrs[i].empty()) throw ValidationError("umbrella: isolated vertex");
        tri.emplace_back(i, i, 1.0);
        const double w = -1.0 / static_cast<double>(nbrs[i].size());
        for (int j : nbrs[i]) tri.emplace_back(i, j, w);
    }
    return SparseMatrix::from_triplets(n, n, std::move(tri));
}

bool is_watertight(const MeshGraph& mesh) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            count[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    for (const auto& [edge, c] : count) {
        (void)edge;
        if (c != 2) return false;
    }
    return !count.empty();
}

double spectral_radius_estimate(const SparseMatrix& m, int iterations) {
    const int n = m.rows;
    std::vector<double> x(static_cast<std::size_t>(n), 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> y(static_cast<std::size_t>(n));
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
                acc += m.vals[k] * x[m.col_idx[k]];
            y[i] = acc;
        }
        double nrm = 0.0;
        for (double v : y) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) return 0.0;
        lambda = nrm;
        for (int i = 0; i < n; ++i) x[i] = y[i] / nrm;
    }
    return lambda;
}

namespace {

int parse_obj_index(const std::string& token, int n_vertices) {
    // "f" entries may carry /vt/vn suffixes.
    const std::size_t slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    int idx = 0;
    try {
        idx = std::stoi(head);
    } catch (const std::exception&) {
        throw ValidationError("obj: malformed face index '" + token + "'");
    }
    if (idx < 0) idx = n_vertices + idx + 1;  // negative indices count from the end
    if (idx < 1 || idx > n_vertices) throw ValidationError("obj: face index out of range");
    return idx - 1;
}

} // namespace

MeshGraph load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("obj: cannot open " + path.string());
    MeshGraph mesh;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z)) throw ValidationError("obj: malformed vertex line");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::string> toks;
            std::string t;
            while (ss >> t) toks.push_back(t);
            if (toks.size() != 3) throw ValidationError("obj: only triangle faces are supported");
            std::array<int, 3> tri{};
            for (int k = 0; k < 3; ++k)
                tri[k] = parse_obj_index(toks[k], mesh.vertex_count());
            mesh.triangles.push_back(tri);
        }
    }
    if (mesh.vertices.empty()) throw ValidationError("obj: no vertices in " + path.string());
    return mesh;
}

void save_obj(const MeshGraph& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("obj: cannot write " + path.string());
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

MeshGraph load_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("ply: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw ValidationError("ply: missing magic");
    int n_vertices = -1, n_faces = -1;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            ascii = fmt == "ascii";
        } else if (tag == "element") {
            std::string what;
            int count = 0;
            ss >> what >> count;
            if (what == "vertex") n_vertices = count;
            if (what == "face") n_faces = count;
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) throw ValidationError("ply: only ascii format is supported");
    if (n_vertices <= 0 || n_faces < 0) throw ValidationError("ply: malformed header");
    MeshGraph mesh;
    mesh.vertices.resize(static_cast<std::size_t>(n_vertices));
    for (auto& v : mesh.vertices) {
        if (!(in >> v.x >> v.y >> v.z)) throw ValidationError("ply: truncated vertex data");
    }
    for (int f = 0; f < n_faces; ++f) {
        int arity = 0;
        if (!(in >> arity)) throw ValidationError("ply: truncated face data");
        if (arity != 3) throw ValidationError("ply: only triangle faces are supported");
        std::array<int, 3> tri{};
        for (int k = 0; k < 3; ++k) {
            if (!(in >> tri[k])) throw ValidationError("ply: truncated face data");
            if (tri[k] < 0 || tri[k] >= n_vertices)
                throw ValidationError("ply: face index out of range");
        }
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

void save_ply(const MeshGraph& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("ply: cannot write " + path.string());
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertex_count() << '\n';
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.triangle_count() << '\n';
    out << "property list uchar int vertex_indices\nend_header\n";
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

} // namespace igcn
