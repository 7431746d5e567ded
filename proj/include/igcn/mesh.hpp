#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "igcn/geometry.hpp"
#include "igcn/sparse.hpp"

namespace igcn {

// Triangle mesh with the graph view the GCN consumes. Vertex order is the
// point-to-point correspondence: deformed copies of one mesh share indices.
struct MeshGraph {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
};

// Throws ValidationError on out-of-range/degenerate triangles or a
// disconnected graph.
void validate_mesh(const MeshGraph& mesh);

// Binary symmetric adjacency with zero diagonal derived from the triangle set.
SparseMatrix build_adjacency(const MeshGraph& mesh);

// Sorted 1-ring neighbor lists.
std::vector<std::vector<int>> neighbor_lists(const MeshGraph& mesh);

// D^-1/2 (A + I) D^-1/2 with self-loop renormalization; with self_loops off,
// plain D^-1/2 A D^-1/2 (fails on isolated vertices).
GraphOperator normalized_operator(const SparseMatrix& adjacency, bool self_loops = true);

// Uniform umbrella operator: row i = v_i minus the mean of its 1-ring.
std::vector<Vec3> umbrella_laplacian(const MeshGraph& mesh, const std::vector<Vec3>& positions);

// The same operator as a sparse matrix (I - D^-1 A), applied per coordinate.
SparseMatrix umbrella_matrix(const MeshGraph& mesh);

// True when every undirected edge borders exactly two triangles.
bool is_watertight(const MeshGraph& mesh);

// Largest |eigenvalue| estimate by power iteration; used by operator checks.
double spectral_radius_estimate(const SparseMatrix& m, int iterations = 200);

// ASCII OBJ (v/f records, 1-based indices). Non-triangle faces are rejected.
MeshGraph load_obj(const std::filesystem::path& path);
void save_obj(const MeshGraph& mesh, const std::filesystem::path& path);

// ASCII PLY, triangle faces only.
MeshGraph load_ply(const std::filesystem::path& path);
void save_ply(const MeshGraph& mesh, const std::filesystem::path& path);

} // namespace igcn
