#pragma once

#include "kronmem/core.hpp"

#include <Eigen/Sparse>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace kronmem::cortex {

struct Mesh {
    Matrix vertices;                        ///< rows are xyz positions
    std::vector<std::array<Index, 3>> faces;
};

/// Unit icosphere: regular icosahedron refined by 4-way triangle splits with
/// every vertex pushed back onto the sphere. 0 subdivisions keep 12 vertices,
/// each further one roughly quadruples the count (12, 42, 162, 642, ...).
Mesh make_icosphere(int subdivisions);

Mesh load_off(const std::string& path);
void save_off(const Mesh& mesh, const std::string& path);

/// Undirected vertex graph with its combinatorial Laplacian D - A.
class CortexGraph {
public:
    static CortexGraph from_mesh(const Mesh& mesh);
    static CortexGraph from_edges(Index n_vertices,
                                  const std::vector<std::pair<Index, Index>>& edges,
                                  Matrix positions = Matrix());

    Index size() const { return static_cast<Index>(adjacency_.size()); }
    const std::vector<Index>& neighbors(Index v) const;
    /// Vertex positions; empty (0 x 3) when the graph was built without any.
    const Matrix& positions() const { return positions_; }
    const Eigen::SparseMatrix<double>& laplacian() const { return laplacian_; }

private:
    CortexGraph() = default;
    void finalize(Index n_vertices, Matrix positions);

    std::vector<std::vector<Index>> adjacency_;
    Matrix positions_;
    Eigen::SparseMatrix<double> laplacian_;
};

struct Parcellation {
    std::vector<int> labels;                  ///< vertex -> parcel id
    std::vector<std::vector<Index>> parcels;  ///< parcel id -> sorted members
    std::vector<Index> seeds;
};

/// Deterministic parcellation: farthest-point sampling picks the seeds
/// (vertex 0 first, then repeatedly the vertex maximizing the hop distance to
/// the chosen set, lowest index on ties), then a simultaneous breadth-first
/// flood assigns every vertex to its nearest seed, earlier seed on ties.
Parcellation parcellate(const CortexGraph& graph, int n_parcels);
Parcellation parcellate_from_seeds(const CortexGraph& graph, const std::vector<Index>& seeds);

/// Within-parcel spatial covariance exp(-rho * L_p), where L_p is the
/// Laplacian of the subgraph induced by the members. Rows of the result sum
/// to one because L_p annihilates the constant vector.
SpdMatrix parcel_covariance(const CortexGraph& graph, const std::vector<Index>& members,
                            double rho);

/// Connected random patch of exactly `size` vertices grown from `seed` by
/// admitting a uniformly drawn frontier vertex at each step. Returns the
/// members sorted ascending; throws when the component is too small.
std::vector<Index> grow_patch(const CortexGraph& graph, Index seed, Index size, Rng& rng);

}  // namespace kronmem::cortex
