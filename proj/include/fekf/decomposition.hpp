#pragma once

#include <iosfwd>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fekf/assembly.hpp"
#include "fekf/mesh.hpp"

namespace fekf {

/// Overlapping decomposition of a mesh into N subdomains (triangle sets).
///
/// Vertex roles use the discrete reading of the interface partition: a vertex
/// belongs to node m's internal set when its full triangle star lies in the
/// subdomain; the remaining subdomain vertices form the interface and each is
/// assigned to the lowest-index node whose subdomain contains its full star.
/// A vertex of the outer boundary where two subdomains meet is therefore an
/// interface vertex, which keeps every internal row expressible through
/// subdomain vertices only.
struct Decomposition {
    int node_count = 0;
    int global_vertex_count = 0;

    std::vector<std::vector<int>> node_triangles;     // T_m, ascending
    std::vector<std::vector<int>> subdomain_vertices; // V_m, ascending
    std::vector<std::vector<int>> internal_vertices;  // global ids of node m's state, ascending
    std::vector<std::vector<int>> outer_boundary;     // internal vertices on the domain boundary
    // interface_sets[m][j] = interface vertices of node m assigned to node j.
    std::vector<std::map<int, std::vector<int>>> interface_sets;
    std::vector<std::vector<int>> neighbors;          // in-neighborhood, includes m

    // Augmented indexing: node-major, internal-vertex-minor.
    std::vector<int> block_offset;                       // per node, plus total at the end
    std::vector<std::unordered_map<int, int>> local_index;  // per node: global -> local
    std::vector<std::vector<std::pair<int, int>>> copies;   // global -> [(node, local)]

    int augmented_dim() const { return block_offset.back(); }
    int block_size(int m) const { return block_offset[m + 1] - block_offset[m]; }

    /// Duplicate a global vector into augmented layout.
    Vec scatter(const Vec& global) const;
    /// Average all copies of every vertex back to global layout.
    Vec gather_mean(const Vec& augmented) const;
    /// Take node `copies[v].front()`'s copy of every vertex.
    Vec gather_first(const Vec& augmented) const;

    void validate(const Mesh& mesh) const;
};

/// Grows each seed part by `overlap_layers` vertex-adjacent element layers
/// beyond the seed-touching triangles and derives the interface assignment.
/// Throws DecompositionError when an interface vertex is interior to no
/// neighbor.
Decomposition decompose(const Mesh& mesh, const std::vector<int>& seed_partition,
                        int overlap_layers);

/// Seed partition by an nx-by-ny rectangular tiling of the mesh bounding box;
/// empty cells are skipped so part ids are contiguous.
std::vector<int> grid_seed_partition(const Mesh& mesh, int nx, int ny);

/// Rows of the global operators owned by node m. Neighbor blocks are stored
/// compressed to the interface columns; `neighbor_cols[j]` maps each column
/// to its local index within node j's state.
struct LocalBlocks {
    int node = -1;
    SpMat mass_self;
    SpMat stiffness_self;
    std::map<int, Eigen::MatrixXd> mass_neighbor;
    std::map<int, Eigen::MatrixXd> stiffness_neighbor;
    std::map<int, std::vector<int>> neighbor_cols;
};

LocalBlocks extract_local_blocks(const SpMat& mass, const SpMat& stiffness,
                                 const Decomposition& dec, int node);

/// Block-diagonal / coupling split of the duplicated global operators.
struct AugmentedSystem {
    SpMat mass_diag, stiffness_diag;        // block-diag of self blocks
    SpMat mass_coupling, stiffness_coupling;
    int dim = 0;
};

AugmentedSystem build_augmented(const SpMat& mass, const SpMat& stiffness,
                                const Decomposition& dec);

/// Text dump: per node, V_m, the internal set and each interface set.
void write_decomposition(std::ostream& os, const Decomposition& dec);

}  // namespace fekf
