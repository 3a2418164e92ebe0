#include "fekf/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include "fekf/errors.hpp"

namespace fekf {

Vec Decomposition::scatter(const Vec& global) const {
    Vec out(augmented_dim());
    for (int m = 0; m < node_count; ++m)
        for (std::size_t l = 0; l < internal_vertices[m].size(); ++l)
            out[block_offset[m] + static_cast<int>(l)] = global[internal_vertices[m][l]];
    return out;
}

Vec Decomposition::gather_mean(const Vec& augmented) const {
    Vec out = Vec::Zero(global_vertex_count);
    for (int v = 0; v < global_vertex_count; ++v) {
        double sum = 0.0;
        for (const auto& [m, l] : copies[v]) sum += augmented[block_offset[m] + l];
        out[v] = sum / static_cast<double>(copies[v].size());
    }
    return out;
}

Vec Decomposition::gather_first(const Vec& augmented) const {
    Vec out(global_vertex_count);
    for (int v = 0; v < global_vertex_count; ++v) {
        const auto& [m, l] = copies[v].front();
        out[v] = augmented[block_offset[m] + l];
    }
    return out;
}

void Decomposition::validate(const Mesh& mesh) const {
    for (int v = 0; v < global_vertex_count; ++v)
        if (copies[v].empty())
            throw DecompositionError("vertex " + std::to_string(v) + " covered by no node");
    const auto on_boundary = mesh.boundary_vertex_mask();
    for (int m = 0; m < node_count; ++m) {
        std::set<int> seen(internal_vertices[m].begin(), internal_vertices[m].end());
        for (const auto& [j, verts] : interface_sets.at(m)) {
            for (int v : verts)
                if (!seen.insert(v).second)
                    throw DecompositionError("vertex " + std::to_string(v) +
                                             " in two sets of node " + std::to_string(m));
        }
        for (int v : outer_boundary[m])
            if (!on_boundary[v])
                throw DecompositionError("outer-boundary set contains interior vertex");
    }
}

namespace {

std::vector<std::vector<int>> vertex_stars(const Mesh& mesh) {
    std::vector<std::vector<int>> star(mesh.vertex_count());
    for (int t = 0; t < mesh.triangle_count(); ++t)
        for (int v : mesh.triangles[t]) star[v].push_back(t);
    return star;
}

}  // namespace

std::vector<int> grid_seed_partition(const Mesh& mesh, int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("grid_seed_partition: grid must be >= 1x1");
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& v : mesh.vertices) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
    }
    const double wx = (xmax - xmin) / nx, wy = (ymax - ymin) / ny;
    std::vector<int> cell_of(mesh.vertices.size());
    std::vector<int> used(nx * ny, 0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const int ci = std::min(nx - 1, static_cast<int>((mesh.vertices[v].x - xmin) / wx));
        const int cj = std::min(ny - 1, static_cast<int>((mesh.vertices[v].y - ymin) / wy));
        cell_of[v] = cj * nx + ci;
        used[cell_of[v]] = 1;
    }
    std::vector<int> remap(nx * ny, -1);
    int next = 0;
    for (int c = 0; c < nx * ny; ++c)
        if (used[c]) remap[c] = next++;
    std::vector<int> part(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) part[v] = remap[cell_of[v]];
    return part;
}

Decomposition decompose(const Mesh& mesh, const std::vector<int>& seed_partition,
                        int overlap_layers) {
    if (overlap_layers < 1) throw std::invalid_argument("decompose: overlap_layers must be >= 1");
    if (seed_partition.size() != static_cast<std::size_t>(mesh.vertex_count()))
        throw std::invalid_argument("decompose: seed partition size mismatch");
    const int N = seed_partition.empty()
                      ? 0
                      : 1 + *std::max_element(seed_partition.begin(), seed_partition.end());
    if (N < 1) throw std::invalid_argument("decompose: empty partition");
    for (int p : seed_partition)
        if (p < 0 || p >= N) throw std::invalid_argument("decompose: bad seed part id");

    const auto star = vertex_stars(mesh);
    const int T = mesh.triangle_count();

    Decomposition dec;
    dec.node_count = N;
    dec.global_vertex_count = mesh.vertex_count();
    dec.node_triangles.resize(N);
    dec.subdomain_vertices.resize(N);
    dec.internal_vertices.resize(N);
    dec.outer_boundary.resize(N);
    dec.interface_sets.resize(N);
    dec.neighbors.resize(N);

    // Triangle membership per node: seed-touching triangles, then
    // `overlap_layers` rounds of vertex-adjacent growth.
    std::vector<std::vector<char>> in(N, std::vector<char>(T, 0));
    for (int t = 0; t < T; ++t)
        for (int v : mesh.triangles[t]) in[seed_partition[v]][t] = 1;
    for (int m = 0; m < N; ++m) {
        for (int layer = 0; layer < overlap_layers; ++layer) {
            std::vector<char> frontier_vertex(mesh.vertex_count(), 0);
            for (int t = 0; t < T; ++t)
                if (in[m][t])
                    for (int v : mesh.triangles[t]) frontier_vertex[v] = 1;
            std::vector<char> next = in[m];
            for (int t = 0; t < T; ++t) {
                if (next[t]) continue;
                for (int v : mesh.triangles[t])
                    if (frontier_vertex[v]) {
                        next[t] = 1;
                        break;
                    }
            }
            in[m] = std::move(next);
        }
        for (int t = 0; t < T; ++t)
            if (in[m][t]) dec.node_triangles[m].push_back(t);
    }

    // Vertex roles. full_star[m][v]: star(v) entirely inside node m.
    const auto on_boundary = mesh.boundary_vertex_mask();
    std::vector<std::vector<char>> member(N, std::vector<char>(mesh.vertex_count(), 0));
    std::vector<std::vector<char>> full_star(N, std::vector<char>(mesh.vertex_count(), 0));
    for (int m = 0; m < N; ++m) {
        for (int t : dec.node_triangles[m])
            for (int v : mesh.triangles[t]) member[m][v] = 1;
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            if (!member[m][v]) continue;
            bool full = true;
            for (int t : star[v])
                if (!in[m][t]) {
                    full = false;
                    break;
                }
            full_star[m][v] = full;
            dec.subdomain_vertices[m].push_back(v);
            if (full) {
                dec.internal_vertices[m].push_back(v);
                if (on_boundary[v]) dec.outer_boundary[m].push_back(v);
            }
        }
    }

    // Interface assignment: lowest-index node holding the vertex's full star.
    for (int m = 0; m < N; ++m) {
        for (int v : dec.subdomain_vertices[m]) {
            if (full_star[m][v]) continue;
            int owner = -1;
            for (int j = 0; j < N; ++j) {
                if (j == m) continue;
                if (full_star[j][v]) {
                    owner = j;
                    break;
                }
            }
            if (owner < 0)
                throw DecompositionError("interface vertex " + std::to_string(v) + " of node " +
                                         std::to_string(m) +
                                         " is interior to no other subdomain; increase overlap");
            dec.interface_sets[m][owner].push_back(v);
        }
        dec.neighbors[m].push_back(m);
        for (const auto& [j, verts] : dec.interface_sets[m])
            if (!verts.empty()) dec.neighbors[m].push_back(j);
        std::sort(dec.neighbors[m].begin(), dec.neighbors[m].end());
    }

    // Augmented index map (node-major, ascending-vertex minor).
    dec.block_offset.assign(N + 1, 0);
    dec.local_index.resize(N);
    dec.copies.resize(mesh.vertex_count());
    for (int m = 0; m < N; ++m) {
        dec.block_offset[m + 1] = dec.block_offset[m] + static_cast<int>(dec.internal_vertices[m].size());
        for (std::size_t l = 0; l < dec.internal_vertices[m].size(); ++l) {
            const int v = dec.internal_vertices[m][l];
            dec.local_index[m][v] = static_cast<int>(l);
            dec.copies[v].emplace_back(m, static_cast<int>(l));
        }
    }
    dec.validate(mesh);
    return dec;
}

LocalBlocks extract_local_blocks(const SpMat& mass, const SpMat& stiffness,
                                 const Decomposition& dec, int node) {
    const auto& owned = dec.internal_vertices[node];
    const int nm = static_cast<int>(owned.size());

    // For every neighbor j, the columns are node j's copies of this node's
    // interface vertices assigned to j.
    LocalBlocks blocks;
    blocks.node = node;
    std::map<int, std::unordered_map<int, int>> col_pos;  // j -> global -> compressed col
    for (const auto& [j, verts] : dec.interface_sets[node]) {
        auto& cols = blocks.neighbor_cols[j];
        for (int v : verts) {
            col_pos[j][v] = static_cast<int>(cols.size());
            cols.push_back(dec.local_index[j].at(v));
        }
        blocks.mass_neighbor[j] = Eigen::MatrixXd::Zero(nm, static_cast<int>(verts.size()));
        blocks.stiffness_neighbor[j] = Eigen::MatrixXd::Zero(nm, static_cast<int>(verts.size()));
    }

    std::unordered_map<int, int> row_of;
    for (int l = 0; l < nm; ++l) row_of[owned[l]] = l;
    // Map from a global vertex to the neighbor that owns it for this node.
    std::unordered_map<int, int> assigned_to;
    for (const auto& [j, verts] : dec.interface_sets[node])
        for (int v : verts) assigned_to[v] = j;

    std::vector<Eigen::Triplet<double>> tm, ts;
    auto scan = [&](const SpMat& a, std::vector<Eigen::Triplet<double>>& self_out,
                    std::map<int, Eigen::MatrixXd>& nbr_out) {
        for (int col = 0; col < a.outerSize(); ++col) {
            for (SpMat::InnerIterator it(a, col); it; ++it) {
                auto rit = row_of.find(static_cast<int>(it.row()));
                if (rit == row_of.end()) continue;
                auto cit = row_of.find(col);
                if (cit != row_of.end()) {
                    self_out.emplace_back(rit->second, cit->second, it.value());
                    continue;
                }
                auto ait = assigned_to.find(col);
                if (ait == assigned_to.end())
                    throw DecompositionError(
                        "row of an internal vertex touches a vertex outside the subdomain");
                nbr_out[ait->second](rit->second, col_pos[ait->second][col]) += it.value();
            }
        }
    };
    scan(mass, tm, blocks.mass_neighbor);
    scan(stiffness, ts, blocks.stiffness_neighbor);
    blocks.mass_self.resize(nm, nm);
    blocks.mass_self.setFromTriplets(tm.begin(), tm.end());
    blocks.stiffness_self.resize(nm, nm);
    blocks.stiffness_self.setFromTriplets(ts.begin(), ts.end());
    return blocks;
}

AugmentedSystem build_augmented(const SpMat& mass, const SpMat& stiffness,
                                const Decomposition& dec) {
    AugmentedSystem aug;
    aug.dim = dec.augmented_dim();
    std::vector<Eigen::Triplet<double>> dm, ds, fm, fs;
    for (int m = 0; m < dec.node_count; ++m) {
        const LocalBlocks blocks = extract_local_blocks(mass, stiffness, dec, m);
        const int off = dec.block_offset[m];
        for (int col = 0; col < blocks.mass_self.outerSize(); ++col)
            for (SpMat::InnerIterator it(blocks.mass_self, col); it; ++it)
                dm.emplace_back(off + static_cast<int>(it.row()), off + col, it.value());
        for (int col = 0; col < blocks.stiffness_self.outerSize(); ++col)
            for (SpMat::InnerIterator it(blocks.stiffness_self, col); it; ++it)
                ds.emplace_back(off + static_cast<int>(it.row()), off + col, it.value());
        for (const auto& [j, mat] : blocks.mass_neighbor) {
            const auto& cols = blocks.neighbor_cols.at(j);
            for (int c = 0; c < mat.cols(); ++c)
                for (int r = 0; r < mat.rows(); ++r)
                    if (mat(r, c) != 0.0)
                        fm.emplace_back(off + r, dec.block_offset[j] + cols[c], mat(r, c));
        }
        for (const auto& [j, mat] : blocks.stiffness_neighbor) {
            const auto& cols = blocks.neighbor_cols.at(j);
            for (int c = 0; c < mat.cols(); ++c)
                for (int r = 0; r < mat.rows(); ++r)
                    if (mat(r, c) != 0.0)
                        fs.emplace_back(off + r, dec.block_offset[j] + cols[c], mat(r, c));
        }
    }
    aug.mass_diag.resize(aug.dim, aug.dim);
    aug.mass_diag.setFromTriplets(dm.begin(), dm.end());
    aug.stiffness_diag.resize(aug.dim, aug.dim);
    aug.stiffness_diag.setFromTriplets(ds.begin(), ds.end());
    aug.mass_coupling.resize(aug.dim, aug.dim);
    aug.mass_coupling.setFromTriplets(fm.begin(), fm.end());
    aug.stiffness_coupling.resize(aug.dim, aug.dim);
    aug.stiffness_coupling.setFromTriplets(fs.begin(), fs.end());
    return aug;
}

void write_decomposition(std::ostream& os, const Decomposition& dec) {
    os << dec.node_count << " nodes, augmented dimension " << dec.augmented_dim() << "\n";
    for (int m = 0; m < dec.node_count; ++m) {
        os << "node " << m << "\n  subdomain:";
        for (int v : dec.subdomain_vertices[m]) os << ' ' << v;
        os << "\n  internal:";
        for (int v : dec.internal_vertices[m]) os << ' ' << v;
        os << '\n';
        for (const auto& [j, verts] : dec.interface_sets[m]) {
            os << "  interface -> " << j << ":";
            for (int v : verts) os << ' ' << v;
            os << '\n';
        }
    }
}

}  // namespace fekf
