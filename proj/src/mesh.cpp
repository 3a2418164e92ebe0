#include "fekf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fekf/errors.hpp"

namespace fekf {

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Vec2 a = vertices[tri[0]], b = vertices[tri[1]], c = vertices[tri[2]];
    return 0.5 * cross(b - a, c - a);
}

double Mesh::total_area() const {
    double area = 0.0;
    for (int t = 0; t < triangle_count(); ++t) area += triangle_area(t);
    return area;
}

std::vector<bool> Mesh::boundary_vertex_mask() const {
    std::vector<bool> mask(vertices.size(), false);
    for (const auto& e : boundary_edges) {
        mask[e.a] = true;
        mask[e.b] = true;
    }
    return mask;
}

std::vector<int> Mesh::segment_vertices(const std::string& label) const {
    std::vector<int> ids;
    for (const auto& e : boundary_edges) {
        if (e.label == label) {
            ids.push_back(e.a);
            ids.push_back(e.b);
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void Mesh::validate() const {
    const int n = vertex_count();
    for (const auto& tri : triangles) {
        for (int v : tri) {
            if (v < 0 || v >= n) throw std::invalid_argument("mesh: triangle vertex index out of range");
        }
    }
    for (int t = 0; t < triangle_count(); ++t) {
        if (triangle_area(t) <= 0.0)
            throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                        " has non-positive signed area");
    }
    // Each edge key -> number of incident triangles.
    std::map<std::pair<int, int>, int> edge_use;
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (const auto& tri : triangles) {
        for (int k = 0; k < 3; ++k) edge_use[key(tri[k], tri[(k + 1) % 3])]++;
    }
    for (const auto& e : boundary_edges) {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
            throw std::invalid_argument("mesh: boundary edge vertex index out of range");
        auto it = edge_use.find(key(e.a, e.b));
        if (it == edge_use.end() || it->second != 1)
            throw std::invalid_argument("mesh: boundary edge not on exactly one triangle");
    }
}

namespace {

// Shared structured-grid triangulator. Cells of an nx-by-ny grid with spacing
// h are kept when `keep_cell` says so; each kept cell is split along its
// lower-left to upper-right diagonal. `side_label` names the boundary segment
// of an exterior edge given its midpoint.
template <typename KeepCell, typename SideLabel>
Mesh build_structured(int nx, int ny, double h, KeepCell keep_cell, SideLabel side_label) {
    Mesh mesh;
    std::vector<int> vid(static_cast<std::size_t>((nx + 1) * (ny + 1)), -1);
    auto gidx = [nx](int i, int j) { return j * (nx + 1) + i; };

    auto vertex_needed = [&](int i, int j) {
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di) {
                const int ci = i + di, cj = j + dj;
                if (ci >= 0 && cj >= 0 && ci < nx && cj < ny && keep_cell(ci, cj)) return true;
            }
        return false;
    };

    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            if (vertex_needed(i, j)) {
                vid[gidx(i, j)] = mesh.vertex_count();
                mesh.vertices.push_back({i * h, j * h});
            }

    auto cell_in = [&](int ci, int cj) {
        return ci >= 0 && cj >= 0 && ci < nx && cj < ny && keep_cell(ci, cj);
    };

    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (!keep_cell(i, j)) continue;
            const int v00 = vid[gidx(i, j)], v10 = vid[gidx(i + 1, j)];
            const int v01 = vid[gidx(i, j + 1)], v11 = vid[gidx(i + 1, j + 1)];
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
            // Exterior edges of this cell become boundary edges.
            if (!cell_in(i, j - 1))
                mesh.boundary_edges.push_back({v00, v10, side_label(Vec2{(i + 0.5) * h, j * h})});
            if (!cell_in(i + 1, j))
                mesh.boundary_edges.push_back({v10, v11, side_label(Vec2{(i + 1) * h, (j + 0.5) * h})});
            if (!cell_in(i, j + 1))
                mesh.boundary_edges.push_back({v11, v01, side_label(Vec2{(i + 0.5) * h, (j + 1) * h})});
            if (!cell_in(i - 1, j))
                mesh.boundary_edges.push_back({v01, v00, side_label(Vec2{i * h, (j + 0.5) * h})});
        }
    return mesh;
}

// Grid resolution such that the cell diagonal h*sqrt(2) stays within the
// requested edge length and h divides `unit`.
int cells_per_unit(double unit, double edge_target) {
    if (!(edge_target > 0.0)) throw std::invalid_argument("edge_target must be positive");
    return std::max(1, static_cast<int>(std::ceil(unit * std::sqrt(2.0) / edge_target)));
}

}  // namespace

Mesh generate_rect_mesh(double width, double height, double edge_target) {
    if (!(width > 0.0) || !(height > 0.0))
        throw std::invalid_argument("rectangle dimensions must be positive");
    const int per_unit = cells_per_unit(1.0, edge_target);
    const int nx = std::max(1, static_cast<int>(std::lround(width * per_unit)));
    const int ny = std::max(1, static_cast<int>(std::lround(height * per_unit)));
    const double h = width / nx;
    // Non-commensurate aspect ratios fall back to a square-ish grid in x.
    const double hy = height / ny;
    Mesh mesh = build_structured(
        nx, ny, h, [](int, int) { return true; },
        [&](Vec2 mid) -> std::string {
            if (mid.y == 0.0) return "bottom";
            if (mid.x == 0.0) return "left";
            if (std::abs(mid.x - width) < 1e-12) return "right";
            return "top";
        });
    if (hy != h) {
        for (auto& v : mesh.vertices) v.y *= hy / h;
    }
    return mesh;
}

double l_shape_area() { return 3.0; }

bool l_shape_contains(Vec2 p) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > 2.0 || p.y > 2.0) return false;
    return !(p.x > 1.0 && p.y > 1.0);
}

Mesh generate_l_shaped_mesh(double edge_target) {
    const int n = cells_per_unit(1.0, edge_target);
    const double h = 1.0 / n;
    auto keep = [n](int ci, int cj) { return !(ci >= n && cj >= n); };
    auto label = [n, h](Vec2 mid) -> std::string {
        if (mid.y == 0.0) return "bottom";
        if (mid.x == 0.0) return "left";
        if (std::abs(mid.x - 2.0) < 1e-12) return "right";
        if (std::abs(mid.y - 2.0) < 1e-12) return "top";
        // Re-entrant sides of the notch at x = 1 (above) and y = 1 (right arm).
        if (std::abs(mid.x - 1.0) < 0.25 * h) return "step_right";
        return "step_top";
    };
    return build_structured(2 * n, 2 * n, h, keep, label);
}

Mesh refine_uniform(const Mesh& mesh) {
    mesh.validate();
    Mesh fine;
    fine.vertices = mesh.vertices;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid_id = [&](int a, int b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int id = fine.vertex_count();
        fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        midpoint.emplace(key, id);
        return id;
    };
    for (const auto& tri : mesh.triangles) {
        const int a = tri[0], b = tri[1], c = tri[2];
        const int ab = mid_id(a, b), bc = mid_id(b, c), ca = mid_id(c, a);
        fine.triangles.push_back({a, ab, ca});
        fine.triangles.push_back({ab, b, bc});
        fine.triangles.push_back({ca, bc, c});
        fine.triangles.push_back({ab, bc, ca});
    }
    for (const auto& e : mesh.boundary_edges) {
        const int m = mid_id(e.a, e.b);
        fine.boundary_edges.push_back({e.a, m, e.label});
        fine.boundary_edges.push_back({m, e.b, e.label});
    }
    return fine;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
    os << mesh.vertex_count() << " vertices " << mesh.triangle_count() << " triangles "
       << mesh.boundary_edges.size() << " edges\n";
    char buf[64];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x, v.y);
        os << buf;
    }
    for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (const auto& e : mesh.boundary_edges) os << e.a << ' ' << e.b << ' ' << e.label << '\n';
}

Mesh read_mesh(std::istream& is) {
    Mesh mesh;
    int nv = 0, nt = 0, ne = 0;
    std::string w1, w2, w3;
    if (!(is >> nv >> w1 >> nt >> w2 >> ne >> w3) || w1 != "vertices" || w2 != "triangles" ||
        w3 != "edges")
        throw std::invalid_argument("mesh file: malformed header");
    mesh.vertices.resize(nv);
    for (auto& v : mesh.vertices)
        if (!(is >> v.x >> v.y)) throw std::invalid_argument("mesh file: truncated vertex list");
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles)
        if (!(is >> t[0] >> t[1] >> t[2]))
            throw std::invalid_argument("mesh file: truncated triangle list");
    mesh.boundary_edges.resize(ne);
    for (auto& e : mesh.boundary_edges)
        if (!(is >> e.a >> e.b >> e.label))
            throw std::invalid_argument("mesh file: truncated edge list");
    mesh.validate();
    return mesh;
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    write_mesh(os, mesh);
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for read: " + path);
    return read_mesh(is);
}

}  // namespace fekf
