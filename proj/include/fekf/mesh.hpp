#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace fekf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Boundary edge (vertex pair) tagged with the name of the polygon side it
/// lies on ("bottom", "top", ...).
struct BoundaryEdge {
    int a = -1;
    int b = -1;
    std::string label;
};

/// Conforming triangle mesh of a polygonal domain. Triangles are stored
/// counter-clockwise; boundary edges are oriented along their triangle.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }

    double triangle_area(int t) const;
    double total_area() const;

    /// Vertex ids that lie on the domain boundary (endpoints of boundary edges).
    std::vector<bool> boundary_vertex_mask() const;

    /// Vertex ids on boundary edges carrying `label`.
    std::vector<int> segment_vertices(const std::string& label) const;

    /// Throws std::invalid_argument if any structural invariant fails
    /// (indices in range, positive areas, boundary edges on exactly one
    /// triangle).
    void validate() const;
};

/// Structured triangulation of an axis-aligned rectangle [0,w] x [0,h].
/// Grid squares are split along the (i,j)->(i+1,j+1) diagonal; the square
/// size is chosen so the longest element edge (the diagonal) does not exceed
/// edge_target. Sides are labeled bottom/right/top/left.
Mesh generate_rect_mesh(double width, double height, double edge_target);

/// Structured triangulation of the L-shaped plate
///   (0,0),(2,0),(2,1),(1,1),(1,2),(0,2)
/// with sides labeled bottom, right, step_top, step_right, top, left
/// (counter-clockwise from the origin). Deterministic for fixed edge_target.
Mesh generate_l_shaped_mesh(double edge_target);

/// Area of the L-shaped reference plate (3 m^2).
double l_shape_area();

/// True if p lies in the closed L-shaped plate.
bool l_shape_contains(Vec2 p);

/// Split every triangle into four via edge midpoints. Boundary labels are
/// inherited by the two child edges.
Mesh refine_uniform(const Mesh& mesh);

/// Plain-text mesh format, 17 significant digits:
///   <V> vertices <T> triangles <B> edges
///   x y                  (V lines)
///   i j k                (T lines)
///   i j label            (B lines)
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void write_mesh_file(const std::string& path, const Mesh& mesh);
Mesh read_mesh_file(const std::string& path);

}  // namespace fekf
