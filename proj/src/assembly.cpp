#include "fekf/assembly.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "fekf/errors.hpp"

namespace fekf {

namespace {

using Triplet = Eigen::Triplet<double>;

double edge_length(const Mesh& mesh, const BoundaryEdge& e) {
    const Vec2 d = mesh.vertices[e.b] - mesh.vertices[e.a];
    return std::sqrt(dot(d, d));
}

void check_triangle(const Mesh& mesh, int t, double area) {
    if (!(area > 0.0))
        throw std::invalid_argument("assembly: degenerate triangle " + std::to_string(t) +
                                    " (area " + std::to_string(area) + ")");
    (void)mesh;
}

}  // namespace

SpMat assemble_mass(const Mesh& mesh) {
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangle_count() * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double area = mesh.triangle_area(t);
        check_triangle(mesh, t, area);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tri[i], tri[j], (i == j ? 2.0 : 1.0) * area / 12.0);
    }
    SpMat m(mesh.vertex_count(), mesh.vertex_count());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SpMat assemble_stiffness(const Mesh& mesh, double diffusivity,
                         const std::vector<RobinTerm>& robin) {
    if (!(diffusivity > 0.0)) throw std::invalid_argument("diffusivity must be positive");
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangle_count() * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double area = mesh.triangle_area(t);
        check_triangle(mesh, t, area);
        const auto& tri = mesh.triangles[t];
        const Vec2 p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]],
                   p2 = mesh.vertices[tri[2]];
        // Constant gradients of the barycentric basis.
        const Vec2 g[3] = {
            {(p1.y - p2.y) / (2.0 * area), (p2.x - p1.x) / (2.0 * area)},
            {(p2.y - p0.y) / (2.0 * area), (p0.x - p2.x) / (2.0 * area)},
            {(p0.y - p1.y) / (2.0 * area), (p1.x - p0.x) / (2.0 * area)},
        };
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tri[i], tri[j], diffusivity * area * dot(g[i], g[j]));
    }
    for (const auto& r : robin) {
        if (r.nu < 0.0) throw std::invalid_argument("Robin coefficient must be nonnegative");
        if (r.nu == 0.0) continue;
        for (const auto& e : mesh.boundary_edges) {
            if (e.label != r.segment) continue;
            const double h = edge_length(mesh, e);
            trip.emplace_back(e.a, e.a, r.nu * h / 3.0);
            trip.emplace_back(e.b, e.b, r.nu * h / 3.0);
            trip.emplace_back(e.a, e.b, r.nu * h / 6.0);
            trip.emplace_back(e.b, e.a, r.nu * h / 6.0);
        }
    }
    SpMat s(mesh.vertex_count(), mesh.vertex_count());
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

Vec assemble_load(const Mesh& mesh, const ScalarField& f, double t,
                  const std::vector<RobinTerm>& robin) {
    Vec u = Vec::Zero(mesh.vertex_count());
    if (f) {
        for (int k = 0; k < mesh.triangle_count(); ++k) {
            const double area = mesh.triangle_area(k);
            check_triangle(mesh, k, area);
            const auto& tri = mesh.triangles[k];
            const Vec2 p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                               mesh.vertices[tri[2]]};
            // Edge-midpoint rule; phi_i is 1/2 on the two midpoints adjacent
            // to vertex i and 0 on the opposite one.
            const double fm[3] = {f(0.5 * (p[0] + p[1]), t), f(0.5 * (p[1] + p[2]), t),
                                  f(0.5 * (p[2] + p[0]), t)};
            u[tri[0]] += area / 3.0 * 0.5 * (fm[0] + fm[2]);
            u[tri[1]] += area / 3.0 * 0.5 * (fm[0] + fm[1]);
            u[tri[2]] += area / 3.0 * 0.5 * (fm[1] + fm[2]);
        }
    }
    for (const auto& r : robin) {
        if (r.nu == 0.0) continue;
        for (const auto& e : mesh.boundary_edges) {
            if (e.label != r.segment) continue;
            const double h = edge_length(mesh, e);
            u[e.a] += r.nu * r.external * h / 2.0;
            u[e.b] += r.nu * r.external * h / 2.0;
        }
    }
    return u;
}

FeSystem assemble_system(const Mesh& mesh, double diffusivity,
                         const std::vector<RobinTerm>& robin) {
    return {assemble_mass(mesh), assemble_stiffness(mesh, diffusivity, robin),
            mesh.vertex_count()};
}

std::optional<PointLocation> try_locate_point(const Mesh& mesh, Vec2 p) {
    constexpr double tol = 1e-12;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]],
                   c = mesh.vertices[tri[2]];
        const double area2 = cross(b - a, c - a);
        const double w0 = cross(b - p, c - p) / area2;
        const double w1 = cross(c - p, a - p) / area2;
        const double w2 = cross(a - p, b - p) / area2;
        if (w0 >= -tol && w1 >= -tol && w2 >= -tol) {
            PointLocation loc;
            loc.triangle = t;
            loc.weights = {std::max(w0, 0.0), std::max(w1, 0.0), std::max(w2, 0.0)};
            const double sum = loc.weights[0] + loc.weights[1] + loc.weights[2];
            for (auto& w : loc.weights) w /= sum;
            return loc;
        }
    }
    return std::nullopt;
}

PointLocation locate_point(const Mesh& mesh, Vec2 p) {
    auto loc = try_locate_point(mesh, p);
    if (!loc)
        throw OutOfDomainError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                               ") lies outside the mesh");
    return *loc;
}

double eval_field(const Mesh& mesh, const Vec& coeffs, Vec2 p) {
    if (coeffs.size() != mesh.vertex_count())
        throw std::invalid_argument("eval_field: coefficient length mismatch");
    const PointLocation loc = locate_point(mesh, p);
    const auto& tri = mesh.triangles[loc.triangle];
    return loc.weights[0] * coeffs[tri[0]] + loc.weights[1] * coeffs[tri[1]] +
           loc.weights[2] * coeffs[tri[2]];
}

FieldSampler::FieldSampler(const Mesh& mesh, const std::vector<Vec2>& points) {
    locations_.reserve(points.size());
    vertex_ids_.reserve(points.size());
    for (const auto& p : points) {
        locations_.push_back(locate_point(mesh, p));
        vertex_ids_.push_back(mesh.triangles[locations_.back().triangle]);
    }
}

Vec FieldSampler::sample(const Vec& coeffs) const {
    Vec out(point_count());
    for (int i = 0; i < point_count(); ++i) {
        const auto& w = locations_[i].weights;
        const auto& v = vertex_ids_[i];
        out[i] = w[0] * coeffs[v[0]] + w[1] * coeffs[v[1]] + w[2] * coeffs[v[2]];
    }
    return out;
}

Vec ReducedSystem::expand(const Vec& reduced) const {
    Vec full(full_to_reduced.size());
    for (std::size_t i = 0; i < full_to_reduced.size(); ++i)
        full[static_cast<int>(i)] = full_to_reduced[i] >= 0 ? reduced[full_to_reduced[i]] : 0.0;
    for (std::size_t k = 0; k < constrained.size(); ++k)
        full[constrained[k]] = boundary_values[static_cast<int>(k)];
    return full;
}

Vec ReducedSystem::restrict_free(const Vec& full) const {
    Vec out(reduced_to_full.size());
    for (std::size_t i = 0; i < reduced_to_full.size(); ++i)
        out[static_cast<int>(i)] = full[reduced_to_full[i]];
    return out;
}

ReducedSystem apply_essential_bc(const FeSystem& system, const Mesh& mesh,
                                 const std::vector<DirichletTerm>& dirichlet) {
    const int n = system.n;
    std::map<int, double> value;
    for (const auto& d : dirichlet) {
        const auto ids = mesh.segment_vertices(d.segment);
        if (ids.empty())
            throw std::invalid_argument("apply_essential_bc: unknown segment '" + d.segment + "'");
        for (int v : ids) {
            auto [it, inserted] = value.emplace(v, d.value);
            if (!inserted && it->second != d.value)
                throw std::invalid_argument(
                    "apply_essential_bc: conflicting Dirichlet values at shared vertex " +
                    std::to_string(v));
        }
    }

    ReducedSystem red;
    red.full_to_reduced.assign(n, -1);
    for (int v = 0; v < n; ++v) {
        if (value.count(v)) {
            red.constrained.push_back(v);
        } else {
            red.full_to_reduced[v] = static_cast<int>(red.reduced_to_full.size());
            red.reduced_to_full.push_back(v);
        }
    }
    red.boundary_values.resize(static_cast<int>(red.constrained.size()));
    std::map<int, int> constrained_pos;
    for (std::size_t k = 0; k < red.constrained.size(); ++k) {
        red.boundary_values[static_cast<int>(k)] = value[red.constrained[k]];
        constrained_pos[red.constrained[k]] = static_cast<int>(k);
    }

    const int nf = static_cast<int>(red.reduced_to_full.size());
    const int nc = static_cast<int>(red.constrained.size());
    std::vector<Triplet> tm, ts, tmc, tsc;
    for (int col = 0; col < n; ++col) {
        for (SpMat::InnerIterator it(system.mass, col); it; ++it) {
            const int ri = red.full_to_reduced[static_cast<int>(it.row())];
            if (ri < 0) continue;
            const int ci = red.full_to_reduced[col];
            if (ci >= 0)
                tm.emplace_back(ri, ci, it.value());
            else
                tmc.emplace_back(ri, constrained_pos[col], it.value());
        }
        for (SpMat::InnerIterator it(system.stiffness, col); it; ++it) {
            const int ri = red.full_to_reduced[static_cast<int>(it.row())];
            if (ri < 0) continue;
            const int ci = red.full_to_reduced[col];
            if (ci >= 0)
                ts.emplace_back(ri, ci, it.value());
            else
                tsc.emplace_back(ri, constrained_pos[col], it.value());
        }
    }
    red.mass.resize(nf, nf);
    red.mass.setFromTriplets(tm.begin(), tm.end());
    red.stiffness.resize(nf, nf);
    red.stiffness.setFromTriplets(ts.begin(), ts.end());
    red.mass_coupling.resize(nf, nc);
    red.mass_coupling.setFromTriplets(tmc.begin(), tmc.end());
    red.stiffness_coupling.resize(nf, nc);
    red.stiffness_coupling.setFromTriplets(tsc.begin(), tsc.end());
    return red;
}

}  // namespace fekf
