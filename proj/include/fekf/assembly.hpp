#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fekf/mesh.hpp"

namespace fekf {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Scalar forcing field f(p, t).
using ScalarField = std::function<double(Vec2, double)>;

/// Convective exchange on a boundary segment: lambda dx/dn + nu x = nu x_e.
struct RobinTerm {
    std::string segment;
    double nu = 0.0;          // exchange rate, >= 0
    double external = 0.0;    // x_e, only used by the load
};

struct DirichletTerm {
    std::string segment;
    double value = 0.0;
};

/// Assembled spatial operators of the piecewise-linear Galerkin
/// discretization. Both matrices share the vertex-adjacency pattern.
struct FeSystem {
    SpMat mass;
    SpMat stiffness;
    int n = 0;
};

/// Element-wise exact mass matrix: per triangle (area/12) * [[2,1,1],[1,2,1],[1,1,2]].
SpMat assemble_mass(const Mesh& mesh);

/// diffusivity * grad-grad blocks plus nu-weighted edge mass on Robin segments.
SpMat assemble_stiffness(const Mesh& mesh, double diffusivity,
                         const std::vector<RobinTerm>& robin = {});

/// Load vector: edge-midpoint quadrature of phi_i * f (exact for linear f)
/// plus nu*x_e edge integrals on Robin segments.
Vec assemble_load(const Mesh& mesh, const ScalarField& f, double t,
                  const std::vector<RobinTerm>& robin = {});

FeSystem assemble_system(const Mesh& mesh, double diffusivity,
                         const std::vector<RobinTerm>& robin = {});

/// Containing triangle and barycentric weights of a point.
struct PointLocation {
    int triangle = -1;
    std::array<double, 3> weights{};
};

std::optional<PointLocation> try_locate_point(const Mesh& mesh, Vec2 p);

/// Throws OutOfDomainError when p is outside every triangle.
PointLocation locate_point(const Mesh& mesh, Vec2 p);

/// Barycentric interpolation of nodal coefficients at p.
double eval_field(const Mesh& mesh, const Vec& coeffs, Vec2 p);

/// Repeated evaluation at a fixed point set: the containing triangles are
/// located once, after which sampling is a sparse product.
class FieldSampler {
public:
    FieldSampler(const Mesh& mesh, const std::vector<Vec2>& points);
    Vec sample(const Vec& coeffs) const;
    int point_count() const { return static_cast<int>(locations_.size()); }
    const PointLocation& location(int i) const { return locations_[i]; }

private:
    std::vector<PointLocation> locations_;
    std::vector<std::array<int, 3>> vertex_ids_;
};

/// Result of eliminating Dirichlet-constrained vertices. The reduced
/// operators act on free vertices only; the coupling blocks provide the
/// right-hand-side contributions of prescribed boundary values.
struct ReducedSystem {
    SpMat mass;
    SpMat stiffness;
    std::vector<int> reduced_to_full;
    std::vector<int> full_to_reduced;    // -1 at constrained vertices
    std::vector<int> constrained;        // full vertex ids, ascending
    Vec boundary_values;                 // aligned with `constrained`
    SpMat mass_coupling;                 // M_ib (reduced rows x constrained cols)
    SpMat stiffness_coupling;            // S_ib

    /// Dirichlet load for the stored boundary values: -S_ib * g.
    Vec dirichlet_load() const { return -(stiffness_coupling * boundary_values); }

    /// Expand a reduced vector to full length, inserting boundary values.
    Vec expand(const Vec& reduced) const;
    /// Restrict a full vector to the free vertices.
    Vec restrict_free(const Vec& full) const;
};

/// Eliminates vertices on the given segments. A vertex shared by a Dirichlet
/// and a non-Dirichlet segment is constrained; two different prescribed
/// values on one vertex raise std::invalid_argument.
ReducedSystem apply_essential_bc(const FeSystem& system, const Mesh& mesh,
                                 const std::vector<DirichletTerm>& dirichlet);

}  // namespace fekf
