#include "fekf/model.hpp"

#include <Eigen/SparseCholesky>
#include <stdexcept>

#include "fekf/errors.hpp"

namespace fekf {

namespace {

using Solver = Eigen::SimplicialLDLT<SpMat>;

void check_solver(const Solver& solver, const char* what) {
    if (solver.info() != Eigen::Success)
        throw NumericalError(std::string("factorization failed in ") + what);
}

}  // namespace

CentralModel discretize_central(const SpMat& mass, const SpMat& stiffness, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("discretize_central: dt must be positive");
    const SpMat lhs = mass + dt * stiffness;
    Solver solver(lhs);
    check_solver(solver, "discretize_central");
    CentralModel model;
    model.dt = dt;
    model.A = solver.solve(Mat(mass));
    model.B = solver.solve(dt * Mat::Identity(mass.rows(), mass.cols()));
    return model;
}

LocalModel discretize_local(const LocalBlocks& blocks, double dt) {
    return discretize_local_omega(blocks, dt, 1.0);
}

LocalModel discretize_local_omega(const LocalBlocks& blocks, double dt, double omega) {
    if (!(dt > 0.0)) throw std::invalid_argument("discretize_local: dt must be positive");
    if (!(omega > 0.0) || omega > 1.0)
        throw std::invalid_argument("discretize_local_omega: omega must lie in (0, 1]");
    const SpMat lhs = blocks.mass_self + (omega * dt) * blocks.stiffness_self;
    Solver solver(lhs);
    check_solver(solver, "discretize_local");

    LocalModel model;
    model.node = blocks.node;
    model.dt = dt;
    model.omega = omega;
    model.neighbor_cols = blocks.neighbor_cols;
    model.A_self = solver.solve((2.0 - omega) * Mat(blocks.mass_self));
    if (omega < 1.0)
        model.A_self_delay = solver.solve((-(1.0 - omega)) * Mat(blocks.mass_self));
    for (const auto& [j, m_nbr] : blocks.mass_neighbor) {
        const Mat& s_nbr = blocks.stiffness_neighbor.at(j);
        model.A_neighbor[j] = solver.solve(Mat(-omega * dt * s_nbr - omega * m_nbr));
        model.A_neighbor_delay[j] = solver.solve(Mat(omega * m_nbr));
    }
    const int n = static_cast<int>(blocks.mass_self.rows());
    model.B = solver.solve(omega * dt * Mat::Identity(n, n));
    return model;
}

Mat build_measurement(const Mesh& mesh, const std::vector<Vec2>& sensors) {
    Mat c = Mat::Zero(static_cast<int>(sensors.size()), mesh.vertex_count());
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const PointLocation loc = locate_point(mesh, sensors[i]);
        const auto& tri = mesh.triangles[loc.triangle];
        for (int k = 0; k < 3; ++k) c(static_cast<int>(i), tri[k]) += loc.weights[k];
    }
    return c;
}

std::vector<LocalMeasurement> build_local_measurements(const Mesh& mesh,
                                                       const std::vector<Vec2>& sensors,
                                                       const Decomposition& dec) {
    std::vector<char> tri_in_node;
    std::vector<LocalMeasurement> out(dec.node_count);
    std::vector<std::vector<std::pair<int, std::array<double, 3>>>> rows(dec.node_count);
    std::vector<std::vector<std::array<int, 3>>> row_verts(dec.node_count);

    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const PointLocation loc = locate_point(mesh, sensors[i]);
        const auto& tri = mesh.triangles[loc.triangle];
        bool consumed = false;
        for (int m = 0; m < dec.node_count; ++m) {
            if (!std::binary_search(dec.node_triangles[m].begin(), dec.node_triangles[m].end(),
                                    loc.triangle))
                continue;
            bool internal = true;
            for (int v : tri) internal = internal && dec.local_index[m].count(v) > 0;
            if (!internal) continue;
            rows[m].push_back({static_cast<int>(i), loc.weights});
            row_verts[m].push_back(tri);
            consumed = true;
        }
        if (!consumed)
            throw DecompositionError("sensor " + std::to_string(i) +
                                     " is consumed by no node; move it away from interface bands");
    }
    for (int m = 0; m < dec.node_count; ++m) {
        const int nm = dec.block_size(m);
        out[m].C = Mat::Zero(static_cast<int>(rows[m].size()), nm);
        for (std::size_t r = 0; r < rows[m].size(); ++r) {
            out[m].sensor_ids.push_back(rows[m][r].first);
            for (int k = 0; k < 3; ++k)
                out[m].C(static_cast<int>(r), dec.local_index[m].at(row_verts[m][r][k])) +=
                    rows[m][r].second[k];
        }
    }
    return out;
}

void attach_measurements(std::vector<LocalModel>& models,
                         const std::vector<LocalMeasurement>& meas, double sigma_w,
                         double sigma_v) {
    for (std::size_t m = 0; m < models.size(); ++m) {
        models[m].C = meas[m].C;
        models[m].sensor_ids = meas[m].sensor_ids;
        const int nm = models[m].size();
        models[m].Q = sigma_w * sigma_w * Mat::Identity(nm, nm);
        const int sm = static_cast<int>(meas[m].C.rows());
        models[m].R = sigma_v * sigma_v * Mat::Identity(sm, sm);
    }
}

std::pair<Mat, Mat> expand_coupling(const std::vector<LocalModel>& models,
                                    const Decomposition& dec) {
    const int n = dec.augmented_dim();
    Mat f = Mat::Zero(n, n), fd = Mat::Zero(n, n);
    for (const auto& model : models) {
        const int off = dec.block_offset[model.node];
        for (const auto& [j, block] : model.A_neighbor) {
            const auto& cols = model.neighbor_cols.at(j);
            for (int c = 0; c < block.cols(); ++c)
                f.block(off, dec.block_offset[j] + cols[c], block.rows(), 1) += block.col(c);
        }
        for (const auto& [j, block] : model.A_neighbor_delay) {
            const auto& cols = model.neighbor_cols.at(j);
            for (int c = 0; c < block.cols(); ++c)
                fd.block(off, dec.block_offset[j] + cols[c], block.rows(), 1) += block.col(c);
        }
    }
    return {f, fd};
}

Mat block_diag_transition(const std::vector<LocalModel>& models) {
    int n = 0;
    for (const auto& m : models) n += m.size();
    Mat a = Mat::Zero(n, n);
    int off = 0;
    for (const auto& m : models) {
        a.block(off, off, m.size(), m.size()) = m.A_self;
        off += m.size();
    }
    return a;
}

Vec GlobalRecursion::step(const Vec& cur, const Vec& prev) const {
    Vec next = A_diag * cur + A_coupling * cur + A_coupling_delay * prev;
    if (A_self_delay) next += (*A_self_delay) * prev;
    return next;
}

GlobalRecursion global_recursion(const std::vector<LocalModel>& models,
                                 const Decomposition& dec) {
    GlobalRecursion rec;
    rec.A_diag = block_diag_transition(models);
    auto [f, fd] = expand_coupling(models, dec);
    rec.A_coupling = std::move(f);
    rec.A_coupling_delay = std::move(fd);
    bool any_delay = false;
    for (const auto& m : models) any_delay = any_delay || m.A_self_delay.has_value();
    if (any_delay) {
        Mat d = Mat::Zero(dec.augmented_dim(), dec.augmented_dim());
        for (const auto& m : models)
            if (m.A_self_delay)
                d.block(dec.block_offset[m.node], dec.block_offset[m.node], m.size(), m.size()) =
                    *m.A_self_delay;
        rec.A_self_delay = std::move(d);
    }
    return rec;
}

ComposedModel compose_L_steps(const std::vector<LocalModel>& models, const Decomposition& dec,
                              int L, bool with_input_maps) {
    if (L < 1) throw std::invalid_argument("compose_L_steps: L must be >= 1");
    const GlobalRecursion rec = global_recursion(models, dec);
    const int n = dec.augmented_dim();

    ComposedModel out;
    out.L = L;
    out.A_diag_L = Mat::Identity(n, n);
    for (int l = 0; l < L; ++l) out.A_diag_L = rec.A_diag * out.A_diag_L;

    // Homogeneous L-round map on all basis vectors at once, honoring the
    // delayed-state initialization prev = cur.
    Mat cur = Mat::Identity(n, n), prev = Mat::Identity(n, n);
    for (int l = 0; l < L; ++l) {
        Mat next = rec.A_diag * cur + rec.A_coupling * cur + rec.A_coupling_delay * prev;
        if (rec.A_self_delay) next += (*rec.A_self_delay) * prev;
        prev = std::move(cur);
        cur = std::move(next);
    }
    out.A_coupling_L = cur - out.A_diag_L;

    if (with_input_maps) {
        // Input u_l and noise w_l enter the update that produces x_l; their
        // effect on x_L is the remaining L-l homogeneous rounds applied to an
        // impulse (with a zero delayed state at injection time).
        Mat b_diag = Mat::Zero(n, n);
        for (const auto& m : models)
            b_diag.block(dec.block_offset[m.node], dec.block_offset[m.node], m.size(), m.size()) =
                m.B;
        out.B_L = Mat::Zero(n, n * L);
        out.D_L = Mat::Zero(n, n * L);
        Mat prop = Mat::Identity(n, n);        // impulse at round L
        Mat prop_prev = Mat::Zero(n, n);       // response one round later to the delayed copy
        for (int l = L; l >= 1; --l) {
            out.D_L.middleCols((l - 1) * n, n) = prop;
            out.B_L.middleCols((l - 1) * n, n) = prop * b_diag;
            // Shift the impulse one round earlier: x_l also feeds round l+1
            // through the current-state and delayed-state terms.
            Mat next_prop = prop * (rec.A_diag + rec.A_coupling) + prop_prev * rec.A_coupling_delay;
            if (rec.A_self_delay) next_prop += prop_prev * (*rec.A_self_delay);
            prop_prev = prop;
            prop = std::move(next_prop);
        }
    }
    return out;
}

}  // namespace fekf
