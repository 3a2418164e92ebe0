#include "fekf/stability.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "fekf/errors.hpp"
#include "fekf/filter_central.hpp"
#include "fekf/rng.hpp"

namespace fekf {

namespace {

Mat dense_coupling_operator(const AugmentedSystem& aug) {
    Eigen::SimplicialLDLT<SpMat> solver(aug.mass_diag);
    if (solver.info() != Eigen::Success)
        throw NumericalError("zero_stability: mass block factorization failed");
    return solver.solve(Mat(aug.mass_coupling));
}

Mat matrix_power(const Mat& a, int p) {
    Mat out = Mat::Identity(a.rows(), a.cols());
    for (int i = 0; i < p; ++i) out = a * out;
    return out;
}

double spectral_radius_dense(const Mat& a) {
    Eigen::EigenSolver<Mat> eig(a, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

ZeroStabilityResult zero_stability(const AugmentedSystem& aug, int krylov, double tol) {
    const int n = aug.dim;
    Eigen::SimplicialLDLT<SpMat> solver(aug.mass_diag);
    if (solver.info() != Eigen::Success)
        throw NumericalError("zero_stability: mass block factorization failed");
    auto apply = [&](const Vec& v) -> Vec { return solver.solve(aug.mass_coupling * v); };

    const int m = std::min(krylov, n);
    Vec v0(n);
    for (int i = 0; i < n; ++i) v0[i] = uniform_open(mix_keys(0x5eedu, i)) - 0.5;
    v0.normalize();

    std::vector<Vec> basis{v0};
    Mat h = Mat::Zero(m + 1, m);
    int built = 0;
    double scale = 0.0;
    for (int k = 0; k < m; ++k) {
        Vec w = apply(basis[k]);
        scale = std::max(scale, w.norm());
        for (int i = 0; i <= k; ++i) {
            h(i, k) = basis[i].dot(w);
            w -= h(i, k) * basis[i];
        }
        // Re-orthogonalize once; plain MGS loses orthogonality on clustered spectra.
        for (int i = 0; i <= k; ++i) {
            const double c = basis[i].dot(w);
            h(i, k) += c;
            w -= c * basis[i];
        }
        h(k + 1, k) = w.norm();
        built = k + 1;
        if (h(k + 1, k) < 1e-14 * std::max(1.0, scale)) break;  // invariant subspace
        basis.push_back(w / h(k + 1, k));
    }

    ZeroStabilityResult result;
    if (scale < 1e-300) {  // coupling is exactly zero (single node)
        result.rho = 0.0;
        result.converged = true;
        return result;
    }
    const Mat hm = h.topLeftCorner(built, built);
    Eigen::EigenSolver<Mat> eig(hm);
    int best = 0;
    for (int i = 1; i < built; ++i)
        if (std::abs(eig.eigenvalues()[i]) > std::abs(eig.eigenvalues()[best])) best = i;
    result.rho = std::abs(eig.eigenvalues()[best]);
    if (built < std::min(krylov, n) || h(built, built - 1) < 1e-14 * std::max(1.0, scale)) {
        result.converged = true;  // exact invariant subspace
    } else {
        const double tail = std::abs(eig.eigenvectors().col(best)[built - 1]);
        const double residual = h(built, built - 1) * tail;
        result.converged = residual <= tol * std::max(result.rho, 1e-8);
    }
    return result;
}

double zero_stability_companion(const AugmentedSystem& aug) {
    const int n = aug.dim;
    const Mat k = dense_coupling_operator(aug);
    Mat companion = Mat::Zero(2 * n, 2 * n);
    companion.topLeftCorner(n, n) = Mat::Identity(n, n);
    companion.topRightCorner(n, n) = -k;
    companion.bottomRightCorner(n, n) = -k;
    Eigen::EigenSolver<Mat> eig(companion, false);
    std::vector<double> dist_to_one(2 * n), moduli(2 * n);
    std::vector<int> order(2 * n);
    for (int i = 0; i < 2 * n; ++i) {
        dist_to_one[i] = std::abs(eig.eigenvalues()[i] - std::complex<double>(1.0, 0.0));
        moduli[i] = std::abs(eig.eigenvalues()[i]);
        order[i] = i;
    }
    // Drop the n eigenvalues contributed by the identity block (closest to 1).
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return dist_to_one[a] < dist_to_one[b]; });
    double rho = 0.0;
    for (int i = n; i < 2 * n; ++i) rho = std::max(rho, moduli[order[i]]);
    return rho;
}

OmegaSelection select_omega(const AugmentedSystem& aug, double safety) {
    if (!(safety > 0.0) || safety >= 1.0)
        throw std::invalid_argument("select_omega: safety must lie in (0, 1)");
    const Mat k = dense_coupling_operator(aug);
    Eigen::EigenSolver<Mat> eig(k, false);
    const auto mu = eig.eigenvalues();
    const double rho = mu.cwiseAbs().maxCoeff();

    auto rho_at = [&](double omega) {
        double worst = 0.0;
        for (int i = 0; i < mu.size(); ++i)
            worst = std::max(worst,
                             std::abs(omega * mu[i] - std::complex<double>(1.0 - omega, 0.0)));
        return worst;
    };
    if (rho < 1.0) return {1.0, rho_at(1.0)};

    const double cap = 1.0 - safety;
    const int largest = static_cast<int>(std::floor(1000.0 * cap / rho));
    for (int g = largest; g >= 1; --g) {
        const double omega = g / 1000.0;
        if (omega * rho > cap || 1.0 - omega > cap) continue;
        const double exact = rho_at(omega);
        if (exact < 1.0) return {omega, exact};
    }
    throw NumericalError(
        "select_omega: no omega on the grid stabilizes the relaxed scheme (coupling spectrum "
        "reaches past -1)");
}

RiccatiResult steady_riccati(const Mat& A_diag, int L, double gamma_total, const Mat& Q,
                             const Mat& C, const Mat& R, double tol, int max_iter, const Mat& P0,
                             bool check_observability) {
    const int n = static_cast<int>(A_diag.rows());
    if (L < 1) throw std::invalid_argument("steady_riccati: L must be >= 1");
    const Mat AL = matrix_power(A_diag, L);

    if (check_observability && C.rows() > 0) {
        const int rows = static_cast<int>(C.rows());
        Mat obs(rows * n, n);
        Mat power = Mat::Identity(n, n);
        int rank = 0;
        for (int k = 0; k < n; ++k) {
            obs.middleRows(k * rows, rows) = C * power;
            power = AL * power;
            const bool checkpoint = (k + 1 == n) || ((k + 1) % 16 == 0 && (k + 1) * rows >= n);
            if (checkpoint) {
                Eigen::ColPivHouseholderQR<Mat> qr(obs.topRows((k + 1) * rows));
                qr.setThreshold(1e-8);
                rank = static_cast<int>(qr.rank());
                if (rank == n) break;
            }
        }
        if (rank < n)
            throw NumericalError("steady_riccati: (A^L, C) fails the observability rank check (" +
                                 std::to_string(rank) + " < " + std::to_string(n) + ")");
    }

    // Composed process term of L boosted rounds.
    const double g2 = gamma_total * gamma_total;
    Mat phi = Mat::Zero(n, n);
    Mat power = Mat::Identity(n, n);
    for (int i = 0; i < L; ++i) {
        phi += std::pow(gamma_total, 2.0 * i / L) * power * Q * power.transpose();
        power = A_diag * power;
    }
    phi = 0.5 * (phi + phi.transpose());

    RiccatiResult out;
    out.P = P0.size() > 0 ? P0 : Mat(Mat::Identity(n, n));
    Mat pred;
    for (int it = 1; it <= max_iter; ++it) {
        pred = g2 * (AL * out.P * AL.transpose()) + phi;
        pred = 0.5 * (pred + pred.transpose());
        const Mat PCt = pred * C.transpose();
        Eigen::LDLT<Mat> innov(R + C * PCt);
        if (innov.info() != Eigen::Success)
            throw NumericalError("steady_riccati: singular innovation covariance");
        out.gain = innov.solve(PCt.transpose()).transpose();
        Mat next = pred - out.gain * (C * pred);
        next = 0.5 * (next + next.transpose());
        const double change = (next - out.P).norm() / std::max(next.norm(), 1e-300);
        out.P = std::move(next);
        out.iterations = it;
        if (change < tol) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged)
        throw NumericalError("steady_riccati: no convergence after " + std::to_string(max_iter) +
                             " iterations");

    // Information-form residual of the fixed point.
    const Mat Pinv = out.P.llt().solve(Mat::Identity(n, n));
    const Mat pred_inv = pred.llt().solve(Mat::Identity(n, n));
    const Mat Rinv_C = R.llt().solve(C);
    out.residual = (Pinv - pred_inv - C.transpose() * Rinv_C).norm() / Pinv.norm();
    return out;
}

double weighted_norm(const Mat& X, const Mat& P) {
    Eigen::LLT<Mat> llt(P);
    if (llt.info() != Eigen::Success)
        throw NumericalError("weighted_norm: weight matrix is not positive definite");
    const Mat Lt = llt.matrixU();
    Mat y = Lt * X;  // y <- Lt X Lt^{-1}
    y = Lt.transpose().triangularView<Eigen::Lower>().solve(y.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(y.transpose() * y);
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

GammaCheck check_gamma_condition(const Mat& P, const Mat& A_diag, const Mat& A_coupling_L,
                                 int L, double gamma_total) {
    const Mat AL = matrix_power(A_diag, L);
    Eigen::PartialPivLU<Mat> lu(AL);
    const Mat X = Mat::Identity(AL.rows(), AL.cols()) + lu.solve(A_coupling_L);
    GammaCheck out;
    out.bound = weighted_norm(X, P);
    out.pass = gamma_total > out.bound;
    return out;
}

double weighted_norm_closed_loop(const Mat& P, const Mat& gain, const Mat& C, const Mat& A_diag,
                                 int L) {
    const Mat AL = matrix_power(A_diag, L);
    const Mat closed = (Mat::Identity(AL.rows(), AL.cols()) - gain * C) * AL;
    return weighted_norm(closed, P);
}

double error_dynamics(const Mat& gain, const Mat& C, const Mat& A_diag, const Mat& A_coupling_L,
                      int L) {
    const Mat AL = matrix_power(A_diag, L);
    const Mat closed =
        (Mat::Identity(AL.rows(), AL.cols()) - gain * C) * (AL + A_coupling_L);
    return spectral_radius_dense(closed);
}

ConsistencyResult consistency_order(const AugmentedSystem& aug, const Vec& shape, double alpha,
                                    double horizon, const std::vector<double>& deltas) {
    ConsistencyResult out;
    const SpMat mass_total = aug.mass_diag + aug.mass_coupling;
    const SpMat stiff_total = aug.stiffness_diag + aug.stiffness_coupling;
    for (double delta : deltas) {
        const int steps = static_cast<int>(std::lround(horizon / delta));
        Eigen::SimplicialLDLT<SpMat> solver(SpMat(aug.mass_diag + delta * aug.stiffness_diag));
        if (solver.info() != Eigen::Success)
            throw NumericalError("consistency_order: factorization failed");
        Vec cur = shape, prev = shape;
        for (int l = 0; l < steps; ++l) {
            const double t_next = (l + 1) * delta;
            const Vec u = std::exp(-alpha * t_next) * (stiff_total * shape - alpha * (mass_total * shape));
            Vec rhs = aug.mass_diag * cur - aug.mass_coupling * (cur - prev) -
                      delta * (aug.stiffness_coupling * cur) + delta * u;
            Vec next = solver.solve(rhs);
            prev = std::move(cur);
            cur = std::move(next);
        }
        const Vec exact = std::exp(-alpha * horizon) * shape;
        out.deltas.push_back(delta);
        out.errors.push_back((cur - exact).lpNorm<Eigen::Infinity>());
    }
    // Least-squares slope of log(error) against log(delta).
    const int m = static_cast<int>(out.deltas.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        const double x = std::log(out.deltas[i]), y = std::log(std::max(out.errors[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return out;
}

bool StabilityReport::overall_pass() const {
    const bool implication = !gamma_ok || error_stable;
    return zero_stable && riccati_converged && proof_slack >= -1e-8 && error_stable &&
           consistency_ok && implication;
}

StabilityReport analyze_stability(const AugmentedSystem& aug,
                                  const std::vector<LocalModel>& models,
                                  const Decomposition& dec, int L, double gamma_total) {
    StabilityReport rep;
    rep.L = L;
    rep.gamma_total = gamma_total;

    const ZeroStabilityResult zs = zero_stability(aug);
    rep.rho_zero = zs.rho;
    rep.rho_zero_converged = zs.converged;
    rep.rho_zero_companion = zero_stability_companion(aug);
    if (zs.converged &&
        std::abs(rep.rho_zero - rep.rho_zero_companion) > 1e-8 * std::max(1.0, rep.rho_zero))
        throw NumericalError("zero-stability estimates disagree beyond 1e-8");
    rep.zero_stable = (zs.converged ? zs.rho : rep.rho_zero_companion) < 1.0;

    const OmegaSelection om = select_omega(aug);
    rep.omega_used = om.omega;
    rep.rho_omega = om.rho_omega;

    const Mat A_diag = block_diag_transition(models);
    const ComposedModel composed = compose_L_steps(models, dec, L);
    Mat Qt = Mat::Zero(aug.dim, aug.dim), Rt;
    Mat Ct;
    {
        int total_rows = 0;
        for (const auto& m : models) total_rows += static_cast<int>(m.C.rows());
        Ct = Mat::Zero(total_rows, aug.dim);
        Rt = Mat::Zero(total_rows, total_rows);
        int row = 0;
        for (const auto& m : models) {
            const int off = dec.block_offset[m.node];
            Qt.block(off, off, m.size(), m.size()) = m.Q;
            Ct.block(row, off, m.C.rows(), m.size()) = m.C;
            Rt.block(row, row, m.R.rows(), m.R.cols()) = m.R;
            row += static_cast<int>(m.C.rows());
        }
    }

    const RiccatiResult ric = steady_riccati(A_diag, L, gamma_total, Qt, Ct, Rt);
    rep.riccati_converged = ric.converged;
    rep.are_residual = ric.residual;
    rep.riccati_iterations = ric.iterations;

    const GammaCheck gc = check_gamma_condition(ric.P, A_diag, composed.A_coupling_L, L, gamma_total);
    rep.gamma_bound = gc.bound;
    rep.gamma_ok = gc.pass;

    rep.proof_slack = 1.0 / gamma_total - weighted_norm_closed_loop(ric.P, ric.gain, Ct, A_diag, L);
    rep.rho_error = error_dynamics(ric.gain, Ct, A_diag, composed.A_coupling_L, L);
    rep.error_stable = rep.rho_error < 1.0;

    // Manufactured decaying field on the duplicated state.
    Vec shape(aug.dim);
    for (int m = 0; m < dec.node_count; ++m)
        for (std::size_t l = 0; l < dec.internal_vertices[m].size(); ++l)
            shape[dec.block_offset[m] + static_cast<int>(l)] =
                300.0 + 10.0 * std::sin(0.37 * dec.internal_vertices[m][l]);
    const double horizon = L * models.front().dt;
    const ConsistencyResult cons =
        consistency_order(aug, shape, 1e-3, horizon,
                          {horizon, horizon / 2.0, horizon / 4.0, horizon / 8.0});
    rep.consistency_slope = cons.slope;
    rep.consistency_ok = cons.slope >= 0.8 && cons.slope <= 1.2;
    return rep;
}

void write_report(std::ostream& os, const StabilityReport& rep) {
    os << "L = " << rep.L << '\n'
       << "gamma_total = " << rep.gamma_total << '\n'
       << "rho_zero = " << rep.rho_zero << '\n'
       << "rho_zero_converged = " << (rep.rho_zero_converged ? 1 : 0) << '\n'
       << "rho_zero_companion = " << rep.rho_zero_companion << '\n'
       << "zero_stable = " << (rep.zero_stable ? 1 : 0) << '\n'
       << "omega_used = " << rep.omega_used << '\n'
       << "rho_omega = " << rep.rho_omega << '\n'
       << "riccati_converged = " << (rep.riccati_converged ? 1 : 0) << '\n'
       << "riccati_iterations = " << rep.riccati_iterations << '\n'
       << "are_residual = " << rep.are_residual << '\n'
       << "gamma_bound = " << rep.gamma_bound << '\n'
       << "gamma_condition = " << (rep.gamma_ok ? 1 : 0) << '\n'
       << "proof_slack = " << rep.proof_slack << '\n'
       << "rho_error = " << rep.rho_error << '\n'
       << "error_stable = " << (rep.error_stable ? 1 : 0) << '\n'
       << "consistency_slope = " << rep.consistency_slope << '\n'
       << "consistency_ok = " << (rep.consistency_ok ? 1 : 0) << '\n'
       << "overall_pass = " << (rep.overall_pass() ? 1 : 0) << '\n';
}

}  // namespace fekf
