#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "fekf/decomposition.hpp"
#include "fekf/model.hpp"

namespace fekf {

struct ZeroStabilityResult {
    double rho = 0.0;
    bool converged = false;
    bool zero_stable() const { return rho < 1.0; }
};

/// Spectral radius of M_D^{-1} M_F via Arnoldi iteration on the solve-apply
/// operator. A non-convergent iteration is reported with its last Ritz
/// estimate rather than thrown.
ZeroStabilityResult zero_stability(const AugmentedSystem& aug, int krylov = 100,
                                   double tol = 1e-10);

/// Same quantity through the companion form [[I, -K], [0, -K]] of the
/// homogeneous limit, restricted to the non-unit part of the spectrum
/// (the identity block contributes exactly dim unit eigenvalues).
double zero_stability_companion(const AugmentedSystem& aug);

struct OmegaSelection {
    double omega = 1.0;
    double rho_omega = 0.0;  // exact spectral radius at the chosen omega
};

/// Returns omega = 1 when the unrelaxed scheme is already zero-stable;
/// otherwise walks a 1e-3 grid from the largest omega satisfying
/// max(omega * rho, 1 - omega) <= 1 - safety downwards until the exact
/// relaxed spectral radius drops below 1. Throws NumericalError when no
/// omega works (possible when the coupling spectrum reaches past -1, where
/// the relaxation bound is vacuous).
OmegaSelection select_omega(const AugmentedSystem& aug, double safety = 0.05);

struct RiccatiResult {
    Mat P;           // steady posterior covariance
    Mat gain;        // steady Kalman gain
    double residual = 0.0;  // relative information-form residual
    int iterations = 0;
    bool converged = false;
};

/// Fixed-point iteration of the L-step boosted covariance recursion
///   P_pred = gamma_total^2 A^L P A^L' + sum_i gamma_total^(2i/L) A^i Q A^i'
///   P      = P_pred - G C P_pred,
/// i.e. the aggregate-boost composition of the per-round recursion (the
/// per-round factor is gamma_total^(1/L)). When check_observability is set,
/// the numerical rank of the observability block matrix of (A^L, C) is
/// verified at tolerance 1e-8 first. Throws on max_iter exhaustion or a
/// failed observability precondition.
RiccatiResult steady_riccati(const Mat& A_diag, int L, double gamma_total, const Mat& Q,
                             const Mat& C, const Mat& R, double tol = 1e-10,
                             int max_iter = 100000, const Mat& P0 = Mat(),
                             bool check_observability = true);

struct GammaCheck {
    double bound = 0.0;   // weighted norm of I + (A^L)^{-1} A_FL
    bool pass = false;    // gamma_total > bound
};

GammaCheck check_gamma_condition(const Mat& P, const Mat& A_diag, const Mat& A_coupling_L,
                                 int L, double gamma_total);

/// P-weighted norm of (I - G C) A^L; the steady-gain bound says this cannot
/// exceed 1/gamma_total.
double weighted_norm_closed_loop(const Mat& P, const Mat& gain, const Mat& C, const Mat& A_diag,
                                 int L);

/// Matrix norm induced by the P-weighted vector norm.
double weighted_norm(const Mat& X, const Mat& P);

/// Spectral radius of (I - G C)(A^L + A_FL), the sampled error dynamics.
double error_dynamics(const Mat& gain, const Mat& C, const Mat& A_diag, const Mat& A_coupling_L,
                      int L);

struct ConsistencyResult {
    double slope = 0.0;
    std::vector<double> deltas;
    std::vector<double> errors;
};

/// Empirical order of the hybrid scheme against the manufactured solution
/// x(t) = exp(-alpha t) * shape with forcing u = (S - alpha M) x. Errors at
/// the horizon are fitted in log-log over the given step sizes.
ConsistencyResult consistency_order(const AugmentedSystem& aug, const Vec& shape, double alpha,
                                    double horizon, const std::vector<double>& deltas);

/// Aggregated analyzer output, one line per key in the CLI.
struct StabilityReport {
    int L = 0;
    double gamma_total = 0.0;
    double rho_zero = 0.0;
    bool rho_zero_converged = false;
    double rho_zero_companion = 0.0;
    bool zero_stable = false;
    double omega_used = 1.0;
    double rho_omega = 0.0;
    double are_residual = 0.0;
    int riccati_iterations = 0;
    bool riccati_converged = false;
    double gamma_bound = 0.0;
    bool gamma_ok = false;
    double proof_slack = 0.0;  // 1/gamma_total - |(I-GC)A^L|_P, must be >= -1e-8
    double rho_error = 0.0;
    bool error_stable = false;
    double consistency_slope = 0.0;
    bool consistency_ok = false;

    bool overall_pass() const;
};

/// Full analysis of one decomposed configuration (one L / gamma pair).
StabilityReport analyze_stability(const AugmentedSystem& aug,
                                  const std::vector<LocalModel>& models,
                                  const Decomposition& dec, int L, double gamma_total);

void write_report(std::ostream& os, const StabilityReport& report);

}  // namespace fekf
