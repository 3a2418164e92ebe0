#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "fekf/decomposition.hpp"

namespace fekf {

using Mat = Eigen::MatrixXd;

/// Backward-Euler transition of the global system:
/// A = (M + dt S)^{-1} M,  B = (M + dt S)^{-1} dt.
struct CentralModel {
    Mat A;
    Mat B;
    double dt = 0.0;
    Mat C;  // filled by build_measurement when sensors are known
    Mat Q;
    Mat R;
};

/// A and B via one sparse factorization; no explicit inverses are formed.
CentralModel discretize_central(const SpMat& mass, const SpMat& stiffness, double dt);

/// Per-node transition of the hybrid (implicit self / delayed-explicit
/// coupling) scheme. Neighbor blocks stay compressed to the interface
/// columns; `neighbor_cols[j]` gives their indices within node j's state.
/// With relaxation omega < 1 an additional self-delay term appears.
struct LocalModel {
    int node = -1;
    double dt = 0.0;
    double omega = 1.0;
    Mat A_self;                              // multiplies own state at l-1
    std::optional<Mat> A_self_delay;         // multiplies own state at l-2 (omega < 1)
    std::map<int, Mat> A_neighbor;           // multiplies neighbor state at l-1
    std::map<int, Mat> A_neighbor_delay;     // multiplies neighbor state at l-2
    std::map<int, std::vector<int>> neighbor_cols;
    Mat B;
    Mat C;      // local measurement rows (may be 0 x size)
    std::vector<int> sensor_ids;
    Mat Q;
    Mat R;

    int size() const { return static_cast<int>(A_self.rows()); }
};

LocalModel discretize_local(const LocalBlocks& blocks, double dt);

/// Relaxed scheme: self terms weighted (2-omega) and -(1-omega), coupling
/// terms scaled by omega. omega = 1 reproduces discretize_local exactly.
LocalModel discretize_local_omega(const LocalBlocks& blocks, double dt, double omega);

/// Measurement rows: barycentric weights of each sensor position
/// (nonnegative, summing to 1, at most 3 nonzeros).
Mat build_measurement(const Mesh& mesh, const std::vector<Vec2>& sensors);

/// Sensor-to-node assignment. A node consumes a sensor when the containing
/// triangle belongs to its subdomain and all three of its vertices are in the
/// node's internal set, so the local row is expressible in the local state;
/// sensors deep in an overlap are consumed by several nodes.
struct LocalMeasurement {
    Mat C;
    std::vector<int> sensor_ids;
};

std::vector<LocalMeasurement> build_local_measurements(const Mesh& mesh,
                                                       const std::vector<Vec2>& sensors,
                                                       const Decomposition& dec);

/// Attach measurement rows and noise covariances to node models.
void attach_measurements(std::vector<LocalModel>& models,
                         const std::vector<LocalMeasurement>& meas, double sigma_w,
                         double sigma_v);

/// Dense expansion of the coupling terms into augmented layout:
/// first = sum of A^{mj} blocks, second = sum of the delayed blocks.
std::pair<Mat, Mat> expand_coupling(const std::vector<LocalModel>& models,
                                    const Decomposition& dec);

Mat block_diag_transition(const std::vector<LocalModel>& models);

/// One synchronous round applied to stacked augmented states:
/// next = A_D cur + A_F cur + A_F_delay prev (+ optional self-delay terms).
struct GlobalRecursion {
    Mat A_diag;
    Mat A_coupling;
    Mat A_coupling_delay;
    std::optional<Mat> A_self_delay;  // block-diag, only when omega < 1

    Vec step(const Vec& cur, const Vec& prev) const;
};

GlobalRecursion global_recursion(const std::vector<LocalModel>& models,
                                 const Decomposition& dec);

/// Exact L-round composition of the consensus recursion, built operationally
/// by running the recursion itself (initialized with the delayed state equal
/// to the initial state) on basis vectors. A_coupling_L is the composed map
/// minus A_diag_L; no closed-form product expansion is assumed.
struct ComposedModel {
    int L = 0;
    Mat A_diag_L;        // A_D^L
    Mat A_coupling_L;    // composed map - A_D^L
    Mat B_L;             // maps col{u_l, l=1..L}, built on demand
    Mat D_L;             // maps col{w_l, l=1..L}, built on demand
};

ComposedModel compose_L_steps(const std::vector<LocalModel>& models, const Decomposition& dec,
                              int L, bool with_input_maps = false);

}  // namespace fekf
