#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "fekf/model.hpp"

namespace fekf {

enum class Phase { Prior, Posterior };

/// Estimate/covariance pair of one filter instance.
struct FilterState {
    Vec x;
    Mat P;
    Phase phase = Phase::Prior;
    int step = 0;
};

/// Measurement update: gain P C^T (R + C P C^T)^{-1}, covariance update in
/// the literal P - L C P form followed by symmetrization. An empty
/// measurement leaves the state unchanged apart from the phase.
FilterState correct(const FilterState& prior, const Vec& y, const Mat& C, const Mat& R);

/// Time update: x <- A x + B u, P <- A P A^T + Q.
FilterState predict(const FilterState& posterior, const Mat& A, const Mat& B, const Vec& u,
                    const Mat& Q);

/// Covariance-free estimate update with a precomputed gain.
Vec apply_gain(const Vec& x, const Vec& y, const Mat& C, const Mat& gain);

struct CentralTrajectory {
    std::vector<double> times;
    std::vector<Vec> posteriors;
};

/// Runs the correct / (substeps x predict) cycle over a measurement stream;
/// measurement q arrives at time (q+1) * substeps * model.dt.
CentralTrajectory run_central_filter(const CentralModel& model,
                                     const std::vector<Vec>& measurements,
                                     const std::vector<Vec>& inputs, const Vec& x0, const Mat& P0,
                                     int substeps);

/// CSV emission: time,vertex,estimate.
void write_trajectory_csv(std::ostream& os, const CentralTrajectory& trajectory);

}  // namespace fekf
