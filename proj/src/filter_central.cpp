#include "fekf/filter_central.hpp"

#include <ostream>
#include <stdexcept>

#include "fekf/errors.hpp"

namespace fekf {

FilterState correct(const FilterState& prior, const Vec& y, const Mat& C, const Mat& R) {
    if (prior.phase != Phase::Prior) throw std::invalid_argument("correct: state is not a prior");
    FilterState post = prior;
    post.phase = Phase::Posterior;
    if (y.size() == 0) return post;
    if (C.rows() != y.size() || C.cols() != prior.x.size() || R.rows() != y.size())
        throw std::invalid_argument("correct: dimension mismatch");

    const Mat PCt = prior.P * C.transpose();
    Mat innov_cov = R + C * PCt;
    Eigen::LDLT<Mat> ldlt(innov_cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("correct: innovation covariance is not positive definite");
    const Mat gain = ldlt.solve(PCt.transpose()).transpose();
    post.x = prior.x + gain * (y - C * prior.x);
    post.P = prior.P - gain * (C * prior.P);
    post.P = 0.5 * (post.P + post.P.transpose());
    return post;
}

FilterState predict(const FilterState& posterior, const Mat& A, const Mat& B, const Vec& u,
                    const Mat& Q) {
    if (posterior.phase != Phase::Posterior)
        throw std::invalid_argument("predict: state is not a posterior");
    FilterState prior;
    prior.phase = Phase::Prior;
    prior.step = posterior.step + 1;
    prior.x = A * posterior.x;
    if (u.size() > 0) prior.x += B * u;
    prior.P = A * posterior.P * A.transpose() + Q;
    prior.P = 0.5 * (prior.P + prior.P.transpose());
    return prior;
}

Vec apply_gain(const Vec& x, const Vec& y, const Mat& C, const Mat& gain) {
    if (y.size() == 0) return x;
    return x + gain * (y - C * x);
}

CentralTrajectory run_central_filter(const CentralModel& model,
                                     const std::vector<Vec>& measurements,
                                     const std::vector<Vec>& inputs, const Vec& x0, const Mat& P0,
                                     int substeps) {
    if (substeps < 1) throw std::invalid_argument("run_central_filter: substeps must be >= 1");
    if (!inputs.empty() && inputs.size() != measurements.size() * static_cast<std::size_t>(substeps))
        throw std::invalid_argument("run_central_filter: input stream length mismatch");

    CentralTrajectory out;
    FilterState state{x0, P0, Phase::Prior, 0};
    const Vec no_input;
    for (std::size_t q = 0; q < measurements.size(); ++q) {
        FilterState post = correct(state, measurements[q], model.C, model.R);
        out.times.push_back((static_cast<double>(q) + 1.0) * model.dt * substeps);
        out.posteriors.push_back(post.x);
        for (int s = 0; s < substeps; ++s) {
            const Vec& u = inputs.empty() ? no_input : inputs[q * substeps + s];
            FilterState next = predict(post, model.A, model.B, u, model.Q);
            post = next;
            post.phase = Phase::Posterior;  // no measurement between samples
        }
        state = post;
        state.phase = Phase::Prior;
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const CentralTrajectory& trajectory) {
    os << "time,vertex,estimate\n";
    for (std::size_t q = 0; q < trajectory.posteriors.size(); ++q)
        for (int v = 0; v < trajectory.posteriors[q].size(); ++v)
            os << trajectory.times[q] << ',' << v << ',' << trajectory.posteriors[q][v] << '\n';
}

}  // namespace fekf
