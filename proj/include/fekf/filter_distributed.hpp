#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "fekf/filter_central.hpp"
#include "fekf/model.hpp"

namespace fekf {

/// Boundary data exchanged in one consensus round: the sender's estimate at
/// the receiver's interface vertices, one round old and two rounds old, plus
/// the matching covariance diagonal. The covariance entries are transmitted
/// and available for logging but the covariance recursion never reads them.
struct BoundaryMessage {
    int sender = -1;
    int receiver = -1;
    int round = -1;
    Vec current;   // sender estimate at round l-1
    Vec delayed;   // sender estimate at round l-2
    Vec cov_diag;
};

class MessageTransport {
public:
    virtual ~MessageTransport() = default;
    virtual void send(BoundaryMessage msg) = 0;
    /// All messages addressed to `receiver` for `round`; removed from the box.
    virtual std::vector<BoundaryMessage> collect(int receiver, int round) = 0;
};

/// Mailbox transport for nodes living in one process; sends are allowed from
/// concurrent node workers.
class InProcessTransport final : public MessageTransport {
public:
    explicit InProcessTransport(int node_count);
    void send(BoundaryMessage msg) override;
    std::vector<BoundaryMessage> collect(int receiver, int round) override;

private:
    struct Box {
        std::mutex mutex;
        std::vector<BoundaryMessage> messages;
    };
    std::vector<std::unique_ptr<Box>> boxes_;
};

/// Per-node filter state. An empty covariance (0x0) selects the
/// estimate-only mode used when gains are precomputed.
struct NodeState {
    int node = -1;
    Vec x;        // latest estimate
    Vec x_prev;   // previous-round estimate (the delayed consensus buffer)
    Mat P;
    Phase phase = Phase::Prior;
    int sample = 0;
    int round = 0;
};

using InputProvider = std::function<Vec(int node, int round)>;

/// Shared wiring of one distributed filter instance: models, index maps,
/// transport, optional worker threads and message tracing.
struct ConsensusRuntime {
    const std::vector<LocalModel>* models = nullptr;
    const Decomposition* dec = nullptr;
    MessageTransport* transport = nullptr;
    int threads = 1;
    std::ostream* trace = nullptr;
    std::mutex* trace_mutex = nullptr;
};

std::vector<NodeState> make_node_states(const ConsensusRuntime& rt, double initial_value,
                                        double initial_cov);

/// Local measurement update; an empty y leaves the estimate unchanged.
void local_correct(NodeState& node, const Vec& y, const Mat& C, const Mat& R);

/// Estimate-only variant for a precomputed gain.
void local_correct_with_gain(NodeState& node, const Vec& y, const Mat& C, const Mat& gain);

/// One synchronous consensus round: every node posts its boundary data, a
/// barrier separates sends from computation, then every node advances its
/// estimate (and covariance, scaled by gamma_step^2) one sub-interval.
/// Throws ProtocolError when a neighbor message is missing.
void consensus_round(const ConsensusRuntime& rt, std::vector<NodeState>& nodes, int round,
                     double gamma_step, const InputProvider& input = nullptr);

/// Correct + L consensus rounds; the per-round boost is gamma_total^(1/L).
void run_sampling_cycle(const ConsensusRuntime& rt, std::vector<NodeState>& nodes,
                        const std::vector<Vec>& y_per_node, int L, double gamma_total,
                        const InputProvider& input = nullptr);

/// Duplicate-averaged global estimate.
Vec gather_global_estimate(const std::vector<NodeState>& nodes, const Decomposition& dec);

/// Stack node estimates into augmented layout.
Vec stack_estimates(const std::vector<NodeState>& nodes, const Decomposition& dec);

/// CSV emission of one node's trajectory: time,vertex,estimate (vertex ids
/// are global).
void write_node_trajectory_csv(std::ostream& os, const Decomposition& dec, int node,
                               const std::vector<double>& times,
                               const std::vector<Vec>& estimates);

}  // namespace fekf
